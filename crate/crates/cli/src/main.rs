use std::fs;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use planner_cli::args::BackendArgs;
use planner_cli::feasibility::bench_feasibility;
use planner_cli::repl::run_repl;
use planner_core::backend::OracleLexicon;
use planner_core::dataset::{generate, to_instruct, validate_dataset, write_jsonl, GenConfig, DEFAULT_GEN_CONFIG};
use planner_core::eval::{
    bundled_suite, instruction_suite, load_instruction_suite, render_report, run_suite, RenderOptions, ReportFormat,
    Suite,
};
use planner_core::{build_backend, resolve_world, ReachParams, SessionConfig};

#[derive(Parser)]
#[command(name = "engine", version, about = "Interactive embodied task planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a planning session on the terminal.
    Repl {
        #[arg(long, default_value = "apartment")]
        world: String,
        #[command(flatten)]
        backend: BackendArgs,
        /// Write the session's events as JSONL when the loop ends.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Generate the fine-tuning dataset.
    Dataset {
        /// Generator config; defaults to the bundled one.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        target_count: Option<usize>,
        /// Emit instruction-tuning records instead of input/output pairs.
        #[arg(long)]
        instruct: bool,
    },
    /// Score a scenario suite or an instruction file.
    Eval {
        /// Suite file, or a bundled suite name (`core`, `no_failure`).
        #[arg(long, conflicts_with = "instructions", required_unless_present = "instructions")]
        suite: Option<String>,
        /// Tab-separated instruction file.
        #[arg(long)]
        instructions: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendArgs,
        /// Also write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
        /// Leave wall-clock figures out of the output.
        #[arg(long)]
        no_timing: bool,
        /// Compare the printed report with this file; mismatch exits 1.
        #[arg(long)]
        golden: Option<PathBuf>,
    },
    /// Run the HTTP and WebSocket session service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Reachability roadmap tools.
    Feasibility {
        #[command(subcommand)]
        command: FeasibilityCommand,
    },
}

#[derive(Subcommand)]
enum FeasibilityCommand {
    /// Time roadmap construction and queries.
    Bench {
        #[arg(long, default_value = "apartment")]
        world: String,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_suite(spec: &str) -> anyhow::Result<Suite> {
    if Path::new(spec).is_file() {
        let text = fs::read_to_string(spec).with_context(|| format!("reading {spec}"))?;
        return Ok(Suite::from_toml(&text)?);
    }
    bundled_suite(spec).with_context(|| format!("no suite file or bundled suite named `{spec}`"))
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Repl { world, backend, log } => {
            let world = resolve_world(&world)?;
            let config = backend.resolve()?;
            let backend = build_backend(&config, &OracleLexicon::for_world(world.state()))?;
            let stdin = io::stdin();
            let session = run_repl(stdin.lock(), io::stdout(), world, SessionConfig::default(), backend.as_ref())?;
            if let Some(path) = log {
                let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                session.write_event_log(BufWriter::new(file))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Dataset {
            config,
            out,
            seed,
            target_count,
            instruct,
        } => {
            let text = match &config {
                Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
                None => DEFAULT_GEN_CONFIG.to_string(),
            };
            let mut gen = GenConfig::from_toml(&text)?;
            if let Some(s) = seed {
                gen.seed = s;
            }
            if let Some(n) = target_count {
                gen.target_count = n;
            }
            let records = generate(&gen)?;
            let vocab = resolve_world(&gen.world)?.vocabulary();
            let report = validate_dataset(&records, &vocab);
            let file = fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut w = BufWriter::new(file);
            if instruct {
                for r in &records {
                    writeln!(w, "{}", to_instruct(r))?;
                }
            } else {
                write_jsonl(&records, &mut w)?;
            }
            w.flush()?;
            eprintln!(
                "{} records, {} violations, max round {}, failure kinds {:?}",
                report.records,
                report.violations.len(),
                report.max_round,
                report.failure_kinds
            );
            for v in &report.violations {
                match v.index {
                    Some(i) => eprintln!("  record {i}: {}", v.reason),
                    None => eprintln!("  dataset: {}", v.reason),
                }
            }
            Ok(if report.is_clean() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Eval {
            suite,
            instructions,
            backend,
            report,
            format,
            no_timing,
            golden,
        } => {
            let (suite, check_expectations) = match (suite, instructions) {
                (Some(s), _) => (load_suite(&s)?, true),
                (None, Some(path)) => {
                    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("instructions");
                    (instruction_suite(name, &load_instruction_suite(&text)?), false)
                }
                (None, None) => bail!("pass --suite or --instructions"),
            };
            let config = backend.resolve()?;
            let metrics = run_suite(&suite, &config)?;
            let options = RenderOptions {
                format: match format {
                    FormatArg::Text => ReportFormat::Text,
                    FormatArg::Json => ReportFormat::Json,
                },
                timing: !no_timing,
            };
            let rendered = render_report(&metrics, options);
            print!("{rendered}");
            if let Some(path) = report {
                let json = render_report(
                    &metrics,
                    RenderOptions {
                        format: ReportFormat::Json,
                        timing: !no_timing,
                    },
                );
                fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
            }
            let mut ok = !check_expectations || metrics.all_expectations_met();
            if let Some(path) = golden {
                let want = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                if want != rendered {
                    eprintln!("report differs from golden file {}", path.display());
                    ok = false;
                }
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Serve { addr, backend } => {
            let config = backend.resolve()?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr)
                    .await
                    .with_context(|| format!("binding {addr}"))?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                planner_cli::serve::serve(listener, config).await?;
                anyhow::Ok(())
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Feasibility {
            command:
                FeasibilityCommand::Bench {
                    world,
                    queries,
                    samples,
                    seed,
                    json,
                },
        } => {
            let world = resolve_world(&world)?;
            let params = ReachParams {
                n_samples: samples,
                seed,
                ..ReachParams::default()
            };
            let stats = bench_feasibility(&world, &params, queries).map_err(anyhow::Error::msg)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&stats)?);
            } else {
                println!("world {}: {} samples, {} nodes, {} edges", stats.world, stats.n_samples, stats.nodes, stats.edges);
                println!("build      {:.6} s", stats.build_seconds);
                println!(
                    "query      mean {:.6} s, p95 {:.6} s, max {:.6} s over {} queries ({} feasible)",
                    stats.query_mean_seconds, stats.query_p95_seconds, stats.query_max_seconds, stats.queries, stats.feasible
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
