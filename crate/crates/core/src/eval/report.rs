use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::orchestrator::SessionState;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub success: usize,
    pub eligible: usize,
}

impl Ratio {
    /// `None` when nothing was eligible.
    pub fn rate(&self) -> Option<f64> {
        (self.eligible > 0).then(|| self.success as f64 / self.eligible as f64)
    }

    pub fn add(&mut self, outcome: Option<bool>) {
        if let Some(ok) = outcome {
            self.eligible += 1;
            self.success += usize::from(ok);
        }
    }
}

/// Per-scenario verdicts; `None` means the metric does not apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub id: String,
    pub planning: Option<bool>,
    pub explanation: Option<bool>,
    pub recovery: Option<bool>,
    pub execution: Option<bool>,
    pub final_state: SessionState,
    pub rounds: u32,
    /// Script expectations that did not hold.
    pub mismatches: Vec<String>,
    #[serde(default)]
    pub tags: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub planning: Ratio,
    pub explanation: Ratio,
    pub recovery: Ratio,
    pub execution: Ratio,
}

impl Counts {
    pub fn add(&mut self, r: &ScenarioResult) {
        self.planning.add(r.planning);
        self.explanation.add(r.explanation);
        self.recovery.add(r.recovery);
        self.execution.add(r.execution);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean: f64,
    pub p95: f64,
    pub samples: usize,
}

impl LatencyStats {
    pub fn from_samples(samples: &[f64]) -> Option<LatencyStats> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let rank = ((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
        Some(LatencyStats {
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            p95: sorted[rank - 1],
            samples: sorted.len(),
        })
    }
}

/// Mean seconds per planner round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingBreakdown {
    pub vision: f64,
    pub feasibility: f64,
    pub planner: f64,
    pub total: f64,
    /// Round time outside the planner and reachability calls.
    pub overhead: f64,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub suite: String,
    pub backend: String,
    pub scenarios: usize,
    pub task_planning_rate: Option<f64>,
    pub failure_explanation_rate: Option<f64>,
    pub failure_recovery_rate: Option<f64>,
    pub execution_rate: Option<f64>,
    pub counts: Counts,
    pub inference_time: Option<LatencyStats>,
    pub timing: TimingBreakdown,
    pub per_tag: BTreeMap<String, Counts>,
    pub results: Vec<ScenarioResult>,
}

impl MetricsReport {
    pub fn from_results(suite: &str, backend: &str, results: Vec<ScenarioResult>) -> MetricsReport {
        let mut counts = Counts::default();
        let mut per_tag: BTreeMap<String, Counts> = BTreeMap::new();
        for r in &results {
            counts.add(r);
            for (k, v) in &r.tags {
                per_tag.entry(format!("{k}={v}")).or_default().add(r);
            }
        }
        MetricsReport {
            suite: suite.to_string(),
            backend: backend.to_string(),
            scenarios: results.len(),
            task_planning_rate: counts.planning.rate(),
            failure_explanation_rate: counts.explanation.rate(),
            failure_recovery_rate: counts.recovery.rate(),
            execution_rate: counts.execution.rate(),
            counts,
            inference_time: None,
            timing: TimingBreakdown::default(),
            per_tag,
            results,
        }
    }

    /// Whether every scenario met all of its script expectations.
    pub fn all_expectations_met(&self) -> bool {
        self.results.iter().all(|r| r.mismatches.is_empty())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderOptions {
    pub format: ReportFormat,
    /// Leave out wall-clock measurements so output is reproducible.
    pub timing: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            format: ReportFormat::Text,
            timing: true,
        }
    }
}

fn pct(rate: Option<f64>) -> String {
    match rate {
        Some(r) => format!("{:.2}%", r * 100.0),
        None => "n/a".to_string(),
    }
}

fn verdict(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "ok",
        Some(false) => "FAIL",
        None => "-",
    }
}

pub fn render_report(report: &MetricsReport, options: RenderOptions) -> String {
    match options.format {
        ReportFormat::Json => {
            let mut r = report.clone();
            if !options.timing {
                r.inference_time = None;
                r.timing = TimingBreakdown::default();
            }
            serde_json::to_string_pretty(&r).expect("report serializes") + "\n"
        }
        ReportFormat::Text => render_text(report, options.timing),
    }
}

fn render_text(report: &MetricsReport, timing: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "suite: {}  backend: {}", report.suite, report.backend);
    let _ = writeln!(out, "{} scenarios", report.scenarios);
    if report.scenarios == 0 {
        return out;
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<22}{:>9}{:>10}{:>10}", "metric", "success", "eligible", "rate");
    let c = &report.counts;
    for (name, ratio) in [
        ("task planning", c.planning),
        ("failure explanation", c.explanation),
        ("failure recovery", c.recovery),
        ("execution", c.execution),
    ] {
        let _ = writeln!(
            out,
            "{:<22}{:>9}{:>10}{:>10}",
            name,
            ratio.success,
            ratio.eligible,
            pct(ratio.rate())
        );
    }
    if timing {
        let _ = writeln!(out);
        match &report.inference_time {
            Some(s) => {
                let _ = writeln!(
                    out,
                    "inference time: mean {:.6} s, p95 {:.6} s over {} calls",
                    s.mean, s.p95, s.samples
                );
            }
            None => {
                let _ = writeln!(out, "inference time: n/a");
            }
        }
        let t = &report.timing;
        let _ = writeln!(out, "planning time breakdown (mean per round, {} rounds)", t.rounds);
        let _ = writeln!(out, "{:>18} | {:>18} | {:>18}", "Vision query", "Feasibility query", "Planner query");
        let _ = writeln!(
            out,
            "{:>16.6} s | {:>16.6} s | {:>16.6} s",
            t.vision, t.feasibility, t.planner
        );
        let _ = writeln!(out, "orchestration overhead: {:.6} s per round", t.overhead);
    }
    if !report.per_tag.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<28}{:>10}{:>10}{:>10}{:>10}",
            "tag", "planning", "explain", "recover", "execute"
        );
        for (tag, c) in &report.per_tag {
            let _ = writeln!(
                out,
                "{:<28}{:>10}{:>10}{:>10}{:>10}",
                tag,
                pct(c.planning.rate()),
                pct(c.explanation.rate()),
                pct(c.recovery.rate()),
                pct(c.execution.rate())
            );
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<32}{:>6}{:>9}{:>9}{:>9}{:>8}  {}",
        "scenario", "plan", "explain", "recover", "execute", "rounds", "state"
    );
    for r in &report.results {
        let state = serde_json::to_value(r.final_state)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{:<32}{:>6}{:>9}{:>9}{:>9}{:>8}  {}",
            r.id,
            verdict(r.planning),
            verdict(r.explanation),
            verdict(r.recovery),
            verdict(r.execution),
            r.rounds,
            state
        );
        for m in &r.mismatches {
            let _ = writeln!(out, "    {m}");
        }
    }
    out
}
