//! Scenario suites, success metrics and report rendering.

mod instructions;
mod report;
mod scenario;

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::backend::{build_backend, BackendConfig, ConfigError, OracleLexicon, PlanBackend};
use crate::domain::AliasTable;
use crate::feasibility::{build_graph, ReachGraph, ReachParams};
use crate::orchestrator::{Session, SessionConfig, SessionState};
use crate::protocol::PlannerResult;
use crate::world::{resolve_world, World};

pub use instructions::{instruction_suite, load_instruction_suite, AnnotationError, Instruction, INSTRUCTION_FIXTURE};
pub use report::{
    render_report, Counts, LatencyStats, MetricsReport, Ratio, RenderOptions, ReportFormat, ScenarioResult,
    TimingBreakdown,
};
pub use scenario::{bundled_suite, normalize_plan, Edit, Expect, Scenario, ScriptLine, Suite, SuiteError, CORE_SUITE, NO_FAILURE_SUITE};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Suite(#[from] SuiteError),
    #[error(transparent)]
    Backend(#[from] ConfigError),
}

/// Base world and roadmap shared by every scenario that names it.
struct Prepared {
    world: World,
    graph: Arc<ReachGraph>,
}

#[derive(Default)]
struct WorldCache {
    entries: HashMap<String, Prepared>,
}

impl WorldCache {
    fn get(&mut self, scenario: &Scenario) -> Result<&Prepared, SuiteError> {
        if !self.entries.contains_key(&scenario.world) {
            let world = resolve_world(&scenario.world).map_err(|e| scenario.invalid(e.to_string()))?;
            let graph = build_graph(world.state(), &ReachParams::default())
                .map_err(|e| scenario.invalid(e.to_string()))?;
            self.entries.insert(
                scenario.world.clone(),
                Prepared {
                    world,
                    graph: Arc::new(graph),
                },
            );
        }
        Ok(&self.entries[&scenario.world])
    }
}

/// A scenario's finished session plus its verdicts.
pub struct ScenarioRun {
    pub result: ScenarioResult,
    pub session: Session,
}

fn plan_matches(expected: &str, observed: Option<&PlannerResult>) -> bool {
    match (normalize_plan(expected, &AliasTable::default()), observed) {
        (Some(want), Some(PlannerResult::Plan(got))) => &want == got,
        _ => false,
    }
}

fn all(v: &[bool]) -> Option<bool> {
    (!v.is_empty()).then(|| v.iter().all(|b| *b))
}

fn run_prepared(scenario: &Scenario, prepared: &Prepared, backend: &dyn PlanBackend) -> Result<ScenarioRun, SuiteError> {
    let mut policy = scenario.policy.clone();
    let mut world = prepared.world.clone();
    for fault in &scenario.faults {
        world = world.inject_fault(fault.clone());
    }
    for edit in &scenario.setup {
        world = edit.apply(&world, &mut policy).map_err(|e| scenario.invalid(e))?;
    }
    let config = SessionConfig {
        policy,
        limits: scenario.limits.unwrap_or_default(),
        ..SessionConfig::default()
    };
    let mut session = Session::with_graph(scenario.id.clone(), world, config, prepared.graph.clone());

    let mut mismatches = Vec::new();
    let mut planning = Vec::new();
    let mut explanation = Vec::new();
    let mut recovery = Vec::new();
    let mut seen_failure_expectation = false;
    let mut first_line = true;

    for (n, line) in scenario.script.iter().enumerate() {
        let n = n + 1;
        let expect = &line.expect;
        let stepped = if session.state().accepts_input() {
            for edit in &line.edits {
                let mut policy = session.policy_mut().clone();
                session
                    .edit_world(|w| edit.apply(w, &mut policy))
                    .map_err(|e| scenario.invalid(e))?;
                *session.policy_mut() = policy;
            }
            session.step(&line.say, backend).is_ok()
        } else {
            false
        };
        if !stepped {
            mismatches.push(format!("line {n}: session no longer accepts input"));
        }
        let round = if stepped { session.rounds().last() } else { None };
        let observed = round.and_then(|r| r.result.as_ref());
        let failure = round.and_then(|r| r.failure.as_ref());

        if let Some(p) = &expect.plan {
            let ok = plan_matches(p, observed);
            if !ok {
                let got = observed.map(crate::protocol::render_result).unwrap_or_else(|| "nothing".into());
                mismatches.push(format!("line {n}: expected plan `{p}`, got `{got}`"));
            }
            if seen_failure_expectation {
                recovery.push(ok);
            } else if first_line {
                planning.push(ok);
            }
        }
        if let Some(kind) = expect.failure {
            seen_failure_expectation = true;
            let kind_ok = failure.is_some_and(|f| f.kind() == kind);
            let subject_ok = match &expect.subject {
                Some(s) => failure.and_then(|f| f.subject()) == Some(s.as_str()),
                None => true,
            };
            if !(kind_ok && subject_ok) {
                let got = failure
                    .map(|f| format!("{}({})", f.kind().tag(), f.subject().unwrap_or("")))
                    .unwrap_or_else(|| "no failure".into());
                mismatches.push(format!("line {n}: expected failure {}, got {got}", kind.tag()));
            }
            explanation.push(kind_ok && subject_ok);
        }
        if let Some(state) = expect.state {
            if session.state() != state {
                mismatches.push(format!("line {n}: expected state {state:?}, session is {:?}", session.state()));
            }
        }
        first_line = false;
    }

    let planning_verdict = if scenario.has_failure_expectation() {
        None
    } else {
        all(&planning)
    };
    let explanation_verdict = all(&explanation);
    let recovery_verdict = all(&recovery);

    let wants_execution = scenario.goal.is_some()
        || scenario
            .script
            .iter()
            .any(|l| l.expect.state == Some(SessionState::Done));
    let execution_verdict = wants_execution.then(|| {
        let goal_ok = scenario
            .goal
            .as_ref()
            .is_none_or(|g| g.holds(session.world().state()));
        if !goal_ok {
            let g = scenario.goal.as_ref().expect("checked");
            mismatches.push(format!("goal `{g}` does not hold"));
        }
        let plans_ok = planning.iter().chain(&recovery).all(|b| *b);
        session.state() == SessionState::Done && goal_ok && plans_ok
    });

    let result = ScenarioResult {
        id: scenario.id.clone(),
        planning: planning_verdict,
        explanation: explanation_verdict,
        recovery: recovery_verdict,
        execution: execution_verdict,
        final_state: session.state(),
        rounds: session.rounds_used(),
        mismatches,
        tags: scenario.tags.clone(),
    };
    Ok(ScenarioRun { result, session })
}

/// Run one scenario against a backend.
pub fn run_scenario(scenario: &Scenario, backend: &dyn PlanBackend) -> Result<ScenarioRun, SuiteError> {
    let mut cache = WorldCache::default();
    let prepared = cache.get(scenario)?;
    run_prepared(scenario, prepared, backend)
}

fn aggregate(suite: &Suite, backend_name: &str, runs: Vec<ScenarioRun>) -> MetricsReport {
    let mut planner = Vec::new();
    let mut timing = TimingBreakdown::default();
    for run in &runs {
        for r in run.session.rounds() {
            planner.push(r.timing.planner);
            timing.vision += r.timing.vision;
            timing.feasibility += r.timing.feasibility;
            timing.planner += r.timing.planner;
            timing.total += r.timing.total;
            timing.overhead += r.timing.overhead();
            timing.rounds += 1;
        }
    }
    if timing.rounds > 0 {
        let n = timing.rounds as f64;
        timing.vision /= n;
        timing.feasibility /= n;
        timing.planner /= n;
        timing.total /= n;
        timing.overhead /= n;
    }
    let mut report = MetricsReport::from_results(&suite.name, backend_name, runs.into_iter().map(|r| r.result).collect());
    report.inference_time = LatencyStats::from_samples(&planner);
    report.timing = timing;
    report
}

/// Run every scenario against one backend instance.
pub fn run_suite_with(suite: &Suite, backend: &dyn PlanBackend) -> Result<MetricsReport, SuiteError> {
    let mut cache = WorldCache::default();
    let mut runs = Vec::with_capacity(suite.scenarios.len());
    for scenario in &suite.scenarios {
        let prepared = cache.get(scenario)?;
        runs.push(run_prepared(scenario, prepared, backend)?);
    }
    Ok(aggregate(suite, backend.name(), runs))
}

/// Run a suite with the configured backend; the rule oracle gets a
/// lexicon for each scenario's world.
pub fn run_suite(suite: &Suite, config: &BackendConfig) -> Result<MetricsReport, EvalError> {
    let mut cache = WorldCache::default();
    let mut backends: HashMap<String, Box<dyn PlanBackend>> = HashMap::new();
    let mut runs = Vec::with_capacity(suite.scenarios.len());
    let mut name = String::from(match config.kind {
        crate::backend::BackendKind::Rule => "rule",
        crate::backend::BackendKind::Remote => "remote",
    });
    for scenario in &suite.scenarios {
        let prepared = cache.get(scenario)?;
        if !backends.contains_key(&scenario.world) {
            let lexicon = OracleLexicon::for_world(prepared.world.state());
            backends.insert(scenario.world.clone(), build_backend(config, &lexicon)?);
        }
        let backend = &backends[&scenario.world];
        name = backend.name().to_string();
        runs.push(run_prepared(scenario, prepared, backend.as_ref())?);
    }
    Ok(aggregate(suite, &name, runs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule() -> BackendConfig {
        BackendConfig::rule()
    }

    #[test]
    fn core_suite_is_fully_solved_by_the_oracle() {
        let suite = bundled_suite("core").unwrap();
        let report = run_suite(&suite, &rule()).unwrap();
        let text = render_report(&report, RenderOptions { format: ReportFormat::Text, timing: false });
        assert!(report.all_expectations_met(), "{text}");
        for rate in [
            report.task_planning_rate,
            report.failure_explanation_rate,
            report.failure_recovery_rate,
            report.execution_rate,
        ] {
            assert_eq!(rate, Some(1.0), "{text}");
        }
    }

    #[test]
    fn no_failure_suite_has_no_failure_metrics() {
        let suite = bundled_suite("no_failure").unwrap();
        let report = run_suite(&suite, &rule()).unwrap();
        assert_eq!(report.failure_explanation_rate, None);
        assert_eq!(report.failure_recovery_rate, None);
        assert_eq!(report.task_planning_rate, Some(1.0));
        let text = render_report(&report, RenderOptions { format: ReportFormat::Text, timing: false });
        assert!(text.contains("failure explanation           0         0       n/a"), "{text}");
    }

    #[test]
    fn empty_suite_renders_marker() {
        let suite = Suite::from_toml("name = \"empty\"\n").unwrap();
        let report = run_suite(&suite, &rule()).unwrap();
        assert_eq!(report.task_planning_rate, None);
        let text = render_report(&report, RenderOptions::default());
        assert!(text.contains("0 scenarios"));
        let json = render_report(&report, RenderOptions { format: ReportFormat::Json, timing: true });
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(v["task_planning_rate"].is_null());
    }

    #[test]
    fn timing_components_fit_inside_round_total() {
        let suite = bundled_suite("core").unwrap();
        let report = run_suite(&suite, &rule()).unwrap();
        let t = report.timing;
        assert!(t.rounds > 0);
        assert!(t.vision + t.feasibility + t.planner <= t.total + 1e-9);
        assert!(report.inference_time.is_some());
    }

    #[test]
    fn wrong_expectation_is_reported() {
        let suite = Suite::from_toml(
            r#"
name = "t"
[[scenarios]]
id = "wrong"
[[scenarios.script]]
say = "fetch me the orange"
expect = { plan = "pick(apple) ; go(home) ; place(apple)" }
"#,
        )
        .unwrap();
        let report = run_suite(&suite, &rule()).unwrap();
        assert_eq!(report.task_planning_rate, Some(0.0));
        assert_eq!(report.results[0].mismatches.len(), 1);
        assert!(!report.all_expectations_met());
    }

    #[test]
    fn unparsable_expected_plan_rejected_at_load() {
        let err = Suite::from_toml(
            r#"
name = "t"
[[scenarios]]
id = "bad"
[[scenarios.script]]
say = "x"
expect = { plan = "fly(home)" }
"#,
        )
        .unwrap_err();
        assert!(matches!(err, SuiteError::Invalid { .. }));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let doc = r#"
name = "t"
[[scenarios]]
id = "a"
script = [{ say = "go to the sofa" }]
[[scenarios]]
id = "a"
script = [{ say = "go to the sofa" }]
"#;
        assert!(Suite::from_toml(doc).is_err());
    }
}
