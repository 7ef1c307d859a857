//! The interactive planning loop: one session per task, one round per user
//! utterance, failures handed back to the human for guidance.

use std::io::{self, Write};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::backend::{BackendError, BackendReply, PlanBackend};
use crate::domain::{AliasTable, FailureReport, Plan, Vocabulary};
use crate::feasibility::{build_graph, effector_start, grasp_target, FeasibilityError, FeasibilityScore, ReachGraph, ReachParams};
use crate::lexicon::scan;
use crate::perception::{describe, detect, VisibilityPolicy};
use crate::protocol::{append_failure_to_history, parse_robot_output, ParseOptions, PlannerResult, SessionRecord};
use crate::world::{ExecutionEvent, World};

/// Objects and group names mentioned in text, in order of appearance.
pub fn extract_objects(input: &str, vocab: &Vocabulary) -> Vec<String> {
    let names: Vec<&String> = vocab.objects.iter().chain(vocab.categories.keys()).collect();
    scan(input, names)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    AwaitingUser,
    Planning,
    AwaitingGuidance,
    Executing,
    Done,
    TimedOut,
    Exhausted,
}

impl SessionState {
    pub fn is_terminal(self) -> bool {
        matches!(self, SessionState::Done | SessionState::TimedOut | SessionState::Exhausted)
    }

    pub fn accepts_input(self) -> bool {
        matches!(self, SessionState::AwaitingUser | SessionState::AwaitingGuidance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub max_recovery_rounds: u32,
    /// Seconds.
    pub wall_clock: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_recovery_rounds: 2,
            wall_clock: 120.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    UserInput,
    VisionFeedback,
    FeasibilityFeedback,
    BackendReply,
    PlanAccepted,
    FailureReported,
    GuidanceRequested,
    StepExecuted,
    SessionEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    /// Seconds since the session was created.
    pub timestamp: f64,
    pub kind: EventKind,
    pub payload: serde_json::Value,
}

/// Seconds spent in each stage of one planner round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundTiming {
    pub vision: f64,
    pub feasibility: f64,
    pub planner: f64,
    pub total: f64,
}

impl RoundTiming {
    /// Time not spent in the backend or the reachability query.
    pub fn overhead(&self) -> f64 {
        (self.total - self.planner - self.feasibility).max(0.0)
    }
}

/// Everything that happened in one planner round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: u32,
    pub record: SessionRecord,
    pub reply: Option<String>,
    pub result: Option<PlannerResult>,
    pub executed: Vec<ExecutionEvent>,
    /// The failure handed to the human, if any.
    pub failure: Option<FailureReport>,
    pub timing: RoundTiming,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub policy: VisibilityPolicy,
    pub limits: Limits,
    pub reach: ReachParams,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            policy: VisibilityPolicy::default(),
            limits: Limits::default(),
            reach: ReachParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("session is {0:?} and does not accept input")]
    NotAccepting(SessionState),
    #[error("input must not be empty")]
    EmptyInput,
}

/// Serializable view of a session for clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub id: String,
    pub state: SessionState,
    pub rounds_used: u32,
    pub limits: Limits,
    pub prompt: Option<String>,
    pub world: crate::world::WorldState,
    pub event_count: usize,
}

pub struct Session {
    id: String,
    world: World,
    graph: Arc<ReachGraph>,
    config: SessionConfig,
    aliases: AliasTable,
    record: Option<SessionRecord>,
    pending_failure: Option<FailureReport>,
    rounds_used: u32,
    state: SessionState,
    started: Instant,
    events: Vec<SessionEvent>,
    rounds: Vec<RoundSummary>,
}

impl Session {
    /// New session; builds the reachability roadmap for the world.
    pub fn new(id: impl Into<String>, world: World, config: SessionConfig) -> Result<Session, FeasibilityError> {
        let graph = Arc::new(build_graph(world.state(), &config.reach)?);
        Ok(Self::with_graph(id, world, config, graph))
    }

    /// New session reusing a roadmap built for the same furniture layout.
    pub fn with_graph(id: impl Into<String>, world: World, config: SessionConfig, graph: Arc<ReachGraph>) -> Session {
        Session {
            id: id.into(),
            world,
            graph,
            config,
            aliases: AliasTable::default(),
            record: None,
            pending_failure: None,
            rounds_used: 0,
            state: SessionState::AwaitingUser,
            started: Instant::now(),
            events: Vec::new(),
            rounds: Vec::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn graph(&self) -> &Arc<ReachGraph> {
        &self.graph
    }

    pub fn record(&self) -> Option<&SessionRecord> {
        self.record.as_ref()
    }

    pub fn rounds_used(&self) -> u32 {
        self.rounds_used
    }

    pub fn limits(&self) -> &Limits {
        &self.config.limits
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn rounds(&self) -> &[RoundSummary] {
        &self.rounds
    }

    pub fn policy_mut(&mut self) -> &mut VisibilityPolicy {
        &mut self.config.policy
    }

    pub fn set_aliases(&mut self, aliases: AliasTable) {
        self.aliases = aliases;
    }

    /// Scenario scripting: change the world between rounds.
    pub fn edit_world<F>(&mut self, edit: F) -> Result<(), String>
    where
        F: FnOnce(&World) -> Result<World, String>,
    {
        self.world = edit(&self.world)?;
        Ok(())
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            id: self.id.clone(),
            state: self.state,
            rounds_used: self.rounds_used,
            limits: self.config.limits,
            prompt: self.record.as_ref().map(crate::protocol::serialize_prompt),
            world: self.world.snapshot(),
            event_count: self.events.len(),
        }
    }

    fn elapsed(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    fn emit(&mut self, kind: EventKind, payload: serde_json::Value) {
        let now = self.elapsed();
        let timestamp = self.events.last().map_or(now, |e| e.timestamp.max(now));
        self.events.push(SessionEvent {
            seq: self.events.len() as u64,
            timestamp,
            kind,
            payload,
        });
    }

    fn finish(&mut self, state: SessionState) {
        self.state = state;
        self.emit(
            EventKind::SessionEnd,
            json!({ "state": state, "rounds_used": self.rounds_used }),
        );
    }

    fn call_backend(&self, backend: &dyn PlanBackend, record: &SessionRecord) -> (Result<BackendReply, BackendError>, u32) {
        match backend.plan(record) {
            Ok(r) => (Ok(r), 1),
            Err(_) => (backend.plan(record), 2),
        }
    }

    /// Run one planner round on a user request or guidance utterance.
    /// Returns the events this round produced.
    pub fn step(&mut self, user_text: &str, backend: &dyn PlanBackend) -> Result<Vec<SessionEvent>, StepError> {
        if !self.state.accepts_input() {
            return Err(StepError::NotAccepting(self.state));
        }
        let text = user_text.trim();
        if text.is_empty() {
            return Err(StepError::EmptyInput);
        }
        let first_event = self.events.len();
        if self.elapsed() > self.config.limits.wall_clock {
            self.finish(SessionState::TimedOut);
            return Ok(self.events[first_event..].to_vec());
        }
        let round_start = Instant::now();
        let mut record = match (self.state, &self.record, &self.pending_failure) {
            (SessionState::AwaitingGuidance, Some(prev), Some(failure)) => {
                append_failure_to_history(prev, failure, text).expect("guidance is non-empty")
            }
            _ => SessionRecord::request(text).expect("request is non-empty"),
        };
        self.pending_failure = None;
        self.rounds_used += 1;
        self.state = SessionState::Planning;
        self.emit(
            EventKind::UserInput,
            json!({ "text": text, "round": self.rounds_used, "history_len": record.history().len() }),
        );

        let mut timing = RoundTiming::default();
        let vocab = self.world.vocabulary();
        let mut query = extract_objects(text, &vocab);
        if query.is_empty() && !record.history().is_empty() {
            query = extract_objects(record.original_request(), &vocab);
        }

        let t = Instant::now();
        let snapshot = self.world.snapshot();
        let report = detect(&snapshot, &query, &self.config.policy).expect("query drawn from the world vocabulary");
        let vision = describe(&report);
        timing.vision = t.elapsed().as_secs_f64();
        self.emit(EventKind::VisionFeedback, json!({ "query": query, "text": vision }));

        let t = Instant::now();
        let reach = &self.config.reach;
        let start = effector_start(&snapshot.robot.base, reach);
        let base = snapshot.robot.base.position();
        let nearest = report.matches().min_by(|a, b| {
            let da = a.pose.position().planar_distance(&base);
            let db = b.pose.position().planar_distance(&base);
            da.total_cmp(&db)
        });
        let (score, target) = match nearest {
            Some(m) => {
                let target = grasp_target(&m.pose, reach);
                (self.graph.get_score(&start, &target), Some((m.object.clone(), target)))
            }
            None => (FeasibilityScore::Infeasible, None),
        };
        timing.feasibility = t.elapsed().as_secs_f64();
        self.emit(
            EventKind::FeasibilityFeedback,
            json!({
                "score": score.value(),
                "object": target.as_ref().map(|(o, _)| o.clone()),
                "target": target.as_ref().map(|(_, p)| [p.x, p.y, p.z]),
            }),
        );
        record = record.with_observations(vision, score);

        let t = Instant::now();
        let (reply, attempts) = self.call_backend(backend, &record);
        timing.planner = t.elapsed().as_secs_f64();

        let mut summary = RoundSummary {
            round: self.rounds_used,
            record: record.clone(),
            reply: None,
            result: None,
            executed: Vec::new(),
            failure: None,
            timing,
        };
        self.record = Some(record);

        let failure = match reply {
            Err(e) => {
                self.emit(
                    EventKind::BackendReply,
                    json!({ "error": e.to_string(), "attempts": attempts }),
                );
                Some(FailureReport::execution_without_step(&e.to_string()))
            }
            Ok(reply) => {
                self.emit(
                    EventKind::BackendReply,
                    json!({ "text": reply.text, "latency": reply.latency, "attempts": attempts }),
                );
                summary.reply = Some(reply.text.clone());
                let opts = ParseOptions::lenient().with_vocab(&vocab).with_aliases(&self.aliases);
                match parse_robot_output(&reply.text, &opts) {
                    Err(e) => Some(FailureReport::execution_without_step(&format!("planner reply rejected ({e})"))),
                    Ok(result) => {
                        summary.result = Some(result.clone());
                        match result {
                            PlannerResult::Failure(report) => Some(report),
                            PlannerResult::Plan(plan) => self.execute(&plan, &mut summary.executed),
                        }
                    }
                }
            }
        };

        summary.timing.total = round_start.elapsed().as_secs_f64();
        match failure {
            None => self.finish(SessionState::Done),
            Some(report) => {
                self.emit(
                    EventKind::FailureReported,
                    json!({
                        "kind": report.kind().tag(),
                        "subject": report.subject(),
                        "explanation": report.explanation(),
                        "text": crate::protocol::render_result(&PlannerResult::Failure(report.clone())),
                    }),
                );
                summary.failure = Some(report.clone());
                if self.rounds_used > self.config.limits.max_recovery_rounds {
                    self.finish(SessionState::Exhausted);
                } else if self.elapsed() > self.config.limits.wall_clock {
                    self.finish(SessionState::TimedOut);
                } else {
                    self.pending_failure = Some(report);
                    self.state = SessionState::AwaitingGuidance;
                    let left = self.config.limits.max_recovery_rounds + 1 - self.rounds_used;
                    self.emit(
                        EventKind::GuidanceRequested,
                        json!({ "round": self.rounds_used, "rounds_left": left }),
                    );
                }
            }
        }
        self.rounds.push(summary);
        Ok(self.events[first_event..].to_vec())
    }

    /// Execute a validated plan; the first failed step becomes an execution failure.
    fn execute(&mut self, plan: &Plan, executed: &mut Vec<ExecutionEvent>) -> Option<FailureReport> {
        self.emit(
            EventKind::PlanAccepted,
            json!({ "plan": plan.to_string(), "steps": plan.len() }),
        );
        self.state = SessionState::Executing;
        for (i, step) in plan.steps().iter().enumerate() {
            let (next, event) = self.world.apply_action(step);
            self.world = next;
            self.emit(
                EventKind::StepExecuted,
                json!({
                    "index": i,
                    "step": step.to_string(),
                    "outcome": event.outcome,
                    "detail": event.detail,
                }),
            );
            let ok = event.is_done();
            executed.push(event.clone());
            if !ok {
                let remaining = plan.suffix(i).expect("index within plan");
                return Some(FailureReport::execution(step, &event.detail, &remaining));
            }
        }
        None
    }

    /// Write the event stream as JSON lines.
    pub fn write_event_log<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Functional form of [`Session::step`].
pub fn step_session(
    mut session: Session,
    user_text: &str,
    backend: &dyn PlanBackend,
) -> Result<(Session, Vec<SessionEvent>), (Session, StepError)> {
    match session.step(user_text, backend) {
        Ok(events) => Ok((session, events)),
        Err(e) => Err((session, e)),
    }
}
