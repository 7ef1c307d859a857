//! Interactive embodied task planner: typed domain model, prompt protocol,
//! simulated household world, perception and reachability feedback, planner
//! backends, the interaction loop, dataset synthesis and evaluation.

pub mod backend;
pub mod dataset;
pub mod domain;
pub mod eval;
pub mod feasibility;
pub mod geometry;
pub mod lexicon;
pub mod orchestrator;
pub mod perception;
pub mod protocol;
pub mod world;

pub use backend::{build_backend, BackendConfig, BackendError, BackendKind, BackendReply, PlanBackend, RuleOracle};
pub use domain::{ActionStep, AliasTable, FailureKind, FailureReport, Plan, Pose, SkillVerb, Vocabulary};
pub use feasibility::{build_graph, FeasibilityScore, ReachGraph, ReachParams};
pub use orchestrator::{Limits, Session, SessionConfig, SessionEvent, SessionState};
pub use perception::VisibilityPolicy;
pub use protocol::{parse_prompt, parse_robot_output, serialize_prompt, ParseOptions, PlannerResult, SessionRecord};
pub use world::{load_world, resolve_world, Goal, World, WorldState};
