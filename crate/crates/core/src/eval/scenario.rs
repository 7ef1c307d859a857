use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AliasTable, FailureKind, Plan};
use crate::orchestrator::{Limits, SessionState};
use crate::perception::VisibilityPolicy;
use crate::protocol::{parse_robot_output, ParseOptions, PlannerResult};
use crate::world::{FaultSpec, Goal, World};

/// Scripted change applied by the human or the scenario author.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Edit {
    /// Put an object on or in a location; the pose defaults to the spot
    /// nearest the location's approach pose.
    Move {
        object: String,
        to: String,
        #[serde(default)]
        pose: Option<[f64; 3]>,
    },
    /// Remove an object from the perception blocklist.
    Reveal { object: String },
    /// Add an object to the perception blocklist.
    Hide { object: String },
    Open { location: String },
    Close { location: String },
}

impl Edit {
    pub fn apply(&self, world: &World, policy: &mut VisibilityPolicy) -> Result<World, String> {
        match self {
            Edit::Move { object, to, pose } => world.relocate(object, to, *pose),
            Edit::Reveal { object } | Edit::Hide { object } => {
                if !world.state().objects.contains_key(object) {
                    return Err(format!("unknown object {object}"));
                }
                if matches!(self, Edit::Reveal { .. }) {
                    policy.blocklist.remove(object);
                } else {
                    policy.blocklist.insert(object.clone());
                }
                Ok(world.clone())
            }
            Edit::Open { location } => world.set_open(location, true),
            Edit::Close { location } => world.set_open(location, false),
        }
    }
}

/// What a script line should produce. Absent fields are not checked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Expect {
    /// Expected plan in step grammar, `pick(orange) ; go(home) ; place(orange)`.
    pub plan: Option<String>,
    pub failure: Option<FailureKind>,
    pub subject: Option<String>,
    /// Session state after the line.
    pub state: Option<SessionState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptLine {
    pub say: String,
    #[serde(default)]
    pub edits: Vec<Edit>,
    #[serde(default)]
    pub expect: Expect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    #[serde(default = "default_world")]
    pub world: String,
    #[serde(default)]
    pub policy: VisibilityPolicy,
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
    #[serde(default)]
    pub setup: Vec<Edit>,
    #[serde(default)]
    pub limits: Option<Limits>,
    /// Predicate that must hold when the session ends.
    #[serde(default)]
    pub goal: Option<Goal>,
    /// Free-form labels such as `command = "unseen"`.
    #[serde(default)]
    pub tags: BTreeMap<String, String>,
    pub script: Vec<ScriptLine>,
}

fn default_world() -> String {
    "apartment".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub name: String,
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SuiteError {
    #[error("suite: {0}")]
    Parse(String),
    #[error("scenario {id}: {reason}")]
    Invalid { id: String, reason: String },
}

/// Parse an expected plan leniently, so aliases and case are normalised.
pub fn normalize_plan(text: &str, aliases: &AliasTable) -> Option<Plan> {
    let t = if text.trim_start().starts_with("PLAN:") {
        text.to_string()
    } else {
        format!("PLAN: {text}")
    };
    match parse_robot_output(&t, &ParseOptions::lenient().with_aliases(aliases)) {
        Ok(PlannerResult::Plan(p)) => Some(p),
        _ => None,
    }
}

impl Scenario {
    pub fn invalid(&self, reason: impl Into<String>) -> SuiteError {
        SuiteError::Invalid {
            id: self.id.clone(),
            reason: reason.into(),
        }
    }

    pub fn check(&self) -> Result<(), SuiteError> {
        if self.script.is_empty() {
            return Err(self.invalid("script is empty"));
        }
        for line in &self.script {
            if line.say.trim().is_empty() {
                return Err(self.invalid("empty utterance"));
            }
            if let Some(p) = &line.expect.plan {
                if normalize_plan(p, &AliasTable::default()).is_none() {
                    return Err(self.invalid(format!("expected plan `{p}` does not parse")));
                }
            }
        }
        Ok(())
    }

    pub fn has_failure_expectation(&self) -> bool {
        self.script.iter().any(|l| l.expect.failure.is_some())
    }
}

impl Suite {
    pub fn from_toml(text: &str) -> Result<Suite, SuiteError> {
        let suite: Suite = toml::from_str(text).map_err(|e| SuiteError::Parse(e.to_string()))?;
        let mut ids = BTreeSet::new();
        for s in &suite.scenarios {
            s.check()?;
            if !ids.insert(&s.id) {
                return Err(s.invalid("duplicate scenario id"));
            }
        }
        Ok(suite)
    }
}

pub const CORE_SUITE: &str = include_str!("../../data/suites/core.toml");
pub const NO_FAILURE_SUITE: &str = include_str!("../../data/suites/no_failure.toml");

/// Bundled suite by name (`core`, `no_failure`, optionally with `.toml`).
pub fn bundled_suite(name: &str) -> Option<Suite> {
    let stem = name.rsplit('/').next().unwrap_or(name);
    let stem = stem.strip_suffix(".toml").unwrap_or(stem);
    let text = match stem {
        "core" => CORE_SUITE,
        "no_failure" => NO_FAILURE_SUITE,
        _ => return None,
    };
    Some(Suite::from_toml(text).expect("bundled suite is valid"))
}
