use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{BackendError, BackendReply, PlanBackend};
use crate::domain::{ActionStep, FailureKind, FailureReport, Plan, Vocabulary, HOME};
use crate::lexicon::{contains_phrase, scan, words};
use crate::perception::{parse_observations, Observation};
use crate::protocol::{parse_robot_output, render_result, ParseOptions, PlannerResult, SessionRecord};
use crate::world::WorldState;

/// Command archetypes with a fixed expected plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskFamily {
    Pick,
    Go,
    Fetch,
    PutAway,
    PutInDrawer,
}

impl TaskFamily {
    pub const ALL: [TaskFamily; 5] = [
        TaskFamily::Pick,
        TaskFamily::Go,
        TaskFamily::Fetch,
        TaskFamily::PutAway,
        TaskFamily::PutInDrawer,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            TaskFamily::Pick => "pick",
            TaskFamily::Go => "go",
            TaskFamily::Fetch => "fetch",
            TaskFamily::PutAway => "put_away",
            TaskFamily::PutInDrawer => "put_in_drawer",
        }
    }

    /// Whether the template manipulates an object.
    pub fn needs_object(self) -> bool {
        self != TaskFamily::Go
    }
}

impl fmt::Display for TaskFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for TaskFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskFamily::ALL
            .into_iter()
            .find(|f| f.tag() == s)
            .ok_or_else(|| format!("unknown task family `{s}`"))
    }
}

/// Expected plan for a family. `place` names the destination for `go`,
/// `put_away` and `put_in_drawer`.
pub fn family_plan(family: TaskFamily, object: Option<&str>, place: Option<&str>) -> Option<Plan> {
    let steps = match family {
        TaskFamily::Go => vec![ActionStep::go(place?)],
        TaskFamily::Pick => vec![ActionStep::pick(object?)],
        TaskFamily::Fetch => {
            let o = object?;
            vec![ActionStep::pick(o), ActionStep::go(HOME), ActionStep::place(o)]
        }
        TaskFamily::PutAway => {
            let o = object?;
            vec![ActionStep::pick(o), ActionStep::go(place?), ActionStep::place(o)]
        }
        TaskFamily::PutInDrawer => {
            let (o, c) = (object?, place?);
            vec![
                ActionStep::go(c),
                ActionStep::open(c),
                ActionStep::pick(o),
                ActionStep::place_at(o, c),
                ActionStep::close(c),
            ]
        }
    };
    Plan::new(steps).ok()
}

/// What the oracle knows about the world's symbols and command phrasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleLexicon {
    /// Categories here include instance kinds.
    pub vocab: Vocabulary,
    /// Group names that denote interchangeable instances (`cup`), as
    /// opposed to categories (`drink`).
    pub kinds: BTreeSet<String>,
    pub put_words: Vec<String>,
    pub away_words: Vec<String>,
    pub fetch_words: Vec<String>,
    pub pick_words: Vec<String>,
    pub go_words: Vec<String>,
    /// Where `put away` goes when the request names no location.
    pub default_destination: String,
}

fn strings(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

impl Default for OracleLexicon {
    fn default() -> Self {
        Self {
            vocab: Vocabulary::default(),
            kinds: BTreeSet::new(),
            put_words: strings(&["put", "place", "store", "stow", "keep", "drop"]),
            away_words: strings(&["away", "tidy", "move", "return", "put", "place", "leave"]),
            fetch_words: strings(&[
                "fetch", "bring", "get", "give me", "hand me", "deliver", "carry",
            ]),
            pick_words: strings(&["pick", "grab", "take", "lift", "hold", "collect", "grasp"]),
            go_words: strings(&["go", "navigate", "head", "drive", "walk", "come", "visit"]),
            default_destination: "counter".into(),
        }
    }
}

impl OracleLexicon {
    pub fn for_world(state: &WorldState) -> Self {
        Self {
            vocab: state.vocabulary(),
            kinds: state.kinds().into_keys().collect(),
            ..Self::default()
        }
    }

    fn mentioned_locations(&self, text: &str) -> Vec<String> {
        scan(text, &self.vocab.locations)
    }

    fn mentioned_containers(&self, text: &str) -> Vec<String> {
        scan(text, &self.vocab.containers)
    }

    fn mentioned_objects(&self, text: &str) -> Vec<String> {
        scan(text, &self.vocab.objects)
    }

    fn has_any(&self, w: &[String], list: &[String]) -> bool {
        list.iter().any(|p| contains_phrase(w, p))
    }

    /// Task family of a request and the location its template needs.
    pub fn classify(&self, text: &str) -> Option<(TaskFamily, Option<String>)> {
        let w = words(text);
        let containers = self.mentioned_containers(text);
        let locations = self.mentioned_locations(text);
        if let Some(c) = containers.first() {
            if self.has_any(&w, &self.put_words) {
                return Some((TaskFamily::PutInDrawer, Some(c.clone())));
            }
        }
        if self.has_any(&w, &self.away_words) {
            let dest = locations
                .iter()
                .find(|l| !self.vocab.is_container(l) && l.as_str() != HOME)
                .cloned()
                .unwrap_or_else(|| self.default_destination.clone());
            return Some((TaskFamily::PutAway, Some(dest)));
        }
        if self.has_any(&w, &self.fetch_words) {
            return Some((TaskFamily::Fetch, None));
        }
        if self.has_any(&w, &self.pick_words) {
            return Some((TaskFamily::Pick, None));
        }
        if self.has_any(&w, &self.go_words) {
            if let Some(l) = locations.first() {
                return Some((TaskFamily::Go, Some(l.clone())));
            }
        }
        None
    }
}

/// Deterministic reference planner; also labels the training dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleOracle {
    lexicon: OracleLexicon,
}

impl RuleOracle {
    pub fn new(lexicon: OracleLexicon) -> Self {
        Self { lexicon }
    }

    pub fn for_world(state: &WorldState) -> Self {
        Self::new(OracleLexicon::for_world(state))
    }

    pub fn lexicon(&self) -> &OracleLexicon {
        &self.lexicon
    }

    /// The decision procedure; a pure function of the record.
    pub fn decide(&self, record: &SessionRecord) -> PlannerResult {
        let lex = &self.lexicon;
        let failures = record.past_failures();
        let last = failures.last();
        let observations = parse_observations(record.vision());
        let found: Vec<&str> = observations
            .iter()
            .filter_map(|o| match o {
                Observation::Found { object, .. } => Some(object.as_str()),
                _ => None,
            })
            .collect();
        let original = record.original_request();

        // The human says where a hidden object is; it stays unseen until opened.
        if let Some(prev) = last.filter(|f| f.kind() == FailureKind::VisionFailure) {
            let containers = lex.mentioned_containers(record.user());
            if let (Some(c), Some(obj)) = (containers.first(), prev.subject()) {
                if lex.vocab.is_object(obj) {
                    let mut steps = vec![ActionStep::go(c), ActionStep::open(c)];
                    let tail = match lex.classify(original) {
                        Some((family, place)) if family.needs_object() => {
                            family_plan(family, Some(obj), place.as_deref())
                        }
                        _ => family_plan(TaskFamily::Fetch, Some(obj), None),
                    };
                    if let Some(tail) = tail {
                        steps.extend(tail.into_steps());
                        if let Ok(plan) = Plan::new(steps) {
                            return PlannerResult::Plan(plan);
                        }
                    }
                }
            }
        }

        for o in &observations {
            if let Observation::Missing { name } = o {
                return PlannerResult::Failure(FailureReport::vision(name));
            }
        }
        for o in &observations {
            if let Observation::Several { name, candidates } = o {
                let report = if lex.vocab.is_category(name) && !lex.kinds.contains(name) {
                    FailureReport::ambiguous_category(name, candidates)
                } else {
                    FailureReport::ambiguous_reference(name, candidates)
                };
                return PlannerResult::Failure(report);
            }
        }
        if let Some(first) = found.first() {
            if !record.feasibility().is_feasible() {
                return PlannerResult::Failure(FailureReport::feasibility(first));
            }
        }

        if let Some(prev) = last {
            match prev.kind() {
                FailureKind::AmbiguousReference | FailureKind::AmbiguousTask => {
                    let candidates = prev.candidates();
                    let chosen = lex
                        .mentioned_objects(record.user())
                        .into_iter()
                        .find(|o| candidates.contains(o));
                    if let Some(obj) = chosen {
                        let (family, place) = lex.classify(original).unwrap_or((TaskFamily::Fetch, None));
                        let family = if family.needs_object() { family } else { TaskFamily::Fetch };
                        if let Some(plan) = family_plan(family, Some(&obj), place.as_deref()) {
                            return PlannerResult::Plan(plan);
                        }
                    }
                }
                FailureKind::ExecutionFailure => {
                    if let Some(rest) = prev.remaining_steps_text() {
                        let text = format!("PLAN: {rest}");
                        if let Ok(PlannerResult::Plan(plan)) = parse_robot_output(&text, &ParseOptions::strict()) {
                            return PlannerResult::Plan(plan);
                        }
                    }
                }
                _ => {}
            }
        }

        let request = if record.history().is_empty() {
            record.user()
        } else {
            original
        };
        if let Some((family, place)) = lex.classify(request) {
            let object = found.first().copied();
            if let Some(plan) = family_plan(family, object, place.as_deref()) {
                return PlannerResult::Plan(plan);
            }
        }
        PlannerResult::Failure(FailureReport::unclear_task())
    }
}

impl PlanBackend for RuleOracle {
    fn name(&self) -> &str {
        "rule"
    }

    fn plan(&self, record: &SessionRecord) -> Result<BackendReply, BackendError> {
        let started = Instant::now();
        let text = render_result(&self.decide(record));
        Ok(BackendReply {
            text,
            latency: started.elapsed().as_secs_f64(),
        })
    }
}
