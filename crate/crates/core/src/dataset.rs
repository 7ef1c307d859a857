//! Fine-tuning dataset synthesis: command templates crossed with objects and
//! failure scenarios, labelled by the rule oracle.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::backend::{RuleOracle, TaskFamily, PREAMBLE};
use crate::domain::{FailureKind, FailureReport, Vocabulary};
use crate::feasibility::FeasibilityScore;
use crate::perception::fmt_coord;
use crate::protocol::{
    append_failure_to_history, parse_prompt, parse_robot_output, render_result, serialize_prompt, ParseOptions,
    PlannerResult, SessionRecord,
};
use crate::world::{placement_pose, resolve_world, WorldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub task_family: TaskFamily,
    pub failure_kind: Option<FailureKind>,
    pub round: u8,
    pub object: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub input: String,
    pub output: String,
    pub meta: RecordMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    /// Bundled world name or path; supplies poses, categories and containers.
    #[serde(default = "default_world")]
    pub world: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_target")]
    pub target_count: usize,
    /// Defaults to every object in the world.
    #[serde(default)]
    pub objects: Vec<String>,
    /// Destinations for `go` and `put away`; defaults to non-container locations.
    #[serde(default)]
    pub locations: Vec<String>,
    /// Paraphrases per family, with `{object}` and `{location}` placeholders.
    pub templates: IndexMap<TaskFamily, Vec<String>>,
    #[serde(default)]
    pub failure_mix: BTreeMap<FailureKind, f64>,
}

fn default_world() -> String {
    "apartment".into()
}

fn default_seed() -> u64 {
    42
}

fn default_target() -> usize {
    300
}

pub const DEFAULT_GEN_CONFIG: &str = include_str!("../data/gen.toml");

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig::from_toml(DEFAULT_GEN_CONFIG).expect("bundled config is valid")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("config: {0}")]
    Config(String),
}

impl GenConfig {
    pub fn from_toml(text: &str) -> Result<Self, GenError> {
        toml::from_str(text).map_err(|e| GenError::Config(e.to_string()))
    }

    fn check(&self, state: &WorldState) -> Result<(), GenError> {
        let err = |m: String| Err(GenError::Config(m));
        if self.templates.values().all(Vec::is_empty) || self.templates.is_empty() {
            return err("no command templates".into());
        }
        for (family, list) in &self.templates {
            for t in list {
                let needs = if *family == TaskFamily::Go { "{location}" } else { "{object}" };
                if !t.contains(needs) {
                    return err(format!("{family} template `{t}` lacks {needs}"));
                }
            }
        }
        if state.objects.is_empty() && self.objects.is_empty() {
            return err("no objects".into());
        }
        for o in &self.objects {
            if !state.objects.contains_key(o) {
                return err(format!("unknown object `{o}`"));
            }
        }
        for l in &self.locations {
            if !state.locations.contains_key(l) {
                return err(format!("unknown location `{l}`"));
            }
        }
        let total: f64 = self.failure_mix.values().sum();
        if self.failure_mix.values().any(|p| !(0.0..=1.0).contains(p)) || total > 1.0 + 1e-9 {
            return err("failure proportions must lie in [0, 1] and sum to at most 1".into());
        }
        Ok(())
    }
}

const VISION_GUIDANCE: [&str; 3] = ["it is in the {container}", "look in the {container}", "i put it in the {container}"];
const LOOK_AGAIN: [&str; 2] = ["the light is on now, look again", "i removed what was blocking the view, check again"];
const MOVED_GUIDANCE: [&str; 3] = ["i moved it to the table", "i put it closer to you, try again", "it is on the table now"];
const CHOICE_GUIDANCE: [&str; 3] = ["the {object}", "i want the {object}", "i would like the {object}"];
const RETRY_GUIDANCE: [&str; 3] = ["please try again", "try that again", "carry on from where you stopped"];

fn spoken(name: &str) -> String {
    name.replace('_', " ")
}

fn fill(template: &str, object: &str, location: &str) -> String {
    template
        .replace("{object}", &spoken(object))
        .replace("{location}", &spoken(location))
        .replace("{container}", &spoken(location))
}

fn found_text(name: &str, p: &crate::domain::Pose) -> String {
    format!("found {name} at ({}, {}, {})", fmt_coord(p.x), fmt_coord(p.y), fmt_coord(p.z))
}

struct Generator<'a> {
    config: &'a GenConfig,
    state: WorldState,
    oracle: RuleOracle,
    objects: Vec<String>,
    locations: Vec<String>,
    containers: Vec<String>,
    kinds: Vec<(String, Vec<String>)>,
    categories: Vec<(String, Vec<String>)>,
    /// Pose an object would have on the highest surface.
    high_pose: Option<crate::domain::Pose>,
    seen_inputs: HashSet<String>,
    records: Vec<DatasetRecord>,
}

/// One planned command before failure sampling.
#[derive(Clone)]
struct Base {
    family: TaskFamily,
    template: String,
    object: String,
    location: String,
}

impl Generator<'_> {
    /// Label and store a record. Failure scenarios skip inputs already emitted;
    /// base commands are always kept.
    fn push(&mut self, record: &SessionRecord, meta: RecordMeta) -> Option<PlannerResult> {
        let input = serialize_prompt(record);
        let result = self.oracle.decide(record);
        let fresh = self.seen_inputs.insert(input.clone());
        if fresh || meta.failure_kind.is_none() {
            self.records.push(DatasetRecord {
                input,
                output: render_result(&result),
                meta,
            });
        }
        Some(result)
    }

    fn meta(&self, base: &Base, kind: Option<FailureKind>, round: u8, object: &str) -> RecordMeta {
        RecordMeta {
            task_family: base.family,
            failure_kind: kind,
            round,
            object: object.to_string(),
            seed: self.config.seed,
        }
    }

    fn observe(&self, object: &str) -> String {
        let o = &self.state.objects[object];
        found_text(object, &o.pose)
    }

    fn request(&self, base: &Base, subject: &str) -> SessionRecord {
        let text = fill(&base.template, subject, &base.location);
        SessionRecord::request(text).expect("template is non-empty")
    }

    fn clean(&mut self, base: &Base) {
        let r = if base.family == TaskFamily::Go {
            self.request(base, &base.object)
                .with_observations("no objects requested", FeasibilityScore::Infeasible)
        } else {
            let o = self.observe(&base.object);
            self.request(base, &base.object).with_observations(o, FeasibilityScore::Feasible)
        };
        let subject = if base.family == TaskFamily::Go { &base.location } else { &base.object };
        let meta = self.meta(base, None, 0, subject);
        self.push(&r, meta);
    }

    fn follow_up(
        &mut self,
        base: &Base,
        kind: FailureKind,
        prev: &SessionRecord,
        result: Option<PlannerResult>,
        guidance: String,
        vision: String,
        f: FeasibilityScore,
        round: u8,
        subject: &str,
    ) -> Option<(SessionRecord, Option<PlannerResult>)> {
        let Some(PlannerResult::Failure(report)) = result else {
            return None;
        };
        let r = append_failure_to_history(prev, &report, &guidance)
            .ok()?
            .with_observations(vision, f);
        let meta = self.meta(base, Some(kind), round, subject);
        let res = self.push(&r, meta);
        Some((r, res))
    }

    fn scenario(&mut self, base: &Base, kind: FailureKind, rng: &mut ChaCha8Rng) -> bool {
        let obj = base.object.clone();
        match kind {
            FailureKind::VisionFailure => {
                if base.family == TaskFamily::Go || self.containers.is_empty() {
                    return false;
                }
                let r0 = self
                    .request(base, &obj)
                    .with_observations(format!("cannot find {obj}"), FeasibilityScore::Infeasible);
                let meta = self.meta(base, Some(kind), 0, &obj);
                let res = self.push(&r0, meta);
                let multi = self.high_pose.is_some() && rng.random_bool(0.5);
                if multi {
                    let high = self.high_pose.expect("checked");
                    let g = LOOK_AGAIN.choose(rng).expect("non-empty").to_string();
                    let next = self.follow_up(
                        base,
                        kind,
                        &r0,
                        res,
                        g,
                        found_text(&obj, &high),
                        FeasibilityScore::Infeasible,
                        1,
                        &obj,
                    );
                    if let Some((r1, res1)) = next {
                        let g = MOVED_GUIDANCE.choose(rng).expect("non-empty").to_string();
                        let o = self.observe(&obj);
                        self.follow_up(base, kind, &r1, res1, g, o, FeasibilityScore::Feasible, 2, &obj);
                    }
                } else {
                    let c = self.containers.choose(rng).expect("non-empty").clone();
                    let g = fill(VISION_GUIDANCE.choose(rng).expect("non-empty"), &obj, &c);
                    self.follow_up(
                        base,
                        kind,
                        &r0,
                        res,
                        g,
                        format!("cannot find {obj}"),
                        FeasibilityScore::Infeasible,
                        1,
                        &obj,
                    );
                }
                true
            }
            FailureKind::FeasibilityFailure => {
                let Some(high) = self.high_pose.filter(|_| base.family != TaskFamily::Go) else {
                    return false;
                };
                let r0 = self
                    .request(base, &obj)
                    .with_observations(found_text(&obj, &high), FeasibilityScore::Infeasible);
                let meta = self.meta(base, Some(kind), 0, &obj);
                let res = self.push(&r0, meta);
                let g = MOVED_GUIDANCE.choose(rng).expect("non-empty").to_string();
                let o = self.observe(&obj);
                self.follow_up(base, kind, &r0, res, g, o, FeasibilityScore::Feasible, 1, &obj);
                true
            }
            FailureKind::AmbiguousReference | FailureKind::AmbiguousTask => {
                let pool = if kind == FailureKind::AmbiguousReference {
                    &self.kinds
                } else {
                    &self.categories
                };
                if base.family == TaskFamily::Go || pool.is_empty() {
                    return false;
                }
                let (group, members) = pool.choose(rng).expect("non-empty").clone();
                let r0 = self.request(base, &group).with_observations(
                    format!("found {} items matching {group}: {}", members.len(), members.join(", ")),
                    FeasibilityScore::Feasible,
                );
                let meta = self.meta(base, Some(kind), 0, &group);
                let res = self.push(&r0, meta);
                let chosen = members.choose(rng).expect("non-empty").clone();
                let g = fill(CHOICE_GUIDANCE.choose(rng).expect("non-empty"), &chosen, "");
                let o = self.observe(&chosen);
                self.follow_up(base, kind, &r0, res, g, o, FeasibilityScore::Feasible, 1, &group);
                true
            }
            FailureKind::ExecutionFailure => {
                let (r0, subject) = if base.family == TaskFamily::Go {
                    let r = self
                        .request(base, &obj)
                        .with_observations("no objects requested", FeasibilityScore::Infeasible);
                    (r, base.location.clone())
                } else {
                    let o = self.observe(&obj);
                    (self.request(base, &obj).with_observations(o, FeasibilityScore::Feasible), obj.clone())
                };
                let Some(PlannerResult::Plan(plan)) = Some(self.oracle.decide(&r0)) else {
                    return false;
                };
                let i = rng.random_range(0..plan.len());
                let step = &plan.steps()[i];
                let report = FailureReport::execution(
                    step,
                    &format!("injected fault on {step}"),
                    &plan.suffix(i).expect("in range"),
                );
                let g = RETRY_GUIDANCE.choose(rng).expect("non-empty").to_string();
                let (vision, f) = if base.family == TaskFamily::Go {
                    ("no objects requested".to_string(), FeasibilityScore::Infeasible)
                } else {
                    (self.observe(&obj), FeasibilityScore::Feasible)
                };
                self.follow_up(base, kind, &r0, Some(PlannerResult::Failure(report)), g, vision, f, 1, &subject);
                true
            }
        }
    }
}

fn sample_kind(mix: &BTreeMap<FailureKind, f64>, rng: &mut ChaCha8Rng) -> Option<FailureKind> {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (kind, p) in mix {
        acc += p;
        if u < acc {
            return Some(*kind);
        }
    }
    None
}

/// Produce the dataset for a configuration; deterministic for a fixed seed.
pub fn generate(config: &GenConfig) -> Result<Vec<DatasetRecord>, GenError> {
    let world = resolve_world(&config.world).map_err(|e| GenError::Config(e.to_string()))?;
    let state = world.snapshot();
    config.check(&state)?;

    let objects = if config.objects.is_empty() {
        state.objects.keys().cloned().collect()
    } else {
        config.objects.clone()
    };
    let locations: Vec<String> = if config.locations.is_empty() {
        state
            .locations
            .iter()
            .filter(|(n, l)| !l.container && n.as_str() != crate::domain::HOME)
            .map(|(n, _)| n.clone())
            .collect()
    } else {
        config.locations.clone()
    };
    let vocab = state.vocabulary();
    let kind_names: BTreeSet<String> = state.kinds().into_keys().collect();
    let groups = |want_kind: bool| -> Vec<(String, Vec<String>)> {
        vocab
            .categories
            .iter()
            .filter(|(n, m)| kind_names.contains(*n) == want_kind && m.len() > 1)
            .map(|(n, m)| {
                let ordered = state.objects.keys().filter(|o| m.contains(*o)).cloned().collect();
                (n.clone(), ordered)
            })
            .collect()
    };
    let high_pose = state
        .locations
        .values()
        .filter(|l| !l.container)
        .max_by(|a, b| a.footprint.max.z.total_cmp(&b.footprint.max.z))
        .map(|l| placement_pose(l, &l.approach));

    let mut g = Generator {
        config,
        oracle: RuleOracle::for_world(&state),
        objects,
        locations,
        containers: vocab.containers.iter().cloned().collect(),
        kinds: groups(true),
        categories: groups(false),
        high_pose,
        state,
        seen_inputs: HashSet::new(),
        records: Vec::new(),
    };

    let mut bases = Vec::new();
    for (family, templates) in &config.templates {
        for template in templates {
            for (i, object) in g.objects.iter().enumerate() {
                let location = g.locations.get(i % g.locations.len().max(1)).cloned().unwrap_or_default();
                bases.push(Base {
                    family: *family,
                    template: template.clone(),
                    object: object.clone(),
                    location,
                });
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut covered: BTreeSet<FailureKind> = BTreeSet::new();
    for base in &bases {
        match sample_kind(&config.failure_mix, &mut rng) {
            Some(kind) if g.scenario(base, kind, &mut rng) => {
                covered.insert(kind);
            }
            _ => g.clean(base),
        }
    }

    let active: Vec<(FailureKind, f64)> = config
        .failure_mix
        .iter()
        .filter(|(_, p)| **p > 0.0)
        .map(|(k, p)| (*k, *p))
        .collect();
    if !active.is_empty() {
        let total: f64 = active.iter().map(|(_, p)| p).sum();
        let mut stalled = 0;
        while g.records.len() < config.target_count && stalled < 20 * bases.len() {
            let base = bases.choose(&mut rng).expect("non-empty").clone();
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let kind = active
                .iter()
                .find(|(_, p)| {
                    acc += p;
                    u < acc
                })
                .map_or(active[active.len() - 1].0, |(k, _)| *k);
            let before = g.records.len();
            if g.scenario(&base, kind, &mut rng) {
                covered.insert(kind);
            }
            if g.records.len() == before {
                stalled += 1;
            }
        }
        if config.target_count >= 50 {
            for kind in FailureKind::ALL {
                let mut tries = 0;
                while !covered.contains(&kind) && tries < bases.len() * 4 {
                    let base = bases.choose(&mut rng).expect("non-empty").clone();
                    let before = g.records.len();
                    if g.scenario(&base, kind, &mut rng) && g.records.len() > before {
                        covered.insert(kind);
                    }
                    tries += 1;
                }
            }
        }
    }
    Ok(g.records)
}

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
}

pub fn write_jsonl<W: Write>(records: &[DatasetRecord], mut out: W) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn emit_jsonl(records: &[DatasetRecord], path: impl AsRef<Path>) -> io::Result<()> {
    let file = fs::File::create(path)?;
    write_jsonl(records, io::BufWriter::new(file))
}

pub fn read_jsonl<R: io::Read>(input: R) -> Result<Vec<DatasetRecord>, JsonlError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| JsonlError::Schema {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>, JsonlError> {
    read_jsonl(fs::File::open(path)?)
}

/// Chat-template view of a record for instruction tuning.
pub fn to_instruct(record: &DatasetRecord) -> serde_json::Value {
    json!({
        "messages": [
            { "role": "system", "content": PREAMBLE },
            { "role": "user", "content": record.input },
            { "role": "assistant", "content": record.output },
        ]
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Zero-based record index; `None` for dataset-wide findings.
    pub index: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub records: usize,
    pub violations: Vec<Violation>,
    /// Records per scenario failure kind.
    pub failure_kinds: BTreeMap<String, usize>,
    pub task_families: BTreeMap<String, usize>,
    pub max_round: u8,
}

impl DatasetReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Strict-grammar parse, round cap, vocabulary closure and taxonomy coverage.
pub fn validate_dataset(records: &[DatasetRecord], vocab: &Vocabulary) -> DatasetReport {
    let mut report = DatasetReport {
        records: records.len(),
        ..DatasetReport::default()
    };
    let opts = ParseOptions::strict().with_vocab(vocab);
    for (i, r) in records.iter().enumerate() {
        let mut bad = |reason: String| {
            report.violations.push(Violation {
                index: Some(i),
                reason,
            })
        };
        if r.meta.round > 2 {
            bad(format!("round {} exceeds the two-round cap", r.meta.round));
        }
        match parse_prompt(&r.input) {
            Ok(rec) if rec.history().len() != 2 * usize::from(r.meta.round) => {
                bad(format!("history has {} turns at round {}", rec.history().len(), r.meta.round))
            }
            Ok(_) => {}
            Err(e) => bad(format!("input: {e}")),
        }
        if let Err(e) = parse_robot_output(&r.output, &opts) {
            bad(format!("output: {e}"));
        }
        if let Some(k) = r.meta.failure_kind {
            *report.failure_kinds.entry(k.tag().to_string()).or_default() += 1;
        }
        *report.task_families.entry(r.meta.task_family.tag().to_string()).or_default() += 1;
        report.max_round = report.max_round.max(r.meta.round);
    }
    if !records.is_empty() {
        for kind in FailureKind::ALL {
            if !report.failure_kinds.get(kind.tag()).is_some_and(|n| *n > 0)
                && records.iter().any(|r| r.meta.failure_kind.is_some())
            {
                report.violations.push(Violation {
                    index: None,
                    reason: format!("failure kind {} never appears", kind.tag()),
                });
            }
        }
    }
    report
}
