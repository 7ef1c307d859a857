//! Shared vocabulary of the planner: skills, action steps, plans, the failure
//! taxonomy, poses and the symbol vocabulary plans are validated against.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Location every world must declare; "go back" resolves to it.
pub const HOME: &str = "home";

/// The fixed skill library shared by planner and controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkillVerb {
    Go,
    Pick,
    Place,
    Open,
    Close,
    Search,
    Turn,
}

impl SkillVerb {
    pub const ALL: [SkillVerb; 7] = [
        SkillVerb::Go,
        SkillVerb::Pick,
        SkillVerb::Place,
        SkillVerb::Open,
        SkillVerb::Close,
        SkillVerb::Search,
        SkillVerb::Turn,
    ];

    pub fn canonical_name(self) -> &'static str {
        match self {
            SkillVerb::Go => "go",
            SkillVerb::Pick => "pick",
            SkillVerb::Place => "place",
            SkillVerb::Open => "open",
            SkillVerb::Close => "close",
            SkillVerb::Search => "search",
            SkillVerb::Turn => "turn",
        }
    }

    pub fn from_canonical(name: &str) -> Option<SkillVerb> {
        SkillVerb::ALL.into_iter().find(|v| v.canonical_name() == name)
    }

    /// Inclusive (min, max) argument count.
    pub fn arity(self) -> (usize, usize) {
        match self {
            SkillVerb::Place => (1, 2),
            _ => (1, 1),
        }
    }
}

impl fmt::Display for SkillVerb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

/// One symbolic skill invocation, e.g. `place(coke, drawer)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionStep {
    pub verb: SkillVerb,
    pub args: Vec<String>,
}

impl ActionStep {
    pub fn new<I, S>(verb: SkillVerb, args: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            verb,
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    pub fn go(location: &str) -> Self {
        Self::new(SkillVerb::Go, [location])
    }

    pub fn pick(object: &str) -> Self {
        Self::new(SkillVerb::Pick, [object])
    }

    pub fn place(object: &str) -> Self {
        Self::new(SkillVerb::Place, [object])
    }

    pub fn place_at(object: &str, location: &str) -> Self {
        Self::new(SkillVerb::Place, [object, location])
    }

    pub fn open(container: &str) -> Self {
        Self::new(SkillVerb::Open, [container])
    }

    pub fn close(container: &str) -> Self {
        Self::new(SkillVerb::Close, [container])
    }

    pub fn first_arg(&self) -> Option<&str> {
        self.args.first().map(String::as_str)
    }
}

impl fmt::Display for ActionStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.verb, self.args.join(", "))
    }
}

/// Non-empty ordered sequence of steps.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<ActionStep>", into = "Vec<ActionStep>")]
pub struct Plan {
    steps: Vec<ActionStep>,
}

impl Plan {
    pub fn new(steps: Vec<ActionStep>) -> Result<Plan, ValidationError> {
        if steps.is_empty() {
            return Err(ValidationError {
                step: 0,
                reason: ValidationReason::EmptyPlan,
            });
        }
        Ok(Plan { steps })
    }

    pub fn steps(&self) -> &[ActionStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn into_steps(self) -> Vec<ActionStep> {
        self.steps
    }

    /// Steps from `index` to the end, if any remain.
    pub fn suffix(&self, index: usize) -> Option<Plan> {
        self.steps.get(index..).and_then(|s| Plan::new(s.to_vec()).ok())
    }
}

impl TryFrom<Vec<ActionStep>> for Plan {
    type Error = ValidationError;

    fn try_from(steps: Vec<ActionStep>) -> Result<Self, Self::Error> {
        Plan::new(steps)
    }
}

impl From<Plan> for Vec<ActionStep> {
    fn from(plan: Plan) -> Self {
        plan.steps
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str(" ; ")?;
            }
            write!(f, "{step}")?;
        }
        Ok(())
    }
}

/// Cases that require human interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureKind {
    #[serde(rename = "vision")]
    VisionFailure,
    #[serde(rename = "feasibility")]
    FeasibilityFailure,
    #[serde(rename = "ambiguous_reference")]
    AmbiguousReference,
    #[serde(rename = "ambiguous_task")]
    AmbiguousTask,
    #[serde(rename = "execution")]
    ExecutionFailure,
}

impl FailureKind {
    pub const ALL: [FailureKind; 5] = [
        FailureKind::VisionFailure,
        FailureKind::FeasibilityFailure,
        FailureKind::AmbiguousReference,
        FailureKind::AmbiguousTask,
        FailureKind::ExecutionFailure,
    ];

    /// Tag used inside `FAILURE(tag):`.
    pub fn tag(self) -> &'static str {
        match self {
            FailureKind::VisionFailure => "vision",
            FailureKind::FeasibilityFailure => "feasibility",
            FailureKind::AmbiguousReference => "ambiguous_reference",
            FailureKind::AmbiguousTask => "ambiguous_task",
            FailureKind::ExecutionFailure => "execution",
        }
    }

    pub fn from_tag(tag: &str) -> Option<FailureKind> {
        FailureKind::ALL.into_iter().find(|k| k.tag() == tag)
    }

    pub fn requires_subject(self) -> bool {
        matches!(
            self,
            FailureKind::VisionFailure
                | FailureKind::FeasibilityFailure
                | FailureKind::AmbiguousReference
        )
    }
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FailureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FailureKind::from_tag(s).ok_or_else(|| format!("unknown failure kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("failure explanation is empty")]
    EmptyExplanation,
    #[error("failure explanation must be a single line")]
    MultiLineExplanation,
    #[error("{0} failures must name a subject")]
    MissingSubject(FailureKind),
}

const REMAINING_MARKER: &str = "; remaining: ";

/// A taxonomy-tagged failure with a human-readable explanation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FailureReport {
    kind: FailureKind,
    subject: Option<String>,
    explanation: String,
}

impl FailureReport {
    pub fn new(
        kind: FailureKind,
        subject: Option<String>,
        explanation: impl Into<String>,
    ) -> Result<Self, ReportError> {
        let explanation = explanation.into();
        if explanation.trim().is_empty() {
            return Err(ReportError::EmptyExplanation);
        }
        if explanation.contains(['\n', '\r']) {
            return Err(ReportError::MultiLineExplanation);
        }
        if kind.requires_subject() && subject.is_none() {
            return Err(ReportError::MissingSubject(kind));
        }
        Ok(Self {
            kind,
            subject,
            explanation,
        })
    }

    pub fn vision(object: &str) -> Self {
        Self::canonical(
            FailureKind::VisionFailure,
            Some(object),
            format!("cannot find {object}"),
        )
    }

    pub fn feasibility(object: &str) -> Self {
        Self::canonical(
            FailureKind::FeasibilityFailure,
            Some(object),
            format!("cannot reach {object}"),
        )
    }

    /// More than one instance matched a named object.
    pub fn ambiguous_reference(name: &str, candidates: &[String]) -> Self {
        Self::canonical(
            FailureKind::AmbiguousReference,
            Some(name),
            format!(
                "found {} items matching {name}: {}; which one do you mean?",
                candidates.len(),
                candidates.join(", ")
            ),
        )
    }

    /// More than one object matched a category.
    pub fn ambiguous_category(category: &str, candidates: &[String]) -> Self {
        Self::canonical(
            FailureKind::AmbiguousTask,
            Some(category),
            format!(
                "found {} items matching {category}: {}; which one do you want?",
                candidates.len(),
                candidates.join(", ")
            ),
        )
    }

    /// The request could not be mapped onto any known task.
    pub fn unclear_task() -> Self {
        Self::canonical(
            FailureKind::AmbiguousTask,
            None,
            "cannot work out what to do; please rephrase the request".to_string(),
        )
    }

    /// A step failed at execution time; `remaining` starts at the failed step.
    pub fn execution(failed: &ActionStep, detail: &str, remaining: &Plan) -> Self {
        let subject = failed.first_arg().unwrap_or("step").to_string();
        let detail = sanitize_detail(detail);
        Self::canonical(
            FailureKind::ExecutionFailure,
            Some(&subject),
            format!(
                "failed to {} {subject}: {detail}{REMAINING_MARKER}{remaining}",
                failed.verb
            ),
        )
    }

    /// Failure with no step to blame, e.g. the planner could not be reached.
    pub fn execution_without_step(detail: &str) -> Self {
        Self::canonical(
            FailureKind::ExecutionFailure,
            None,
            format!("could not proceed: {}", sanitize_detail(detail)),
        )
    }

    fn canonical(kind: FailureKind, subject: Option<&str>, explanation: String) -> Self {
        Self {
            kind,
            subject: subject.map(str::to_string),
            explanation,
        }
    }

    pub fn kind(&self) -> FailureKind {
        self.kind
    }

    pub fn subject(&self) -> Option<&str> {
        self.subject.as_deref()
    }

    pub fn explanation(&self) -> &str {
        &self.explanation
    }

    /// Subject recoverable from the explanation text alone.
    pub fn infer_subject(kind: FailureKind, explanation: &str) -> Option<String> {
        let lead = match kind {
            FailureKind::VisionFailure => "cannot find ",
            FailureKind::FeasibilityFailure => "cannot reach ",
            FailureKind::AmbiguousReference | FailureKind::AmbiguousTask => "matching ",
            FailureKind::ExecutionFailure => {
                let rest = explanation.strip_prefix("failed to ")?;
                let (_verb, rest) = rest.split_once(' ')?;
                return leading_symbol(rest);
            }
        };
        let at = explanation.find(lead)?;
        leading_symbol(&explanation[at + lead.len()..])
    }

    /// Candidate names listed by an ambiguity report.
    pub fn candidates(&self) -> Vec<String> {
        if !matches!(
            self.kind,
            FailureKind::AmbiguousReference | FailureKind::AmbiguousTask
        ) {
            return Vec::new();
        }
        let Some(at) = self.explanation.find("matching ") else {
            return Vec::new();
        };
        let rest = &self.explanation[at..];
        let Some((_, list)) = rest.split_once(": ") else {
            return Vec::new();
        };
        let list = list.split(';').next().unwrap_or("");
        list.split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect()
    }

    /// Plan text recorded after the remaining-steps marker of an execution report.
    pub fn remaining_steps_text(&self) -> Option<&str> {
        if self.kind != FailureKind::ExecutionFailure {
            return None;
        }
        self.explanation
            .find(REMAINING_MARKER)
            .map(|at| &self.explanation[at + REMAINING_MARKER.len()..])
    }
}

fn sanitize_detail(detail: &str) -> String {
    let flat: String = detail
        .chars()
        .map(|c| if c == '\n' || c == '\r' { ' ' } else { c })
        .collect();
    let flat = flat.replace(';', ",");
    if flat.trim().is_empty() {
        "unknown error".to_string()
    } else {
        flat.trim().to_string()
    }
}

fn leading_symbol(s: &str) -> Option<String> {
    let sym: String = s.chars().take_while(|c| is_symbol_char(*c)).collect();
    (!sym.is_empty()).then_some(sym)
}

pub(crate) fn is_symbol_char(c: char) -> bool {
    c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_'
}

/// Whether `name` is a lowercase, whitespace-free symbol token.
pub fn is_symbol(name: &str) -> bool {
    !name.is_empty() && name.chars().all(is_symbol_char)
}

/// Planar pose with height; yaw kept in [-pi, pi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            z,
            yaw: wrap_angle(yaw),
        }
    }

    pub fn position(&self) -> crate::geometry::Point3 {
        crate::geometry::Point3::new(self.x, self.y, self.z)
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VocabularyError {
    #[error("`{0}` is not a lowercase whitespace-free name")]
    BadName(String),
    #[error("category `{category}` lists unknown object `{member}`")]
    UnknownMember { category: String, member: String },
    #[error("container `{0}` is not a declared location")]
    UnknownContainer(String),
    #[error("`{0}` is declared both as an object and a category")]
    CategoryClash(String),
}

/// Symbols plans may mention.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub objects: BTreeSet<String>,
    pub locations: BTreeSet<String>,
    /// Subset of `locations` that can be opened and closed.
    #[serde(default)]
    pub containers: BTreeSet<String>,
    #[serde(default)]
    pub categories: BTreeMap<String, BTreeSet<String>>,
}

impl Vocabulary {
    pub fn validate(&self) -> Result<(), VocabularyError> {
        for name in self
            .objects
            .iter()
            .chain(&self.locations)
            .chain(self.categories.keys())
        {
            if !is_symbol(name) {
                return Err(VocabularyError::BadName(name.clone()));
            }
        }
        for (category, members) in &self.categories {
            if self.objects.contains(category) {
                return Err(VocabularyError::CategoryClash(category.clone()));
            }
            if let Some(m) = members.iter().find(|m| !self.objects.contains(*m)) {
                return Err(VocabularyError::UnknownMember {
                    category: category.clone(),
                    member: m.clone(),
                });
            }
        }
        if let Some(c) = self.containers.iter().find(|c| !self.locations.contains(*c)) {
            return Err(VocabularyError::UnknownContainer(c.clone()));
        }
        Ok(())
    }

    pub fn is_object(&self, name: &str) -> bool {
        self.objects.contains(name)
    }

    pub fn is_location(&self, name: &str) -> bool {
        self.locations.contains(name)
    }

    pub fn is_category(&self, name: &str) -> bool {
        self.categories.contains_key(name)
    }

    pub fn is_container(&self, name: &str) -> bool {
        self.containers.contains(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("step {step}: {reason}")]
pub struct ValidationError {
    pub step: usize,
    pub reason: ValidationReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationReason {
    #[error("plan has no steps")]
    EmptyPlan,
    #[error("unknown verb `{0}`")]
    UnknownVerb(String),
    #[error("{verb} takes {min}..={max} arguments, got {got}")]
    BadArity {
        verb: SkillVerb,
        min: usize,
        max: usize,
        got: usize,
    },
    #[error("`{symbol}` is not a known {role}")]
    UnknownSymbol { symbol: String, role: &'static str },
}

/// Check arity and symbol resolution of every step; reports the first offender.
pub fn validate_plan(plan: &Plan, vocab: &Vocabulary) -> Result<(), ValidationError> {
    for (index, step) in plan.steps().iter().enumerate() {
        validate_step(step, vocab).map_err(|reason| ValidationError {
            step: index,
            reason,
        })?;
    }
    Ok(())
}

pub fn validate_step(step: &ActionStep, vocab: &Vocabulary) -> Result<(), ValidationReason> {
    let (min, max) = step.verb.arity();
    let got = step.args.len();
    if got < min || got > max {
        return Err(ValidationReason::BadArity {
            verb: step.verb,
            min,
            max,
            got,
        });
    }
    let unknown = |symbol: &str, role: &'static str| ValidationReason::UnknownSymbol {
        symbol: symbol.to_string(),
        role,
    };
    let arg0 = step.args[0].as_str();
    match step.verb {
        SkillVerb::Go if !vocab.is_location(arg0) => Err(unknown(arg0, "location")),
        SkillVerb::Pick | SkillVerb::Search | SkillVerb::Place if !vocab.is_object(arg0) => {
            Err(unknown(arg0, "object"))
        }
        SkillVerb::Place => match step.args.get(1) {
            Some(loc) if !vocab.is_location(loc) => Err(unknown(loc, "location")),
            _ => Ok(()),
        },
        SkillVerb::Open | SkillVerb::Close => {
            let ok = if vocab.containers.is_empty() {
                vocab.is_location(arg0)
            } else {
                vocab.is_container(arg0)
            };
            if ok {
                Ok(())
            } else {
                Err(unknown(arg0, "container"))
            }
        }
        SkillVerb::Turn if !(matches!(arg0, "left" | "right") || vocab.is_location(arg0)) => {
            Err(unknown(arg0, "direction"))
        }
        _ => Ok(()),
    }
}

/// Where an alias points: a verb, optionally with an implied argument
/// used when the surface form carries none (`go back` -> `go(home)`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliasTarget {
    pub verb: SkillVerb,
    pub implied_arg: Option<String>,
}

impl FromStr for AliasTarget {
    type Err = String;

    /// Accepts `verb` or `verb:implied_arg`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (verb, arg) = match s.split_once(':') {
            Some((v, a)) => (v.trim(), Some(a.trim().to_string())),
            None => (s.trim(), None),
        };
        let verb = SkillVerb::from_canonical(verb).ok_or_else(|| format!("unknown verb `{verb}`"))?;
        Ok(AliasTarget {
            verb,
            implied_arg: arg.filter(|a| !a.is_empty()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown verb `{0}`")]
pub struct UnknownVerb(pub String);

/// Surface-form verb aliases tolerated from planner output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliasTable {
    aliases: BTreeMap<String, AliasTarget>,
}

impl Default for AliasTable {
    fn default() -> Self {
        let mut table = AliasTable {
            aliases: BTreeMap::new(),
        };
        for (alias, target) in [
            ("pick up", "pick"),
            ("grab", "pick"),
            ("go to", "go"),
            ("go back", "go:home"),
            ("put", "place"),
            ("place in", "place"),
        ] {
            table.insert(alias, target.parse().expect("default alias"));
        }
        table
    }
}

impl AliasTable {
    pub fn empty() -> Self {
        AliasTable {
            aliases: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, alias: &str, target: AliasTarget) {
        self.aliases.insert(fold_token(alias), target);
    }

    pub fn len(&self) -> usize {
        self.aliases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aliases.is_empty()
    }

    /// Resolve a verb token to its skill and any implied argument.
    pub fn resolve(&self, token: &str) -> Result<AliasTarget, UnknownVerb> {
        let folded = fold_token(token);
        if let Some(verb) = SkillVerb::from_canonical(&folded) {
            return Ok(AliasTarget {
                verb,
                implied_arg: None,
            });
        }
        self.aliases
            .get(&folded)
            .cloned()
            .ok_or_else(|| UnknownVerb(token.to_string()))
    }

    pub fn normalize(&self, token: &str) -> Result<SkillVerb, UnknownVerb> {
        self.resolve(token).map(|t| t.verb)
    }
}

/// Lowercase, trim and collapse inner whitespace and underscores.
fn fold_token(token: &str) -> String {
    token
        .to_lowercase()
        .split(|c: char| c.is_whitespace() || c == '_')
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Map a verb token to a skill using the default alias table.
pub fn normalize_verb(token: &str) -> Result<SkillVerb, UnknownVerb> {
    AliasTable::default().normalize(token)
}

#[derive(Debug, Error)]
pub enum LexiconConfigError {
    #[error("invalid lexicon config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("alias `{alias}`: {message}")]
    BadAlias { alias: String, message: String },
    #[error(transparent)]
    Vocabulary(#[from] VocabularyError),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LexiconFile {
    #[serde(default)]
    objects: BTreeSet<String>,
    #[serde(default)]
    locations: BTreeSet<String>,
    #[serde(default)]
    containers: BTreeSet<String>,
    #[serde(default)]
    categories: BTreeMap<String, BTreeSet<String>>,
    /// Replaces the default alias table when present.
    aliases: Option<BTreeMap<String, String>>,
}

/// Load a vocabulary and alias table from the key/value config format:
///
/// ```toml
/// objects = ["orange", "coke"]
/// locations = ["home", "cupboard"]
/// containers = ["cupboard"]
/// [categories]
/// drink = ["coke"]
/// [aliases]
/// "pick up" = "pick"
/// "go back" = "go:home"
/// ```
pub fn load_lexicon_config(text: &str) -> Result<(Vocabulary, AliasTable), LexiconConfigError> {
    let file: LexiconFile = toml::from_str(text)?;
    let vocab = Vocabulary {
        objects: file.objects,
        locations: file.locations,
        containers: file.containers,
        categories: file.categories,
    };
    vocab.validate()?;
    let aliases = match file.aliases {
        None => AliasTable::default(),
        Some(map) => {
            let mut table = AliasTable::empty();
            for (alias, target) in map {
                let target = target
                    .parse()
                    .map_err(|message| LexiconConfigError::BadAlias {
                        alias: alias.clone(),
                        message,
                    })?;
                table.insert(&alias, target);
            }
            table
        }
    };
    Ok((vocab, aliases))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary {
            objects: ["orange", "coke", "7up"].map(String::from).into(),
            locations: ["home", "table", "drawer"].map(String::from).into(),
            containers: ["drawer"].map(String::from).into(),
            categories: [("drink".to_string(), ["coke", "7up"].map(String::from).into())].into(),
        }
    }

    #[test]
    fn fetch_plan_validates() {
        let plan = Plan::new(vec![
            ActionStep::pick("orange"),
            ActionStep::go("home"),
            ActionStep::place("orange"),
        ])
        .unwrap();
        assert_eq!(validate_plan(&plan, &vocab()), Ok(()));
    }

    #[test]
    fn empty_plan_is_unconstructible() {
        let err = Plan::new(vec![]).unwrap_err();
        assert_eq!(err.reason, ValidationReason::EmptyPlan);
    }

    #[test]
    fn pick_with_two_args_is_bad_arity() {
        let plan = Plan::new(vec![ActionStep::new(SkillVerb::Pick, ["orange", "table"])]).unwrap();
        let err = validate_plan(&plan, &vocab()).unwrap_err();
        assert_eq!(err.step, 0);
        assert!(matches!(err.reason, ValidationReason::BadArity { got: 2, .. }));
    }

    #[test]
    fn unknown_symbol_names_offending_step() {
        let plan = Plan::new(vec![ActionStep::pick("orange"), ActionStep::go("garage")]).unwrap();
        let err = validate_plan(&plan, &vocab()).unwrap_err();
        assert_eq!(err.step, 1);
        assert!(matches!(err.reason, ValidationReason::UnknownSymbol { .. }));
    }

    #[test]
    fn open_requires_container() {
        let plan = Plan::new(vec![ActionStep::open("table")]).unwrap();
        assert!(validate_plan(&plan, &vocab()).is_err());
        let plan = Plan::new(vec![ActionStep::open("drawer")]).unwrap();
        assert!(validate_plan(&plan, &vocab()).is_ok());
    }

    #[test]
    fn turn_accepts_directions_and_locations() {
        let v = vocab();
        for arg in ["left", "right", "table"] {
            assert!(validate_step(&ActionStep::new(SkillVerb::Turn, [arg]), &v).is_ok());
        }
        assert!(validate_step(&ActionStep::new(SkillVerb::Turn, ["up"]), &v).is_err());
    }

    #[test]
    fn place_takes_one_or_two_args() {
        let v = vocab();
        assert!(validate_step(&ActionStep::place("coke"), &v).is_ok());
        assert!(validate_step(&ActionStep::place_at("coke", "drawer"), &v).is_ok());
        assert!(validate_step(&ActionStep::new(SkillVerb::Place, ["coke", "drawer", "x"]), &v).is_err());
    }

    #[test]
    fn verb_aliases() {
        assert_eq!(normalize_verb("pick up"), Ok(SkillVerb::Pick));
        assert_eq!(normalize_verb("  Pick   Up "), Ok(SkillVerb::Pick));
        assert_eq!(normalize_verb("go"), Ok(SkillVerb::Go));
        assert_eq!(normalize_verb("grab"), Ok(SkillVerb::Pick));
        assert_eq!(normalize_verb("place in"), Ok(SkillVerb::Place));
        assert_eq!(normalize_verb("dance"), Err(UnknownVerb("dance".into())));
        let go_back = AliasTable::default().resolve("go back").unwrap();
        assert_eq!(go_back.verb, SkillVerb::Go);
        assert_eq!(go_back.implied_arg.as_deref(), Some(HOME));
    }

    #[test]
    fn normalize_is_idempotent_on_canonical_names() {
        for v in SkillVerb::ALL {
            assert_eq!(normalize_verb(v.canonical_name()), Ok(v));
        }
    }

    #[test]
    fn report_invariants() {
        assert_eq!(
            FailureReport::new(FailureKind::VisionFailure, None, "cannot find x"),
            Err(ReportError::MissingSubject(FailureKind::VisionFailure))
        );
        assert_eq!(
            FailureReport::new(FailureKind::AmbiguousTask, None, "  "),
            Err(ReportError::EmptyExplanation)
        );
        assert!(FailureReport::new(FailureKind::AmbiguousTask, None, "what?").is_ok());
    }

    #[test]
    fn canonical_reports_carry_inferable_subjects() {
        let plan = Plan::new(vec![ActionStep::pick("orange"), ActionStep::go("home")]).unwrap();
        let reports = [
            FailureReport::vision("orange"),
            FailureReport::feasibility("7up"),
            FailureReport::ambiguous_reference("cup", &["blue_cup".into(), "red_cup".into()]),
            FailureReport::ambiguous_category("drink", &["coke".into(), "7up".into()]),
            FailureReport::unclear_task(),
            FailureReport::execution(&plan.steps()[0], "gripper slipped", &plan),
            FailureReport::execution_without_step("planner timed out"),
        ];
        for r in reports {
            assert_eq!(
                FailureReport::infer_subject(r.kind(), r.explanation()).as_deref(),
                r.subject(),
                "{r:?}"
            );
        }
    }

    #[test]
    fn ambiguity_candidates_and_remaining_steps() {
        let r = FailureReport::ambiguous_category("drink", &["coke".into(), "7up".into()]);
        assert_eq!(r.candidates(), vec!["coke", "7up"]);
        let plan = Plan::new(vec![ActionStep::pick("orange"), ActionStep::go("home")]).unwrap();
        let r = FailureReport::execution(&plan.steps()[0], "slipped; badly", &plan);
        assert_eq!(r.remaining_steps_text(), Some("pick(orange) ; go(home)"));
    }

    #[test]
    fn pose_yaw_wraps_into_half_open_interval() {
        use std::f64::consts::PI;
        assert_eq!(Pose::new(0.0, 0.0, 0.0, PI).yaw, -PI);
        assert!((Pose::new(0.0, 0.0, 0.0, 3.0 * PI / 2.0).yaw + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn lexicon_config_round() {
        let text = r#"
            objects = ["orange", "coke"]
            locations = ["home", "cupboard"]
            containers = ["cupboard"]
            [categories]
            drink = ["coke"]
            [aliases]
            "fetch" = "pick"
            "return" = "go:home"
        "#;
        let (vocab, aliases) = load_lexicon_config(text).unwrap();
        assert!(vocab.is_container("cupboard"));
        assert_eq!(aliases.normalize("fetch"), Ok(SkillVerb::Pick));
        // explicit table replaces defaults
        assert!(aliases.normalize("grab").is_err());
        assert!(load_lexicon_config("objects = [\"Bad Name\"]").is_err());
        assert!(load_lexicon_config("[categories]\nfruit = [\"kiwi\"]").is_err());
    }
}
