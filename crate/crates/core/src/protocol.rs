//! Wire format between the orchestrator and plan backends.
//!
//! Prompt (one field per line, fixed order):
//!
//! ```text
//! <history> none | speaker: text | speaker: text ...
//! <user> fetch me an orange
//! <vision> found orange at (1.20, 0.40, 0.75)
//! <feasibility> 1
//! ```
//!
//! Free text is backslash-escaped: `\` `|` newline, carriage return and the
//! five token strings (`<history>` ... `<robot>`) never appear raw.
//!
//! Robot output is either `PLAN: verb(arg, arg) ; verb(arg)` or
//! `FAILURE(kind): explanation`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    is_symbol_char, validate_plan, ActionStep, AliasTable, FailureKind, FailureReport, Plan,
    SkillVerb, ValidationError, Vocabulary,
};
use crate::feasibility::FeasibilityScore;

const TOKENS: [&str; 5] = ["<history>", "<user>", "<vision>", "<feasibility>", "<robot>"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    Robot,
    Vision,
    Feasibility,
}

impl Speaker {
    pub const ALL: [Speaker; 4] = [
        Speaker::User,
        Speaker::Robot,
        Speaker::Vision,
        Speaker::Feasibility,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Speaker::User => "user",
            Speaker::Robot => "robot",
            Speaker::Vision => "vision",
            Speaker::Feasibility => "feasibility",
        }
    }

    fn parse(s: &str) -> Option<Speaker> {
        Speaker::ALL.into_iter().find(|sp| sp.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("turn text is empty")]
    EmptyTurn,
    #[error("user text is empty")]
    EmptyUser,
    #[error("guidance is empty")]
    EmptyGuidance,
}

/// One entry of the conversation history. Text is stored raw and escaped
/// when serialized.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    text: String,
}

impl Turn {
    pub fn new(speaker: Speaker, text: impl Into<String>) -> Result<Turn, RecordError> {
        let text = text.into();
        if text.is_empty() {
            return Err(RecordError::EmptyTurn);
        }
        Ok(Turn { speaker, text })
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

/// The planner's complete input: history, user text, vision text, feasibility.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SessionRecord {
    history: Vec<Turn>,
    user: String,
    vision: String,
    feasibility: FeasibilityScore,
}

impl SessionRecord {
    pub fn new(
        history: Vec<Turn>,
        user: impl Into<String>,
        vision: impl Into<String>,
        feasibility: FeasibilityScore,
    ) -> Result<SessionRecord, RecordError> {
        let user = user.into();
        if user.is_empty() {
            return Err(RecordError::EmptyUser);
        }
        Ok(SessionRecord {
            history,
            user,
            vision: vision.into(),
            feasibility,
        })
    }

    /// Fresh record for a first request; vision and feasibility pending.
    pub fn request(user: impl Into<String>) -> Result<SessionRecord, RecordError> {
        SessionRecord::new(Vec::new(), user, "", FeasibilityScore::Infeasible)
    }

    pub fn history(&self) -> &[Turn] {
        &self.history
    }

    pub fn user(&self) -> &str {
        &self.user
    }

    pub fn vision(&self) -> &str {
        &self.vision
    }

    pub fn feasibility(&self) -> FeasibilityScore {
        self.feasibility
    }

    pub fn with_observations(mut self, vision: impl Into<String>, feasibility: FeasibilityScore) -> Self {
        self.vision = vision.into();
        self.feasibility = feasibility;
        self
    }

    /// First user utterance of the conversation: the original request.
    pub fn original_request(&self) -> &str {
        self.history
            .iter()
            .find(|t| t.speaker == Speaker::User)
            .map(Turn::text)
            .unwrap_or(&self.user)
    }

    /// Failure reports the robot has voiced so far, oldest first.
    pub fn past_failures(&self) -> Vec<FailureReport> {
        self.history
            .iter()
            .filter(|t| t.speaker == Speaker::Robot)
            .filter_map(|t| match parse_robot_output(t.text(), &ParseOptions::strict()) {
                Ok(PlannerResult::Failure(r)) => Some(r),
                _ => None,
            })
            .collect()
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if c == '<' {
            if let Some(tok) = TOKENS.iter().find(|t| rest.starts_with(*t)) {
                out.push('\\');
                out.push_str(tok);
                rest = &rest[tok.len()..];
                continue;
            }
        }
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '|' => out.push_str("\\|"),
            _ => out.push(c),
        }
        rest = &rest[c.len_utf8()..];
    }
    out
}

fn unescape(text: &str) -> Result<String, PromptError> {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('|') => out.push('|'),
            Some('<') => out.push('<'),
            other => {
                return Err(PromptError::BadEscape(format!(
                    "\\{}",
                    other.map(String::from).unwrap_or_default()
                )))
            }
        }
    }
    Ok(out)
}

/// Deterministic prompt text for a record.
pub fn serialize_prompt(record: &SessionRecord) -> String {
    let history = if record.history.is_empty() {
        "none".to_string()
    } else {
        record
            .history
            .iter()
            .map(|t| format!("{}: {}", t.speaker.as_str(), escape(&t.text)))
            .collect::<Vec<_>>()
            .join(" | ")
    };
    format!(
        "<history> {history}\n<user> {}\n<vision> {}\n<feasibility> {}",
        escape(&record.user),
        escape(&record.vision),
        record.feasibility.value()
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("expected line {line} to start with `{token}`")]
    MissingField { line: usize, token: &'static str },
    #[error("prompt has {0} lines, expected 4")]
    LineCount(usize),
    #[error("bad escape sequence `{0}`")]
    BadEscape(String),
    #[error("malformed history turn `{0}`")]
    BadTurn(String),
    #[error("feasibility must be 0 or 1, got `{0}`")]
    BadFeasibility(String),
    #[error(transparent)]
    Record(#[from] RecordError),
}

/// Inverse of [`serialize_prompt`].
pub fn parse_prompt(text: &str) -> Result<SessionRecord, PromptError> {
    let lines: Vec<&str> = text.split('\n').collect();
    if lines.len() != 4 {
        return Err(PromptError::LineCount(lines.len()));
    }
    let field = |line: usize, token: &'static str| -> Result<&str, PromptError> {
        lines[line]
            .strip_prefix(token)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or(PromptError::MissingField { line, token })
    };
    let history_text = field(0, "<history>")?;
    let history = if history_text == "none" {
        Vec::new()
    } else {
        history_text
            .split(" | ")
            .map(|chunk| {
                let (speaker, body) = chunk
                    .split_once(": ")
                    .ok_or_else(|| PromptError::BadTurn(chunk.to_string()))?;
                let speaker =
                    Speaker::parse(speaker).ok_or_else(|| PromptError::BadTurn(chunk.to_string()))?;
                Ok(Turn::new(speaker, unescape(body)?)?)
            })
            .collect::<Result<Vec<_>, PromptError>>()?
    };
    let user = unescape(field(1, "<user>")?)?;
    let vision = unescape(field(2, "<vision>")?)?;
    let feasibility = match field(3, "<feasibility>")? {
        "0" => FeasibilityScore::Infeasible,
        "1" => FeasibilityScore::Feasible,
        other => return Err(PromptError::BadFeasibility(other.to_string())),
    };
    Ok(SessionRecord::new(history, user, vision, feasibility)?)
}

/// Record for the next round after a failure: the previous request and the
/// robot's report move into history, the guidance becomes the new user text,
/// and observations are cleared until re-queried.
pub fn append_failure_to_history(
    record: &SessionRecord,
    report: &FailureReport,
    guidance: &str,
) -> Result<SessionRecord, RecordError> {
    if guidance.trim().is_empty() {
        return Err(RecordError::EmptyGuidance);
    }
    let mut history = record.history.clone();
    history.push(Turn::new(Speaker::User, record.user.clone())?);
    history.push(Turn::new(
        Speaker::Robot,
        render_result(&PlannerResult::Failure(report.clone())),
    )?);
    SessionRecord::new(history, guidance, "", FeasibilityScore::Infeasible)
}

/// What a planner call produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PlannerResult {
    Plan(Plan),
    Failure(FailureReport),
}

impl fmt::Display for PlannerResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_result(self))
    }
}

/// Strict-grammar text for a result.
pub fn render_result(result: &PlannerResult) -> String {
    match result {
        PlannerResult::Plan(plan) => format!("PLAN: {plan}"),
        PlannerResult::Failure(r) => format!("FAILURE({}): {}", r.kind().tag(), r.explanation()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    /// Exact grammar only; used to validate dataset targets.
    Strict,
    /// Skips surrounding prose and accepts verb aliases.
    Lenient,
}

#[derive(Debug, Clone)]
pub struct ParseOptions<'a> {
    pub mode: ParseMode,
    pub aliases: Option<&'a AliasTable>,
    /// When set, plans are validated and failure subjects may be recovered
    /// by scanning the explanation for known names.
    pub vocab: Option<&'a Vocabulary>,
}

impl<'a> ParseOptions<'a> {
    pub fn strict() -> Self {
        Self {
            mode: ParseMode::Strict,
            aliases: None,
            vocab: None,
        }
    }

    pub fn lenient() -> Self {
        Self {
            mode: ParseMode::Lenient,
            aliases: None,
            vocab: None,
        }
    }

    pub fn with_vocab(mut self, vocab: &'a Vocabulary) -> Self {
        self.vocab = Some(vocab);
        self
    }

    pub fn with_aliases(mut self, aliases: &'a AliasTable) -> Self {
        self.aliases = Some(aliases);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no PLAN or FAILURE production found in planner output")]
    NoGrammarMatch,
    #[error("could not determine the subject of a {0} failure")]
    MissingSubject(FailureKind),
    #[error("plan rejected: {0}")]
    Validation(#[from] ValidationError),
}

/// Parse raw backend text into a plan or a failure report.
pub fn parse_robot_output(text: &str, opts: &ParseOptions<'_>) -> Result<PlannerResult, ParseError> {
    let result = match opts.mode {
        ParseMode::Strict => parse_strict(text)?,
        ParseMode::Lenient => parse_lenient(text, opts)?,
    };
    if let (PlannerResult::Plan(plan), Some(vocab)) = (&result, opts.vocab) {
        validate_plan(plan, vocab)?;
    }
    Ok(result)
}

fn parse_strict(text: &str) -> Result<PlannerResult, ParseError> {
    let text = text.strip_suffix('\n').unwrap_or(text);
    if text.contains(['\n', '\r']) {
        return Err(ParseError::NoGrammarMatch);
    }
    if let Some(body) = text.strip_prefix("PLAN: ") {
        let steps = body
            .split(" ; ")
            .map(parse_strict_step)
            .collect::<Option<Vec<_>>>()
            .ok_or(ParseError::NoGrammarMatch)?;
        return Plan::new(steps)
            .map(PlannerResult::Plan)
            .map_err(|_| ParseError::NoGrammarMatch);
    }
    if let Some(rest) = text.strip_prefix("FAILURE(") {
        let (tag, explanation) = rest.split_once("): ").ok_or(ParseError::NoGrammarMatch)?;
        let kind = FailureKind::from_tag(tag).ok_or(ParseError::NoGrammarMatch)?;
        return build_failure(kind, explanation, None);
    }
    Err(ParseError::NoGrammarMatch)
}

fn parse_strict_step(s: &str) -> Option<ActionStep> {
    let (verb, rest) = s.split_once('(')?;
    let args = rest.strip_suffix(')')?;
    let verb = SkillVerb::from_canonical(verb)?;
    let args: Vec<String> = args.split(", ").map(str::to_string).collect();
    if args.iter().any(|a| a.is_empty() || !a.chars().all(is_symbol_char)) {
        return None;
    }
    Some(ActionStep { verb, args })
}

fn build_failure(
    kind: FailureKind,
    explanation: &str,
    vocab: Option<&Vocabulary>,
) -> Result<PlannerResult, ParseError> {
    if explanation.trim().is_empty() {
        return Err(ParseError::NoGrammarMatch);
    }
    let mut subject = FailureReport::infer_subject(kind, explanation);
    if subject.is_none() && kind.requires_subject() {
        subject = vocab.and_then(|v| {
            crate::lexicon::scan(explanation, v.objects.iter().chain(v.categories.keys()))
                .into_iter()
                .next()
        });
    }
    FailureReport::new(kind, subject, explanation)
        .map(PlannerResult::Failure)
        .map_err(|_| ParseError::MissingSubject(kind))
}

fn parse_lenient(text: &str, opts: &ParseOptions<'_>) -> Result<PlannerResult, ParseError> {
    let default_aliases;
    let aliases = match opts.aliases {
        Some(a) => a,
        None => {
            default_aliases = AliasTable::default();
            &default_aliases
        }
    };
    // ASCII lowering keeps byte offsets aligned with `text`.
    let lower = text.to_ascii_lowercase();
    let mut last_err = ParseError::NoGrammarMatch;
    let mut candidates: Vec<(usize, bool)> = lower
        .match_indices("plan")
        .map(|(i, _)| (i, true))
        .chain(lower.match_indices("failure").map(|(i, _)| (i, false)))
        .collect();
    candidates.sort_unstable();
    for (at, is_plan) in candidates {
        let attempt = if is_plan {
            lenient_plan(&text[at + 4..], aliases)
        } else {
            lenient_failure(&text[at + 7..], opts.vocab)
        };
        match attempt {
            Ok(r) => return Ok(r),
            Err(e @ ParseError::MissingSubject(_)) => last_err = e,
            Err(_) => {}
        }
    }
    Err(last_err)
}

fn skip_ws(s: &str) -> &str {
    s.trim_start_matches([' ', '\t'])
}

fn lenient_plan(after_keyword: &str, aliases: &AliasTable) -> Result<PlannerResult, ParseError> {
    let rest = skip_ws(after_keyword);
    let rest = rest.strip_prefix(':').ok_or(ParseError::NoGrammarMatch)?;
    let mut rest = skip_ws(rest);
    // Only the current line belongs to the plan.
    if let Some(nl) = rest.find(['\n', '\r']) {
        rest = &rest[..nl];
    }
    let mut steps = Vec::new();
    loop {
        let Some((step, tail)) = lenient_step(rest, aliases) else {
            break;
        };
        steps.push(step);
        let tail = skip_ws(tail);
        match tail.chars().next() {
            Some(';') | Some(',') => rest = skip_ws(&tail[1..]),
            _ => break,
        }
    }
    Plan::new(steps)
        .map(PlannerResult::Plan)
        .map_err(|_| ParseError::NoGrammarMatch)
}

fn lenient_step<'t>(s: &'t str, aliases: &AliasTable) -> Option<(ActionStep, &'t str)> {
    let open = s.find('(')?;
    let verb_text = s[..open].trim();
    if verb_text.is_empty()
        || verb_text.len() > 24
        || !verb_text
            .chars()
            .all(|c| c.is_ascii_alphabetic() || c == ' ' || c == '_')
    {
        return None;
    }
    let target = aliases.resolve(verb_text).ok()?;
    let close = s[open..].find(')')? + open;
    let inner = &s[open + 1..close];
    let mut args = Vec::new();
    for raw in inner.split(',') {
        let folded = raw
            .trim()
            .trim_matches(|c| c == '"' || c == '\'')
            .to_ascii_lowercase()
            .split_whitespace()
            .collect::<Vec<_>>()
            .join("_");
        if folded.is_empty() {
            continue;
        }
        if !folded.chars().all(is_symbol_char) {
            return None;
        }
        args.push(folded);
    }
    if args.is_empty() {
        args.push(target.implied_arg.clone()?);
    }
    Some((
        ActionStep {
            verb: target.verb,
            args,
        },
        &s[close + 1..],
    ))
}

fn lenient_failure(after_keyword: &str, vocab: Option<&Vocabulary>) -> Result<PlannerResult, ParseError> {
    let rest = skip_ws(after_keyword);
    let rest = rest.strip_prefix('(').ok_or(ParseError::NoGrammarMatch)?;
    let close = rest.find(')').ok_or(ParseError::NoGrammarMatch)?;
    let tag = rest[..close]
        .trim()
        .to_ascii_lowercase()
        .replace([' ', '-'], "_");
    let tag = tag.strip_suffix("_failure").unwrap_or(&tag);
    let kind = FailureKind::from_tag(tag).ok_or(ParseError::NoGrammarMatch)?;
    let rest = skip_ws(&rest[close + 1..]);
    let rest = rest.strip_prefix(':').ok_or(ParseError::NoGrammarMatch)?;
    let line = rest.split(['\n', '\r']).next().unwrap_or("").trim();
    build_failure(kind, line, vocab)
}
