use std::collections::BTreeMap;

use thiserror::Error;

use super::scenario::{Expect, Scenario, ScriptLine, Suite};
use crate::backend::{family_plan, TaskFamily};

pub const INSTRUCTION_FIXTURE: &str = include_str!("../../data/fixtures/instructions.tsv");

/// One annotated command: `instruction<TAB>family<TAB>object[<TAB>destination]`.
/// For `go` the object column holds the location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub line: usize,
    pub text: String,
    pub family: TaskFamily,
    pub object: String,
    pub destination: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {reason}")]
pub struct AnnotationError {
    pub line: usize,
    pub reason: String,
}

impl Instruction {
    pub fn expected_plan(&self) -> Option<String> {
        let plan = match self.family {
            TaskFamily::Go => family_plan(self.family, None, Some(&self.object)),
            TaskFamily::PutAway => family_plan(
                self.family,
                Some(&self.object),
                Some(self.destination.as_deref().unwrap_or("counter")),
            ),
            TaskFamily::PutInDrawer => family_plan(
                self.family,
                Some(&self.object),
                Some(self.destination.as_deref().unwrap_or("drawer")),
            ),
            _ => family_plan(self.family, Some(&self.object), None),
        }?;
        Some(plan.to_string())
    }
}

/// Blank lines and `#` comments are skipped.
pub fn load_instruction_suite(text: &str) -> Result<Vec<Instruction>, AnnotationError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let err = |reason: String| AnnotationError { line, reason };
        let cols: Vec<&str> = raw.split('\t').map(str::trim).collect();
        if cols.len() < 3 || cols.len() > 4 {
            return Err(err(format!("expected 3 or 4 tab-separated columns, found {}", cols.len())));
        }
        if cols[0].is_empty() {
            return Err(err("empty instruction".into()));
        }
        let family: TaskFamily = cols[1].parse().map_err(err)?;
        if cols[2].is_empty() {
            return Err(err("missing object annotation".into()));
        }
        let destination = cols.get(3).filter(|d| !d.is_empty()).map(|d| d.to_string());
        let ins = Instruction {
            line,
            text: cols[0].to_string(),
            family,
            object: cols[2].to_string(),
            destination,
        };
        if ins.expected_plan().is_none() {
            return Err(err(format!("annotation does not form a valid {family} plan")));
        }
        out.push(ins);
    }
    Ok(out)
}

/// Planning-only scenarios, one per instruction.
pub fn instruction_suite(name: &str, instructions: &[Instruction]) -> Suite {
    let scenarios = instructions
        .iter()
        .map(|ins| Scenario {
            id: format!("{name}-{:03}", ins.line),
            world: "apartment".into(),
            policy: Default::default(),
            faults: Vec::new(),
            setup: Vec::new(),
            limits: None,
            goal: None,
            tags: BTreeMap::from([("family".to_string(), ins.family.tag().to_string())]),
            script: vec![ScriptLine {
                say: ins.text.clone(),
                edits: Vec::new(),
                expect: Expect {
                    plan: ins.expected_plan(),
                    ..Expect::default()
                },
            }],
        })
        .collect();
    Suite {
        name: name.to_string(),
        scenarios,
    }
}
