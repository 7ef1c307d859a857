//! Random planner results and the prose/alias corpus built from them.

use planner_core::domain::{ActionStep, FailureReport, Plan, SkillVerb};
use planner_core::PlannerResult;
use rand::seq::IndexedRandom;
use rand::Rng;

const WORDS: [&str; 12] = [
    "orange", "coke", "blue_cup", "drawer", "table", "home", "shelf", "sofa", "item7", "a", "x_1", "fridge",
];

pub fn symbol<R: Rng>(rng: &mut R) -> String {
    if rng.random_bool(0.6) {
        return WORDS.choose(rng).unwrap().to_string();
    }
    const CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789_";
    let len = rng.random_range(1..=10);
    (0..len).map(|_| *CHARS.choose(rng).unwrap() as char).collect()
}

pub fn step<R: Rng>(rng: &mut R) -> ActionStep {
    let verb = *SkillVerb::ALL.choose(rng).unwrap();
    let args = match verb {
        SkillVerb::Place if rng.random_bool(0.5) => vec![symbol(rng), symbol(rng)],
        SkillVerb::Turn => vec![["left", "right"].choose(rng).unwrap().to_string()],
        _ => vec![symbol(rng)],
    };
    ActionStep::new(verb, args)
}

pub fn plan<R: Rng>(rng: &mut R) -> Plan {
    let n = rng.random_range(1..=6);
    Plan::new((0..n).map(|_| step(rng)).collect()).unwrap()
}

/// Printable single-line text, possibly with grammar punctuation in it.
pub fn prose<R: Rng>(rng: &mut R) -> String {
    const PIECES: [&str; 12] = [
        "slipped", "the", "gripper", "(", ")", ":", ";", "door", "stuck", "is", "blocked", "again",
    ];
    let n = rng.random_range(1..=6);
    (0..n).map(|_| *PIECES.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

pub fn failure<R: Rng>(rng: &mut R) -> FailureReport {
    let candidates: Vec<String> = (0..rng.random_range(2..=4)).map(|_| symbol(rng)).collect();
    match rng.random_range(0..7) {
        0 => FailureReport::vision(&symbol(rng)),
        1 => FailureReport::feasibility(&symbol(rng)),
        2 => FailureReport::ambiguous_reference(&symbol(rng), &candidates),
        3 => FailureReport::ambiguous_category(&symbol(rng), &candidates),
        4 => FailureReport::unclear_task(),
        5 => {
            let remaining = plan(rng);
            let failed = remaining.steps()[0].clone();
            FailureReport::execution(&failed, &prose(rng), &remaining)
        }
        _ => FailureReport::execution_without_step(&prose(rng)),
    }
}

pub fn planner_result<R: Rng>(rng: &mut R) -> PlannerResult {
    if rng.random_bool(0.5) {
        PlannerResult::Plan(plan(rng))
    } else {
        PlannerResult::Failure(failure(rng))
    }
}

const PREFIXES: [&str; 6] = [
    "",
    "Sure! ",
    "Okay, here is what I will do.\n",
    "I understand the request. ",
    "Let me think.\nThe robot should act as follows:\n",
    "Answer -> ",
];

const SUFFIXES: [&str; 5] = ["", " Hope this helps.", "\nLet me know if that works.", ".", "  "];

fn surface<R: Rng>(rng: &mut R, step: &ActionStep) -> String {
    let verb = match step.verb {
        SkillVerb::Pick => *["pick", "pick up", "grab", "Pick Up", "PICK"].choose(rng).unwrap(),
        SkillVerb::Go if step.args == ["home"] && rng.random_bool(0.3) => return "go back()".into(),
        SkillVerb::Go => *["go", "go to", "Go To"].choose(rng).unwrap(),
        SkillVerb::Place => *["place", "put", "place in", "Put"].choose(rng).unwrap(),
        other => other.canonical_name(),
    };
    let args: Vec<String> = step
        .args
        .iter()
        .map(|a| if rng.random_bool(0.2) { a.to_ascii_uppercase() } else { a.clone() })
        .collect();
    let sep = *[", ", ",", " , "].choose(rng).unwrap();
    format!("{verb}({})", args.join(sep))
}

/// Prose-wrapped, alias-mutated rendering of a plan.
pub fn mutated_plan_text<R: Rng>(rng: &mut R, plan: &Plan) -> String {
    let sep = *[" ; ", ";", ", ", " ,  "].choose(rng).unwrap();
    let body = plan.steps().iter().map(|s| surface(rng, s)).collect::<Vec<_>>().join(sep);
    let keyword = *["PLAN", "Plan", "plan"].choose(rng).unwrap();
    let colon = *[": ", ":", " : "].choose(rng).unwrap();
    format!(
        "{}{keyword}{colon}{body}{}",
        PREFIXES.choose(rng).unwrap(),
        SUFFIXES.choose(rng).unwrap()
    )
}

/// Text that leans toward grammar tokens so the parsers see near misses.
pub fn token_soup<R: Rng>(rng: &mut R) -> String {
    const TOKENS: [&str; 22] = [
        "PLAN", "plan", "FAILURE", "failure", ":", "(", ")", ";", ",", " ", "\n", "\r", "pick up", "go back", "vision",
        "cannot find ", "é", "<user>", "<history>", "\\", "|", "remaining: ",
    ];
    let n = rng.random_range(0..40);
    (0..n).map(|_| *TOKENS.choose(rng).unwrap()).collect()
}
