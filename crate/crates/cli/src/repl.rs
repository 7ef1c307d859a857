//! Terminal front end for a session.

use std::io::{self, BufRead, Write};

use planner_core::eval::Edit;
use planner_core::orchestrator::EventKind;
use planner_core::{PlanBackend, Session, SessionConfig, SessionEvent, SessionState, World};

/// One transcript line per event.
pub fn render_event(ev: &SessionEvent) -> String {
    let p = &ev.payload;
    let s = |k: &str| p[k].as_str().unwrap_or_default().to_string();
    match ev.kind {
        EventKind::UserInput => format!("U: {}", s("text")),
        EventKind::VisionFeedback => format!("O: {}", s("text")),
        EventKind::FeasibilityFeedback => match p["object"].as_str() {
            Some(o) => format!("F: {} ({o})", p["score"]),
            None => format!("F: {}", p["score"]),
        },
        EventKind::BackendReply => match p.get("error") {
            Some(e) => format!("planner error: {}", e.as_str().unwrap_or_default()),
            None => format!("R: {}", s("text")),
        },
        EventKind::PlanAccepted => format!("plan accepted ({} steps)", p["steps"]),
        EventKind::StepExecuted => {
            let detail = s("detail");
            let outcome = p["outcome"].as_str().unwrap_or_default();
            if detail.is_empty() {
                format!("  {} {outcome}", s("step"))
            } else {
                format!("  {} {outcome}: {detail}", s("step"))
            }
        }
        EventKind::FailureReported => format!("failure [{}]: {}", s("kind"), s("explanation")),
        EventKind::GuidanceRequested => format!("guidance needed ({} rounds left)", p["rounds_left"]),
        EventKind::SessionEnd => format!("session ended: {}", s("state")),
    }
}

/// Parse `:move orange cupboard`, `:open drawer`, `:hide apple` and friends.
pub fn parse_edit(line: &str) -> Option<Edit> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    let arg = |i: usize| parts.get(i).map(|s| s.to_string());
    match parts.first().copied()? {
        ":move" if parts.len() == 3 => Some(Edit::Move {
            object: arg(1)?,
            to: arg(2)?,
            pose: None,
        }),
        ":open" if parts.len() == 2 => Some(Edit::Open { location: arg(1)? }),
        ":close" if parts.len() == 2 => Some(Edit::Close { location: arg(1)? }),
        ":hide" if parts.len() == 2 => Some(Edit::Hide { object: arg(1)? }),
        ":reveal" if parts.len() == 2 => Some(Edit::Reveal { object: arg(1)? }),
        _ => None,
    }
}

const HELP: &str = "commands: :move <object> <location>, :open/:close <container>, \
:hide/:reveal <object>, :world, :reset, :quit";

/// Read requests and guidance line by line until EOF or `:quit`.
pub fn run_repl<R: BufRead, W: Write>(
    input: R,
    mut out: W,
    world: World,
    config: SessionConfig,
    backend: &dyn PlanBackend,
) -> io::Result<Session> {
    let new_session = |n: u32| {
        Session::new(format!("repl-{n}"), world.clone(), config.clone())
            .map_err(|e| io::Error::other(e.to_string()))
    };
    let mut count = 1;
    let mut session = new_session(count)?;
    writeln!(out, "{HELP}")?;
    write!(out, "you> ")?;
    out.flush()?;
    for line in input.lines() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
        } else if text == ":quit" {
            break;
        } else if text == ":world" {
            writeln!(out, "{}", serde_json::to_string_pretty(&session.world().snapshot()).unwrap_or_default())?;
        } else if text == ":reset" {
            count += 1;
            session = new_session(count)?;
        } else if text.starts_with(':') {
            match parse_edit(text) {
                Some(edit) => {
                    let mut policy = session.policy_mut().clone();
                    match session.edit_world(|w| edit.apply(w, &mut policy)) {
                        Ok(()) => *session.policy_mut() = policy,
                        Err(e) => writeln!(out, "edit rejected: {e}")?,
                    }
                }
                None => writeln!(out, "{HELP}")?,
            }
        } else {
            if session.state().is_terminal() {
                count += 1;
                session = new_session(count)?;
            }
            match session.step(text, backend) {
                Ok(events) => {
                    for ev in &events {
                        writeln!(out, "{}", render_event(ev))?;
                    }
                }
                Err(e) => writeln!(out, "{e}")?,
            }
        }
        let prompt = if session.state() == SessionState::AwaitingGuidance {
            "guidance> "
        } else {
            "you> "
        };
        write!(out, "{prompt}")?;
        out.flush()?;
    }
    writeln!(out)?;
    Ok(session)
}
