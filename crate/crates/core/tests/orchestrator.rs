use std::sync::Arc;

use planner_core::orchestrator::{EventKind, StepError};
use planner_core::world::bundled_world;
use planner_core::{build_graph, ReachParams, RuleOracle, Session, SessionConfig, SessionState, VisibilityPolicy};
use proptest::prelude::*;
use proptest::sample::{select, subsequence};

const REQUESTS: [&str; 8] = [
    "fetch me an orange",
    "bring me a cup",
    "get me a drink",
    "put the book away",
    "go to the sofa",
    "put the sponge in the drawer",
    "dance for me",
    "pick up the remote",
];

const GUIDANCE: [&str; 6] = [
    "it is in the cupboard",
    "the blue cup",
    "i would like the coke",
    "please try again",
    "look again",
    "never mind",
];

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn rounds_follow_the_protocol(
        request in select(REQUESTS.to_vec()),
        guidance in prop::collection::vec(select(GUIDANCE.to_vec()), 0..5),
        blocked in subsequence(vec!["orange", "blue_cup", "red_cup", "coke", "book", "sponge", "remote"], 0..4),
        max_rounds in 0u32..4,
    ) {
        let world = bundled_world("apartment").unwrap();
        let graph = Arc::new(build_graph(world.state(), &ReachParams::default()).unwrap());
        let oracle = RuleOracle::for_world(world.state());
        let mut config = SessionConfig {
            policy: VisibilityPolicy { blocklist: blocked.iter().map(|s| s.to_string()).collect(), ..VisibilityPolicy::default() },
            ..SessionConfig::default()
        };
        config.limits.max_recovery_rounds = max_rounds;
        let mut session = Session::with_graph("p", world, config, graph);

        let mut inputs = std::iter::once(request).chain(guidance.iter().copied());
        while session.state().accepts_input() {
            let Some(text) = inputs.next() else { break };
            let before = session.events().len();
            let events = session.step(text, &oracle).unwrap();
            prop_assert_eq!(&session.events()[before..], events.as_slice());
            let kinds: Vec<EventKind> = events.iter().map(|e| e.kind).collect();
            prop_assert_eq!(
                &kinds[..4],
                &[EventKind::UserInput, EventKind::VisionFeedback, EventKind::FeasibilityFeedback, EventKind::BackendReply]
            );
            let round = session.rounds_used();
            prop_assert_eq!(events[0].payload["round"].as_u64(), Some(u64::from(round)));
            let history = session.record().unwrap().history().len();
            prop_assert_eq!(history, 2 * (round as usize - 1));
            prop_assert_eq!(events[0].payload["history_len"].as_u64(), Some(history as u64));
            prop_assert!(round <= max_rounds + 1);
            let failed = kinds.contains(&EventKind::FailureReported);
            match session.state() {
                SessionState::Done => prop_assert!(!failed),
                SessionState::AwaitingGuidance => prop_assert!(failed && round <= max_rounds),
                SessionState::Exhausted => prop_assert!(failed && round == max_rounds + 1),
                other => prop_assert!(false, "unexpected state {:?}", other),
            }
            if session.state().is_terminal() {
                prop_assert_eq!(kinds.last(), Some(&EventKind::SessionEnd));
            }
        }
        for (i, e) in session.events().iter().enumerate() {
            prop_assert_eq!(e.seq, i as u64);
        }
        if session.state().is_terminal() {
            prop_assert_eq!(session.step("again", &oracle), Err(StepError::NotAccepting(session.state())));
        }
    }
}

#[test]
fn blank_input_is_refused_without_side_effects() {
    let world = bundled_world("apartment").unwrap();
    let oracle = RuleOracle::for_world(world.state());
    let mut session = Session::new("blank", world, SessionConfig::default()).unwrap();
    assert_eq!(session.step("  \t", &oracle), Err(StepError::EmptyInput));
    assert!(session.events().is_empty());
    assert_eq!(session.rounds_used(), 0);
}
