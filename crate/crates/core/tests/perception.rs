use planner_core::perception::{describe, detect, parse_observations, Observation};
use planner_core::world::bundled_world;
use planner_core::VisibilityPolicy;
use proptest::prelude::*;
use proptest::sample::{select, subsequence};

fn names() -> (Vec<String>, Vec<String>) {
    let vocab = bundled_world("apartment").unwrap().vocabulary();
    let objects: Vec<String> = vocab.objects.into_iter().collect();
    let queries = objects.iter().cloned().chain(vocab.categories.into_keys()).collect();
    (objects, queries)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, ..ProptestConfig::default() })]

    #[test]
    fn blocking_more_never_reveals_more(
        query in { let (_, q) = names(); prop::collection::vec(select(q), 1..4) },
        small in { let (o, _) = names(); let n = o.len(); subsequence(o, 0..n) },
        extra in { let (o, _) = names(); let n = o.len(); subsequence(o, 0..n) },
        closed in any::<bool>(),
    ) {
        let state = bundled_world("apartment").unwrap().snapshot();
        let narrow = VisibilityPolicy { hide_inside_closed: closed, blocklist: small.iter().cloned().collect(), ..VisibilityPolicy::default() };
        let wide = VisibilityPolicy { blocklist: small.iter().chain(&extra).cloned().collect(), ..narrow.clone() };
        let a = detect(&state, &query, &narrow).unwrap();
        let b = detect(&state, &query, &wide).unwrap();
        for (ra, rb) in a.results.iter().zip(&b.results) {
            prop_assert!(rb.matches.iter().all(|m| ra.matches.contains(m)));
        }
        for name in &extra {
            prop_assert!(!b.is_seen(name));
        }
    }

    #[test]
    fn describe_parses_back(
        query in { let (_, q) = names(); prop::collection::vec(select(q), 1..4) },
        blocked in { let (o, _) = names(); let n = o.len(); subsequence(o, 0..n) },
    ) {
        let state = bundled_world("apartment").unwrap().snapshot();
        let policy = VisibilityPolicy { blocklist: blocked.into_iter().collect(), ..VisibilityPolicy::default() };
        let report = detect(&state, &query, &policy).unwrap();
        let parsed = parse_observations(&describe(&report));
        prop_assert_eq!(parsed.len(), report.results.len());
        for (obs, r) in parsed.iter().zip(&report.results) {
            match (obs, r.matches.as_slice()) {
                (Observation::Missing { name }, []) => prop_assert_eq!(name, &r.name),
                (Observation::Found { object, position }, [m]) => {
                    prop_assert_eq!(object, &m.object);
                    for (got, want) in position.iter().zip([m.pose.x, m.pose.y, m.pose.z]) {
                        prop_assert!((got - want).abs() <= 0.005 + 1e-9);
                    }
                }
                (Observation::Several { name, candidates }, many) => {
                    prop_assert_eq!(name, &r.name);
                    prop_assert_eq!(candidates.clone(), many.iter().map(|m| m.object.clone()).collect::<Vec<_>>());
                }
                (obs, m) => prop_assert!(false, "{:?} vs {} matches", obs, m.len()),
            }
        }
    }
}

#[test]
fn unknown_query_is_an_error() {
    let state = bundled_world("apartment").unwrap().snapshot();
    assert!(detect(&state, &["unicorn".to_string()], &VisibilityPolicy::default()).is_err());
}
