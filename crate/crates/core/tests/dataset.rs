use planner_core::dataset::{generate, read_jsonl, validate_dataset, write_jsonl, GenConfig};
use planner_core::protocol::render_result;
use planner_core::world::bundled_world;
use planner_core::{parse_prompt, parse_robot_output, ParseOptions, RuleOracle};

fn jsonl(config: &GenConfig) -> Vec<u8> {
    let mut out = Vec::new();
    write_jsonl(&generate(config).unwrap(), &mut out).unwrap();
    out
}

#[test]
fn every_target_is_what_the_oracle_answers() {
    let records = generate(&GenConfig::default()).unwrap();
    let world = bundled_world("apartment").unwrap();
    let oracle = RuleOracle::for_world(world.state());
    let mut mismatched = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let rec = parse_prompt(&r.input).unwrap();
        let answer = render_result(&oracle.decide(&rec));
        if answer != r.output {
            mismatched.push(format!("{i}: {} -> {answer} (dataset: {})", r.input.replace('\n', " / "), r.output));
        }
    }
    assert!(mismatched.is_empty(), "{}", mismatched.join("\n"));
}

#[test]
fn outputs_parse_strictly_against_the_world() {
    let records = generate(&GenConfig::default()).unwrap();
    let vocab = bundled_world("apartment").unwrap().vocabulary();
    let opts = ParseOptions::strict().with_vocab(&vocab);
    for r in &records {
        let parsed = parse_robot_output(&r.output, &opts).unwrap();
        assert_eq!(render_result(&parsed), r.output);
    }
    let report = validate_dataset(&records, &vocab);
    assert!(report.is_clean(), "{:?}", report.violations);
    assert!(report.max_round <= 2);
}

#[test]
fn same_seed_same_bytes() {
    let config = GenConfig::default();
    let a = jsonl(&config);
    assert_eq!(a, jsonl(&config));
    assert_eq!(read_jsonl(a.as_slice()).unwrap(), generate(&config).unwrap());
    let other = GenConfig {
        seed: config.seed + 1,
        ..config
    };
    assert_ne!(a, jsonl(&other));
}

#[test]
fn target_count_is_a_floor() {
    for target in [10, 300, 450] {
        let config = GenConfig {
            target_count: target,
            ..GenConfig::default()
        };
        assert!(generate(&config).unwrap().len() >= target);
    }
}
