use polchinski::experiment::{self, catalogue, Task};
use polchinski::Error;

fn pointer_of(text: &str) -> String {
    match experiment::parse_config(text).and_then(|c| experiment::run(&c, None, None)) {
        Err(Error::Config { pointer, .. }) => pointer,
        other => panic!("expected a config error, got {:?}", other.map(|o| o.passed())),
    }
}

#[test]
fn unknown_top_level_key() {
    assert_eq!(pointer_of(r#"{"name": "x", "task": "cw", "params": {}, "sede": 3}"#), "/sede");
}

#[test]
fn unknown_nested_key() {
    let text = r#"{"name": "x", "task": "flow", "params": {
        "model": {"potential": {"kind": "quadratic", "m": 1.0, "mass": 2.0}},
        "schedule": {"kind": "unit", "horizon": 1.0}}}"#;
    assert_eq!(pointer_of(text), "/params/model/potential/mass");
}

#[test]
fn unknown_key_inside_list() {
    let text = r#"{"name": "x", "task": "lsi", "params": {"mean_field": {"d": 1.5, "deltas": [0.1, 0.01]},
        "expect": [{"quantity": "a", "relation": "equal", "value": 1.0}, {"quantity": "b", "relation": "equal", "value": 1.0, "slack": 1}]}}"#;
    assert_eq!(pointer_of(text), "/params/expect/1/slack");
}

#[test]
fn wrong_type_points_at_value() {
    let text = r#"{"name": "x", "task": "ising", "params": {"rings": {"sizes": [4, "six"], "betas": [0.2]}}}"#;
    assert_eq!(pointer_of(text), "/params/rings/sizes/1");
}

#[test]
fn every_bundled_config_parses_and_round_trips() {
    for (name, text) in catalogue::BUNDLED {
        let cfg = experiment::parse_config(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(&cfg.name, name);
        let again = experiment::parse_config(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
    }
}

#[test]
fn catalogue_is_complete_and_ordered() {
    let entries = catalogue::list_experiments().unwrap();
    assert!(entries.len() >= 12);
    let criteria: Vec<u32> = entries.iter().filter_map(|e| e.criterion).collect();
    assert_eq!(criteria, (1..=14).collect::<Vec<_>>());
    let mut ids: Vec<&str> = entries.iter().map(|e| e.id.as_str()).collect();
    ids.dedup();
    assert_eq!(ids.len(), entries.len());
    for e in &entries {
        assert!(!e.anchor.is_empty() && !e.expected_runtime.is_empty(), "{}", e.id);
        for c in &e.configs {
            let text = catalogue::bundled_config(c).unwrap_or_else(|| panic!("{} names missing config {c}", e.id));
            assert_eq!(experiment::parse_config(text).unwrap().task, e.task, "{c}");
        }
    }
    assert_eq!(catalogue::render(&entries), catalogue::render(&catalogue::list_experiments().unwrap()));
}

#[test]
fn task_names_round_trip() {
    for t in Task::ALL {
        assert_eq!(Task::from_name(t.name()), Some(t));
    }
}

#[test]
fn seed_override_is_echoed() {
    let cfg = experiment::parse_config(catalogue::bundled_config("mean-field-scaling").unwrap()).unwrap();
    let out = experiment::run(&cfg, None, Some(42)).unwrap();
    assert_eq!(out.results()["seed"], 42);
    assert_eq!(out.results()["config"]["seed"], 42);
}
