use lpann_core::{run_campaign, BenchSpec};
use serde_json::Value;

fn schema() -> Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/report.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn campaign_report_matches_the_published_schema() {
    let validator = jsonschema::validator_for(&schema()).unwrap();
    let spec = BenchSpec {
        n_grid: vec![250, 500],
        trials: 20,
        seed: 8,
        ..Default::default()
    };
    let report = serde_json::to_value(run_campaign(&spec).unwrap()).unwrap();
    let errors: Vec<String> = validator.iter_errors(&report).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:#?}");

    let mut broken = report.clone();
    broken["space"].as_object_mut().unwrap().remove("fit_slope");
    broken["success_rate"] = Value::from(1.5);
    assert_eq!(validator.iter_errors(&broken).count(), 2);
}
