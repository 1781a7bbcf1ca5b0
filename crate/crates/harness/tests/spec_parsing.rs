use std::path::Path;

use nlsdp_core::PenaltyPolicy;
use nlsdp_harness::run::execute;
use nlsdp_harness::spec::KEYS;
use nlsdp_harness::sweep::expand;
use nlsdp_harness::{parse_config, validate_report, HarnessError, Probe, RunSpec};
use serde_json::json;

#[test]
fn config_text_parses_with_comments_and_dashes() {
    let pairs =
        parse_config("# head\n\nproblem = example-6.2  # trailing\neps-exponent=1.2\n").unwrap();
    assert_eq!(
        pairs,
        vec![
            ("problem".to_string(), "example-6.2".to_string()),
            ("eps_exponent".to_string(), "1.2".to_string()),
        ]
    );
    assert!(parse_config("no equals sign").is_err());
}

#[test]
fn later_pairs_override_earlier_ones() {
    let pairs = [
        ("rho0".to_string(), "100".to_string()),
        ("policy".to_string(), "growth".to_string()),
        ("rho0".to_string(), "1000".to_string()),
        ("probe".to_string(), "rate,calmness,rate".to_string()),
    ];
    let spec = RunSpec::from_pairs(&pairs).unwrap();
    assert_eq!(spec.alm.rho0, 1000.0);
    assert_eq!(spec.alm.policy, PenaltyPolicy::Growth);
    assert_eq!(spec.probes, vec![Probe::Rate, Probe::Calmness]);
    assert_eq!(spec.seed, 42);
}

#[test]
fn bad_values_are_rejected() {
    let spec = |k: &str, v: &str| RunSpec::from_pairs(&[(k.to_string(), v.to_string())]);
    assert!(spec("rho0", "ten").is_err());
    assert!(spec("probe", "speed").is_err());
    assert!(spec("colour", "red").is_err());
    assert!(spec("start", "elsewhere").is_err());
    let mut s = RunSpec::from_pairs(&[("problem".to_string(), "example-6.1".to_string())]).unwrap();
    s.alm.varsigma = 0.5;
    assert!(matches!(s.validate(), Err(HarnessError::Spec(_))));
    s.problem = "nosuch".into();
    assert!(matches!(s.validate(), Err(HarnessError::UnknownProblem(_))));
}

#[test]
fn config_rendering_round_trips() {
    let pairs = parse_config(
        "problem = example-6.2\nrho0 = 300\nrho_cap = 1e6\npolicy = fixed\nprobe = growth,rate\nstart_x = 0.05,-0.02\nseed = 9\ngrowth_samples = 17\n",
    )
    .unwrap();
    let spec = RunSpec::from_pairs(&pairs).unwrap();
    let again = RunSpec::from_pairs(&parse_config(&spec.to_config()).unwrap()).unwrap();
    assert_eq!(spec, again);
    for line in spec.to_config().lines() {
        let key = line.split(" = ").next().unwrap();
        assert!(KEYS.contains(&key), "{key}");
    }
}

#[test]
fn expansion_is_a_cartesian_product() {
    let base = [("problem".to_string(), "example-6.1".to_string())];
    let axes = [
        (
            "rho0".to_string(),
            vec!["10".to_string(), "100".to_string()],
        ),
        (
            "policy".to_string(),
            vec![
                "fixed".to_string(),
                "growth".to_string(),
                "v-test".to_string(),
            ],
        ),
    ];
    let specs = expand(&base, &axes, Path::new("base")).unwrap();
    assert_eq!(specs.len(), 6);
    assert!(specs.iter().all(|s| s.probes.contains(&Probe::Rate)));
    assert_eq!(specs[5].out, Path::new("base").join("run-05"));
    assert_eq!(specs[5].alm.rho0, 100.0);
    assert_eq!(specs[5].alm.policy, PenaltyPolicy::VTest);
}

#[test]
fn sweep_of_one_is_a_precondition_error() {
    let spec = RunSpec::from_pairs(&[("problem".to_string(), "example-6.1".to_string())]).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let r = nlsdp_harness::sweep(&[spec], tmp.path(), 2);
    assert!(matches!(r, Err(HarnessError::Precondition(_))));
}

#[test]
fn executed_reports_validate_and_broken_ones_do_not() {
    let spec = RunSpec::from_pairs(&[
        ("problem".to_string(), "example-6.1".to_string()),
        ("probe".to_string(), "error-bound,rate".to_string()),
    ])
    .unwrap();
    let o = execute(&spec).unwrap();
    validate_report(&o.report).unwrap();
    // The default 6.1 trace is too short for a rate fit; the probe records why.
    assert!(o.report["probes"]["rate"]["error"]
        .as_str()
        .unwrap()
        .contains("too short"));

    let mut missing = o.report.clone();
    missing.as_object_mut().unwrap().remove("final");
    assert!(validate_report(&missing).is_err());
    let mut wrong = o.report.clone();
    wrong["status"] = json!("finished");
    assert!(validate_report(&wrong).is_err());
    let mut probe = o.report.clone();
    probe["probes"]["growth"] = json!({ "l_hat": 1.0 });
    assert!(validate_report(&probe).is_err());
    let mut schema = o.report.clone();
    schema["schema"] = json!("other/0");
    assert!(validate_report(&schema).is_err());
}
