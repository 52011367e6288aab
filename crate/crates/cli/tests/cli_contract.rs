//! Contract tests for the command-line surface: exit codes, error JSON,
//! the sweep CSV schema, and end-to-end smoke runs against library values.

mod common;

use common::{ad_csv, margins_csv, run_clborrow, write};
use serde_json::Value;
use tempfile::TempDir;

fn parse_stdout(out: &std::process::Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

#[test]
fn seed_flag_is_refused() {
    let out = run_clborrow(["sweep-mean", "--seed", "42"]);
    assert_eq!(out.status.code(), Some(2));
    let doc = parse_stdout(&out);
    assert_eq!(doc["error"]["kind"], "config");
    assert!(doc["error"]["message"]
        .as_str()
        .unwrap()
        .contains("deterministic"));
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("config.json");
    write(&config, "{ not json");
    let out = run_clborrow(["sweep-mean", "--config"]);
    assert_eq!(out.status.code(), Some(2)); // clap usage error
    let out = run_clborrow(["sweep-mean", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let doc = parse_stdout(&out);
    assert_eq!(doc["error"]["exit_code"], 2);
    // Invalid weight band is a config error too.
    write(
        &config,
        r#"{"weight": {"kind": "w1", "a": 0.9, "b": 0.8, "c_low": 0.05, "c_upp": 0.1}}"#,
    );
    let out = run_clborrow(["sweep-mean", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn data_errors_exit_3_with_coordinates() {
    let dir = TempDir::new().unwrap();
    let out = run_clborrow(["fit", "--data", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    let data = dir.path().join("bad.csv");
    write(&data, "cohort,arm,y\ns,a,1\ns,a,2\n");
    let config = dir.path().join("config.json");
    write(&config, r#"{"target_cohort": "s", "fixed_weight": 0.5}"#);
    let out = run_clborrow([
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let doc = parse_stdout(&out);
    let msg = doc["error"]["message"].as_str().unwrap();
    assert!(msg.contains("row 3"), "{msg}");

    // Empty data section.
    write(&data, "cohort,arm,y\n");
    let out = run_clborrow([
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn numerical_errors_exit_4() {
    // A duplicated covariate column makes the design rank-deficient.
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("dup.csv");
    let mut csv = String::from("cohort,arm,y,x1,x2\n");
    for i in 0..40 {
        csv.push_str(&format!("t,a,{},1.0,1.0\n", (i % 3 == 0) as u8));
        csv.push_str(&format!("t,b,{},2.0,2.0\n", (i % 2 == 0) as u8));
    }
    write(&data, &csv);
    let config = dir.path().join("config.json");
    write(
        &config,
        r#"{"target_cohort": "t", "control_arm": "a", "fixed_weights": {}}"#,
    );
    let out = run_clborrow([
        "glm",
        "--data",
        data.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let doc = parse_stdout(&out);
    assert_eq!(doc["error"]["kind"], "numerical");
}

#[test]
fn table_flag_rejected_for_non_table_commands() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("d.csv");
    write(&data, &margins_csv());
    let config = dir.path().join("config.json");
    write(
        &config,
        r#"{"target_cohort": "study2", "arm": "placebo", "fixed_weight": 0.5}"#,
    );
    let out = run_clborrow([
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--table",
        dir.path().join("t.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_mean_default_schema_contract() {
    let dir = TempDir::new().unwrap();
    let table = dir.path().join("sweep.csv");
    let out_json = dir.path().join("sweep.json");
    let out = run_clborrow([
        "sweep-mean",
        "--table",
        table.to_str().unwrap(),
        "--out",
        out_json.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&table).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "tau,w1,w2,w3,w_npp,p_w1,p_w2,p_w3,p_npp,pval_w1,pval_w2,pval_w3,prob_npp"
    );
    assert_eq!(lines.count(), 50, "default sweep writes 50 data rows");

    let doc: Value =
        serde_json::from_str(&std::fs::read_to_string(&out_json).unwrap()).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["command"], "sweep-mean");
    // Config echo carries the fully resolved sweep settings.
    assert_eq!(doc["config"]["sweep"]["points"], 50);
    assert_eq!(doc["config"]["sweep"]["reference_n"], 800);
    assert_eq!(doc["result"]["rows"].as_array().unwrap().len(), 50);
}

#[test]
fn fit_reports_the_chained_fixed_point() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("d.csv");
    // Constructed cohorts (300, 0.2) and (800, 0.2) in one arm.
    let mut csv = String::from("cohort,arm,y\n");
    for (cohort, n, s) in [("peds", 300, 60), ("adults", 800, 160)] {
        for i in 0..n {
            csv.push_str(&format!("{cohort},all,{}\n", (i < s) as u8));
        }
    }
    write(&data, &csv);
    let config = dir.path().join("config.json");
    write(
        &config,
        r#"{
            "target_cohort": "peds",
            "weight": {"kind": "w1", "a": 0.0, "b": 0.8, "c_low": 0.05, "c_upp": 0.1}
        }"#,
    );
    let out = run_clborrow([
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = parse_stdout(&out);
    assert_eq!(doc["result"]["p_hat"], 0.2);
    assert_eq!(doc["result"]["weight"], 0.8);
    assert_eq!(doc["result"]["clrt"]["p_value"], 1.0);
}

#[test]
fn glm_emits_five_coefficients_and_marginals() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("ad.csv");
    write(&data, &ad_csv());
    let config = dir.path().join("config.json");
    write(
        &config,
        r#"{
            "target_cohort": "study2",
            "control_arm": "placebo",
            "fixed_weights": {"placebo": 0.8, "low": 0.174, "high": 0.0}
        }"#,
    );
    let out = run_clborrow([
        "glm",
        "--data",
        data.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let doc = parse_stdout(&out);
    let coefs = doc["result"]["coefficients"].as_array().unwrap();
    assert_eq!(coefs.len(), 5);
    let names: Vec<&str> = coefs.iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, vec!["intercept", "arm_high", "arm_low", "BASE", "SEVERE"]);
    for c in coefs {
        assert!(c["p_value"].as_f64().unwrap().is_finite());
    }
    let rates = doc["result"]["marginals"]["rates"].as_array().unwrap();
    assert_eq!(rates.len(), 3);
    let contrasts = doc["result"]["marginals"]["contrasts"].as_array().unwrap();
    assert_eq!(contrasts.len(), 2);
    assert_eq!(doc["result"]["diagnostics"]["converged"], true);
    assert_eq!(doc["result"]["weights"]["study1"]["placebo"], 0.8);

    // End-to-end values match the same analysis run through the library.
    let mut weights = std::collections::BTreeMap::new();
    for (arm, w) in [("placebo", 0.8), ("low", 0.174), ("high", 0.0)] {
        weights.insert(("study1".to_string(), arm.to_string()), w);
    }
    let lib_data = clborrow_core::glm::build_design(
        &common::ad_blocks(),
        &["BASE".to_string(), "SEVERE".to_string()],
        "placebo",
        &weights,
    )
    .unwrap();
    let lib_fit = clborrow_core::glm::fit_weighted_logistic(&lib_data.rows).unwrap();
    for (cli_coef, lib_coef) in coefs.iter().zip(&lib_fit.coefficients) {
        let cli_value = cli_coef["estimate"].as_f64().unwrap();
        assert!(
            (cli_value - lib_coef).abs() < 1e-12,
            "CLI {cli_value} vs library {lib_coef}"
        );
    }
    let lib_marginals = clborrow_core::glm::gcomp_marginals(
        &lib_fit,
        &lib_data.target_design(),
        &lib_data.coding,
        0.95,
    )
    .unwrap();
    for (cli_rate, lib_rate) in rates.iter().zip(&lib_marginals.rates) {
        assert_eq!(cli_rate["arm"].as_str().unwrap(), lib_rate.arm);
        assert!((cli_rate["rate"].as_f64().unwrap() - lib_rate.rate).abs() < 1e-12);
    }
}

#[test]
fn npp_and_ess_from_config_only() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("config.json");
    write(
        &config,
        r#"{
            "npp": {"target": {"successes": 60, "trials": 300},
                     "reference": {"successes": 160, "trials": 800}},
            "ess": {"n_target": 300,
                     "var_target_only": 5.333333333333333e-4,
                     "var_combined": 1.4703485740153916e-4}
        }"#,
    );
    let out = run_clborrow(["npp", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc = parse_stdout(&out);
    let p_mean = doc["result"]["p_mean"].as_f64().unwrap();
    assert!((p_mean - 0.2).abs() < 0.005);

    let out = run_clborrow(["ess", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc = parse_stdout(&out);
    let value = doc["result"]["ess"]["value"].as_f64().unwrap();
    assert!((value - 788.177).abs() < 0.01);
}

#[test]
fn tipping_unknown_test_arm_exits_3() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("d.csv");
    write(&data, &margins_csv());
    let config = dir.path().join("config.json");
    write(
        &config,
        r#"{
            "target_cohort": "study2",
            "control_arm": "placebo",
            "tipping": {"path": "glm", "test_arm": "nope"}
        }"#,
    );
    let out = run_clborrow([
        "tipping",
        "--data",
        data.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let doc = parse_stdout(&out);
    assert!(doc["error"]["message"].as_str().unwrap().contains("nope"));
}

#[test]
fn tipping_per_arm_scale_config_parses() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("d.csv");
    write(&data, &margins_csv());
    let config = dir.path().join("config.json");
    write(
        &config,
        r#"{
            "target_cohort": "study2",
            "control_arm": "placebo",
            "tipping": {"path": "glm", "test_arm": "high",
                         "mode": "per_arm_scale",
                         "base": {"placebo": 0.8, "low": 0.174, "high": 0.0}}
        }"#,
    );
    let out = run_clborrow([
        "tipping",
        "--data",
        data.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let doc = parse_stdout(&out);
    // With the high-dose base weight fixed at zero, scaling leaves the
    // high-dose reference unused: results stay at the no-borrowing decision.
    assert_eq!(doc["result"]["rows"].as_array().unwrap().len(), 21);
    assert_eq!(doc["config"]["tipping"]["mode"], "per_arm_scale");
}

#[test]
fn tipping_glm_path_writes_table() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("d.csv");
    write(&data, &margins_csv());
    let config = dir.path().join("config.json");
    write(
        &config,
        r#"{
            "target_cohort": "study2",
            "control_arm": "placebo",
            "tipping": {"path": "glm", "test_arm": "high"}
        }"#,
    );
    let table = dir.path().join("tip.csv");
    let out = run_clborrow([
        "tipping",
        "--data",
        data.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--table",
        table.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = std::fs::read_to_string(&table).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "weight,p_value,reject");
    assert_eq!(lines.count(), 21);
    let doc = parse_stdout(&out);
    assert_eq!(doc["result"]["path"], "glm");
    assert_eq!(doc["result"]["flips"].as_array().unwrap().len(), 0);
}
