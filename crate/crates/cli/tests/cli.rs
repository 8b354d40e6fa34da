use std::path::Path;
use std::process::{Command, Output};

use catfuse::simlab::{generate, Scenario};
use serde_json::Value;

fn catfuse(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catfuse"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("run catfuse")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).expect("output file")).expect("valid json")
}

fn error_doc(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(stderr.trim()).expect("stderr is one JSON document")
}

#[test]
fn unknown_scenario_is_a_json_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = catfuse(&["simulate", "--scenario", "s9"], tmp.path());
    let doc = error_doc(&out);
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["error"]["kind"], "InvalidArgument");
    assert!(doc["error"]["message"].as_str().unwrap().contains("s9"));
}

#[test]
fn missing_arguments_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let doc = error_doc(&catfuse(&["path"], tmp.path()));
    assert_eq!(doc["error"]["kind"], "Usage");
    let doc = error_doc(&catfuse(&["fit", "--scenario", "s1"], tmp.path()));
    assert_eq!(doc["error"]["kind"], "InvalidArgument");
    let doc = error_doc(&catfuse(&["fit", "--scenario", "s1", "--s-ratio", "1.5"], tmp.path()));
    assert_eq!(doc["error"]["kind"], "InvalidArgument");
}

#[test]
fn help_exits_cleanly() {
    let out = Command::new(env!("CARGO_BIN_EXE_catfuse"))
        .arg("--help")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("simulate"));
}

/// Group means of the first scenario's training data, minus the reference.
fn group_mean_effects() -> Vec<f64> {
    let data = generate(&Scenario::s1(0)).unwrap();
    let (mut sum, mut count) = (vec![0.0; 9], vec![0.0; 9]);
    for (&c, &y) in data.train.codes(0).iter().zip(data.train.y()) {
        sum[c] += y;
        count[c] += 1.0;
    }
    let means: Vec<f64> = sum.iter().zip(&count).map(|(s, c)| s / c).collect();
    means.iter().map(|m| m - means[0]).collect()
}

fn coefficients(doc: &Value) -> Vec<f64> {
    doc["coefficients"][0]["levels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| l["coefficient"].as_f64().unwrap())
        .collect()
}

#[test]
fn full_budget_fit_is_least_squares() {
    let tmp = tempfile::tempdir().unwrap();
    let out = catfuse(
        &["fit", "--scenario", "s1", "--s-ratio", "1", "--grid", "20"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&tmp.path().join("coefficients.json"));
    let got = coefficients(&doc);
    for (g, e) in got.iter().zip(group_mean_effects()) {
        assert!((g - e).abs() < 1e-8, "{g} vs {e}");
    }
    assert_eq!(doc["df"], 9);
}

#[test]
fn zero_budget_fit_is_intercept_only() {
    let tmp = tempfile::tempdir().unwrap();
    let out = catfuse(
        &["fit", "--scenario", "s2", "--s-ratio", "0", "--grid", "20", "--refit"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&tmp.path().join("coefficients.json"));
    assert_eq!(doc["df"], 1);
    let data = generate(&Scenario::s2(0)).unwrap();
    let mean = data.train.y().iter().sum::<f64>() / data.train.n() as f64;
    assert!((doc["intercept"].as_f64().unwrap() - mean).abs() < 1e-10);
    let partition = read_json(&tmp.path().join("partition.json"));
    for f in partition["factors"].as_array().unwrap() {
        assert_eq!(f["clusters"].as_array().unwrap().len(), 1);
    }
}

#[test]
fn cv_table_shape_and_embedded_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = catfuse(
        &[
            "cv",
            "--scenario",
            "s1",
            "--k-folds",
            "4",
            "--grid",
            "12",
            "--seed",
            "5",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(tmp.path().join("cv.csv")).unwrap();
    let mut lines = text.lines();
    let head: Value = serde_json::from_str(lines.next().unwrap().strip_prefix("# ").unwrap()).unwrap();
    assert_eq!(head["schema_version"], 1);
    assert_eq!(head["config"]["k_folds"], 4);
    assert_eq!(head["config"]["seed"], 5);
    assert_eq!(head["config"]["scenario"], "s1");
    assert_eq!(lines.next().unwrap(), "s_ratio,mean_score,fold_1,fold_2,fold_3,fold_4");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r.split(',').count() == 6));
    assert!(rows[0].starts_with("1.0,"));
    let chosen = read_json(&tmp.path().join("chosen.json"));
    assert_eq!(chosen["config"]["grid"], 12);
    let s = chosen["chosen_s_ratio"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&s));
}

#[test]
fn flat_response_ties_to_sparsest_model() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("flat.csv");
    let schema = tmp.path().join("schema.json");
    let mut csv = String::from("y,g\n");
    for i in 0..24 {
        csv.push_str(&format!("3.0,{}\n", ["a", "b", "c"][i % 3]));
    }
    std::fs::write(&data, csv).unwrap();
    std::fs::write(
        &schema,
        r#"[{"name": "g", "scale": "nominal", "levels": ["a", "b", "c"]}]"#,
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = catfuse(
        &[
            "cv",
            "--data",
            data.to_str().unwrap(),
            "--schema",
            schema.to_str().unwrap(),
            "--k-folds",
            "3",
            "--grid",
            "6",
        ],
        &out_dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let chosen = read_json(&out_dir.join("chosen.json"));
    assert_eq!(chosen["chosen_s_ratio"].as_f64(), Some(0.0));
}

#[test]
fn path_table_runs_from_ols_to_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = catfuse(&["path", "--scenario", "s1", "--grid", "15"], tmp.path());
    assert!(out.status.success());
    let text = std::fs::read_to_string(tmp.path().join("path.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# {"));
    assert!(lines[1].starts_with("s_ratio,lambda,x:1,"));
    assert_eq!(lines.len(), 2 + 15);
    assert!(lines[2].starts_with("1.0,0.0,"));
    let last: Vec<&str> = lines[16].split(',').collect();
    assert_eq!(last[0], "0.0");
    // df column of the intercept-only point
    assert_eq!(last[last.len() - 3], "1");
    for line in &lines[2..] {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let (delta, bound) = (cols[cols.len() - 2], cols[cols.len() - 1]);
        assert!(delta <= bound + 1e-12, "{line}");
    }
}

#[test]
fn simulate_writes_report_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = catfuse(
        &[
            "simulate",
            "--scenario",
            "s1",
            "--replicates",
            "1",
            "--variants",
            "ols",
            "--grid",
            "10",
            "--k-folds",
            "3",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(tmp.path().join("simreport.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    let summary = read_json(&tmp.path().join("summary.json"));
    assert_eq!(summary["summaries"].as_array().unwrap().len(), 1);
    assert_eq!(summary["config"]["replicates"], 1);
}
