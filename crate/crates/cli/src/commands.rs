use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use catfuse::coding::build_augmented;
use catfuse::data::{ingest_csv, read_schema, Dataset};
use catfuse::selection::{kfold_cv, CvConfig};
use catfuse::simlab::{generate, run_study, Scenario, StudyConfig, Variant};
use catfuse::solver::{path_with, LassoOptions, PathOptions, PathResult};
use catfuse::structure::{degrees_of_freedom, extract_clusters, refit, ClusterPartition, DEFAULT_CLUSTER_TOL};
use catfuse::weights::{build_weights, WeightConfig};
use catfuse::{Error, Result, VERSION};
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{csv_with_header, json_bytes, write_atomic, SCHEMA_VERSION};
use crate::CommonArgs;

#[derive(Debug, Serialize)]
struct Tolerances {
    lasso_tol: f64,
    kkt_tol: f64,
    cluster_tol: f64,
    lambda_min_ratio: f64,
}

fn tolerances() -> Tolerances {
    let opts = PathOptions::default();
    Tolerances {
        lasso_tol: LassoOptions::default().tol,
        kkt_tol: LassoOptions::default().kkt_tol,
        cluster_tol: DEFAULT_CLUSTER_TOL,
        lambda_min_ratio: opts.lambda_min_ratio,
    }
}

fn config_value(command: &str, common: &CommonArgs, extra: Value) -> Result<Value> {
    let mut v = serde_json::to_value(common)?;
    let obj = v.as_object_mut().expect("struct serializes to an object");
    obj.insert("command".into(), json!(command));
    if let Value::Object(extra) = extra {
        obj.extend(extra);
    }
    Ok(v)
}

fn envelope(config: &Value) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("version".into(), json!(VERSION));
    m.insert("config".into(), config.clone());
    m
}

fn load(common: &CommonArgs) -> Result<Dataset> {
    match (&common.data, &common.scenario) {
        (Some(data), _) => {
            let schema = common
                .schema
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("--data needs --schema".into()))?;
            let schemas = read_schema(schema)?;
            ingest_csv(data, &schemas, &common.response)
        }
        (None, Some(name)) => Ok(generate(&Scenario::by_name(name, common.seed)?)?.train),
        (None, None) => Err(Error::InvalidArgument("either --data or --scenario is required".into())),
    }
}

fn weight_config(common: &CommonArgs) -> WeightConfig {
    WeightConfig {
        adaptive: common.adaptive,
        use_frequency: common.frequency,
        spatial_h: common.spatial_h,
        spatial_floor: common.spatial_floor,
    }
}

fn compute_path(common: &CommonArgs, ds: &Dataset) -> Result<PathResult> {
    let weights = build_weights(ds, &weight_config(common))?;
    let problem = build_augmented(ds, &weights, common.gamma)?;
    path_with(&problem, &PathOptions::with_grid(common.grid))
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must lie in [0, 1], got {v}")))
    }
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn partition_json(ds: &Dataset, p: &ClusterPartition) -> Value {
    let factors: Vec<Value> = p
        .factors
        .iter()
        .zip(ds.schemas())
        .map(|(f, s)| {
            let named: Vec<Vec<&str>> = f
                .clusters
                .iter()
                .map(|c| c.iter().map(|&l| s.levels[l].as_str()).collect())
                .collect();
            json!({
                "factor": f.factor,
                "scale": f.scale,
                "clusters": named,
                "cluster_indices": f.clusters,
                "coefficients": f.coefficients,
            })
        })
        .collect();
    json!(factors)
}

pub fn fit(common: &CommonArgs, s_ratio: Option<f64>, chosen: Option<&Path>, do_refit: bool) -> Result<()> {
    let s = match (s_ratio, chosen) {
        (Some(s), _) => s,
        (None, Some(path)) => {
            let doc: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            doc.get("chosen_s_ratio")
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::InvalidArgument(format!("{} has no chosen_s_ratio", path.display())))?
        }
        (None, None) => return Err(Error::InvalidArgument("fit needs --s-ratio or --chosen".into())),
    };
    check_unit("s_ratio", s)?;
    let config = config_value(
        "fit",
        common,
        json!({ "s_ratio": s, "chosen": chosen, "refit": do_refit }),
    )?;
    let ds = load(common)?;
    let result = compute_path(common, &ds)?;
    let (mut beta, mut intercept) = result.coefficients_at(s)?;
    let mut partition = extract_clusters(ds.schemas(), &beta, DEFAULT_CLUSTER_TOL);
    if do_refit {
        let r = refit(&ds, &partition)?;
        beta = r.beta;
        intercept = r.intercept;
        partition = r.partition;
    }
    let df = degrees_of_freedom(&partition);
    let fitted = catfuse::linalg::predict(&ds, &beta, intercept);
    let rss = catfuse::linalg::residual_sum_of_squares(ds.y(), &fitted);

    let coefficients: Vec<Value> = ds
        .schemas()
        .iter()
        .zip(&beta)
        .map(|(schema, b)| {
            let levels: Vec<Value> = schema
                .levels
                .iter()
                .zip(b)
                .map(|(name, v)| json!({ "level": name, "coefficient": v }))
                .collect();
            json!({ "factor": schema.name, "scale": schema.scale, "levels": levels })
        })
        .collect();
    let mut doc = envelope(&config);
    doc.insert("s_ratio".into(), json!(s));
    doc.insert("refit".into(), json!(do_refit));
    doc.insert("df".into(), json!(df));
    doc.insert("intercept".into(), json!(intercept));
    doc.insert("rss".into(), json!(rss));
    doc.insert("n".into(), json!(ds.n()));
    doc.insert("tolerances".into(), serde_json::to_value(tolerances())?);
    doc.insert("coefficients".into(), json!(coefficients));
    write_atomic(&common.out, "coefficients.json", &json_bytes(&doc)?)?;

    let mut pdoc = envelope(&config);
    pdoc.insert("s_ratio".into(), json!(s));
    pdoc.insert("df".into(), json!(df));
    pdoc.insert("tolerances".into(), serde_json::to_value(tolerances())?);
    pdoc.insert("factors".into(), partition_json(&ds, &partition));
    write_atomic(&common.out, "partition.json", &json_bytes(&pdoc)?)?;

    let mut log = String::new();
    let _ = writeln!(log, "catfuse {VERSION} fit (schema_version {SCHEMA_VERSION})");
    let _ = writeln!(log, "config {}", serde_json::to_string(&config)?);
    let _ = writeln!(log, "tolerances {}", serde_json::to_string(&tolerances())?);
    let _ = writeln!(log, "observations {}", ds.n());
    let _ = writeln!(log, "lambda_max {}", fmt(result.lambda_max));
    let _ = writeln!(log, "ols_theta_l1 {}", fmt(result.ols_theta_l1));
    let sweeps: usize = result.points.iter().map(|p| p.sweeps).sum();
    let active: usize = result.points.iter().map(|p| p.active_set_iterations).sum();
    let _ = writeln!(
        log,
        "path points {} sweeps {sweeps} active_set_iterations {active}",
        result.points.len()
    );
    let violated = result
        .points
        .iter()
        .filter(|p| p.precision.is_some_and(|r| !r.satisfied))
        .count();
    let _ = writeln!(log, "precision bound violations {violated}");
    let _ = writeln!(log, "s_ratio {} refit {do_refit} df {df} rss {}", fmt(s), fmt(rss));
    write_atomic(&common.out, "fit.log", log.as_bytes())?;
    Ok(())
}

pub fn path(common: &CommonArgs) -> Result<()> {
    let config = config_value("path", common, json!({}))?;
    let ds = load(common)?;
    let result = compute_path(common, &ds)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["s_ratio".to_string(), "lambda".to_string()];
    for s in ds.schemas() {
        header.extend(s.levels.iter().skip(1).map(|l| format!("{}:{}", s.name, l)));
    }
    header.extend(["df", "delta", "bound"].map(String::from));
    w.write_record(&header)?;
    for p in &result.points {
        let mut row = vec![fmt(p.s_ratio), fmt(p.lambda)];
        for b in &p.beta {
            row.extend(b.iter().skip(1).map(|v| fmt(*v)));
        }
        let df = degrees_of_freedom(&extract_clusters(ds.schemas(), &p.beta, DEFAULT_CLUSTER_TOL));
        row.push(df.to_string());
        let (delta, bound) = p.precision.map_or((f64::NAN, f64::NAN), |r| (r.delta, r.bound));
        row.push(fmt(delta));
        row.push(fmt(bound));
        w.write_record(&row)?;
    }
    let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let mut head = envelope(&config);
    head.insert("gamma".into(), json!(result.gamma));
    head.insert("lambda_max".into(), json!(result.lambda_max));
    head.insert("ols_theta_l1".into(), json!(result.ols_theta_l1));
    head.insert("tolerances".into(), serde_json::to_value(tolerances())?);
    write_atomic(&common.out, "path.csv", &csv_with_header(&head, body)?)
}

pub fn cv(common: &CommonArgs, k_folds: usize, refit_inside: bool) -> Result<()> {
    let config = config_value("cv", common, json!({ "k_folds": k_folds, "refit": refit_inside }))?;
    let ds = load(common)?;
    let cfg = CvConfig {
        k_folds,
        grid_size: common.grid,
        seed: common.seed,
        weights: weight_config(common),
        refit_inside,
        gamma: common.gamma,
        cluster_tol: DEFAULT_CLUSTER_TOL,
    };
    let curve = kfold_cv(&ds, &cfg)?;
    let mut body = Vec::new();
    curve.write_csv(&mut body)?;
    let head = envelope(&config);
    write_atomic(&common.out, "cv.csv", &csv_with_header(&head, body)?)?;

    let mut doc = envelope(&config);
    doc.insert("chosen_s_ratio".into(), json!(curve.chosen_s_ratio));
    doc.insert("chosen_index".into(), json!(curve.chosen_index));
    doc.insert("min_mean_score".into(), json!(curve.mean_score[curve.chosen_index]));
    doc.insert("k_folds".into(), json!(curve.k_folds));
    doc.insert("seed".into(), json!(curve.seed));
    doc.insert("refit_inside".into(), json!(curve.refit_inside));
    doc.insert(
        "tie_rule".into(),
        json!("smallest s_ratio among scores within relative 1e-12 of the minimum"),
    );
    write_atomic(&common.out, "chosen.json", &json_bytes(&doc)?)
}

pub struct SimulateArgs {
    pub scenario: String,
    pub replicates: usize,
    pub variants: String,
    pub k_folds: usize,
    pub grid: usize,
    pub gamma: f64,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let scenario = Scenario::by_name(&args.scenario, args.seed)?;
    let variants = args
        .variants
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse::<Variant>)
        .collect::<Result<Vec<_>>>()?;
    let study = StudyConfig {
        k_folds: args.k_folds,
        grid_size: args.grid,
        gamma: args.gamma,
        cluster_tol: DEFAULT_CLUSTER_TOL,
    };
    let config = json!({
        "command": "simulate",
        "scenario": args.scenario,
        "replicates": args.replicates,
        "variants": variants.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "k_folds": args.k_folds,
        "grid": args.grid,
        "gamma": args.gamma,
        "seed": args.seed,
    });
    let report = run_study(&scenario, &variants, args.replicates, args.seed, &study)?;
    let mut body = Vec::new();
    report.write_csv(&mut body)?;
    let head = envelope(&config);
    write_atomic(&args.out, "simreport.csv", &csv_with_header(&head, body)?)?;

    let mut doc = envelope(&config);
    doc.insert("scenario".into(), serde_json::to_value(&scenario)?);
    doc.insert("summaries".into(), serde_json::to_value(&report.summaries)?);
    write_atomic(&args.out, "summary.json", &json_bytes(&doc)?)
}
