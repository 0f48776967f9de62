//! One function per subcommand: wire the resolved config into the library,
//! write artifacts under the output directory, and return the stdout summary.

use std::fs;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use facephq::annotations::{
    agreement_report, distribution_report, parse_annotation_file, AgreementReport,
    Characteristic, DistributionReport,
};
use facephq::dataset::Dataset;
use facephq::error::Error;
use facephq::eval::{
    ablation_study, bias_report, explain_experiment, make_subject_folds, run_experiment,
    ExperimentSpec, MetricsReport, ModelKind, SplitPlan, SubgroupAxis,
};
use facephq::ingest::{attention_filter, load_dataset, parse_ema_file, IngestReport, ParseMode};
use facephq::manifest::{sha256_file, RunManifest};
use facephq::models::Task;
use facephq::psychometrics::{reliability_report, ReliabilityReport};
use facephq::synth::{generate_cohort, oracle_metrics, TruthFile};
use facephq::table::{fmt_mean_std, fmt_opt, Table};

use crate::config::RunConfig;

/// Errors split by phase: configuration problems exit 1, the library's data
/// errors exit 2, everything else (numerics, i/o mid-run) exits 3.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_data_error() => 2,
            CliError::Core(_) => 3,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Usage(msg) => msg.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn usage(e: Error) -> CliError {
    CliError::Usage(e.to_string())
}

/// Resolve a required input path: present in the config (or flags) and
/// existing on disk.
fn require_input(path: &Option<PathBuf>, key: &str) -> CliResult<PathBuf> {
    match path {
        Some(p) if p.exists() => Ok(p.clone()),
        Some(p) => Err(CliError::Usage(format!(
            "inputs.{key}: {} does not exist",
            p.display()
        ))),
        None => Err(CliError::Usage(format!(
            "inputs.{key} is required for this command; set it in the config file or pass --{key}"
        ))),
    }
}

fn ensure_out_dir(cfg: &RunConfig) -> CliResult<PathBuf> {
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::Usage(format!("cannot create output dir {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    fs::write(dir.join(name), text + "\n").map_err(Error::from)?;
    Ok(())
}

fn write_text(dir: &Path, name: &str, text: &str) -> CliResult<()> {
    fs::write(dir.join(name), text).map_err(Error::from)?;
    Ok(())
}

struct LoadedData {
    dataset: Dataset,
    report: IngestReport,
    paths: [PathBuf; 3],
}

fn load_inputs(cfg: &RunConfig) -> CliResult<LoadedData> {
    let ema = require_input(&cfg.inputs.ema, "ema")?;
    let features = require_input(&cfg.inputs.features, "features")?;
    let demographics = require_input(&cfg.inputs.demographics, "demographics")?;
    let (dataset, report) = load_dataset(
        &ema,
        &features,
        &demographics,
        cfg.ingest.tolerance,
        cfg.ingest.threshold,
        cfg.ingest.strict,
    )?;
    Ok(LoadedData {
        dataset,
        report,
        paths: [ema, features, demographics],
    })
}

fn new_manifest(command: &str, cfg: &RunConfig) -> CliResult<RunManifest> {
    Ok(RunManifest::new(command, cfg)?)
}

fn add_inputs(manifest: &mut RunManifest, paths: &[PathBuf]) -> CliResult<()> {
    for p in paths {
        manifest.add_input(p)?;
    }
    Ok(())
}

fn split_plan(cfg: &RunConfig, dataset: &Dataset) -> CliResult<SplitPlan> {
    let participants: Vec<String> = dataset
        .participant_rows()
        .keys()
        .map(|s| s.to_string())
        .collect();
    make_subject_folds(&participants, cfg.split.folds, cfg.split.seed).map_err(usage)
}

fn experiment_spec(cfg: &RunConfig) -> CliResult<ExperimentSpec> {
    cfg.experiment_spec().map_err(usage)
}

fn metric_block(report: &MetricsReport) -> Value {
    json!({
        "balanced_accuracy": { "mean": report.balanced_accuracy.mean, "std": report.balanced_accuracy.std, "missing": report.balanced_accuracy.missing },
        "mcc": { "mean": report.mcc.mean, "std": report.mcc.std, "missing": report.mcc.missing },
        "mae": { "mean": report.mae.mean, "std": report.mae.std, "missing": report.mae.missing },
        "r_squared": { "mean": report.r_squared.mean, "std": report.r_squared.std, "missing": report.r_squared.missing },
    })
}

/// Per-fold metric table plus mean/std/missing footer rows.
fn metrics_table(report: &MetricsReport, folds: &[facephq::eval::FoldReport]) -> Table {
    let mut t = Table::new(vec![
        "fold", "n_train", "n_test", "participants", "features", "ba", "mcc", "mae", "r2",
    ]);
    for f in folds {
        t.push_row(vec![
            f.fold.to_string(),
            f.n_train.to_string(),
            f.n_test.to_string(),
            f.test_participants.to_string(),
            f.n_features_used.to_string(),
            fmt_opt(f.balanced_accuracy, 4),
            fmt_opt(f.mcc, 4),
            fmt_opt(f.mae, 4),
            fmt_opt(f.r_squared, 4),
        ]);
    }
    t.push_row(vec![
        "mean".to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        fmt_opt(report.balanced_accuracy.mean, 4),
        fmt_opt(report.mcc.mean, 4),
        fmt_opt(report.mae.mean, 4),
        fmt_opt(report.r_squared.mean, 4),
    ]);
    t.push_row(vec![
        "std".to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        fmt_opt(report.balanced_accuracy.std, 4),
        fmt_opt(report.mcc.std, 4),
        fmt_opt(report.mae.std, 4),
        fmt_opt(report.r_squared.std, 4),
    ]);
    t
}

#[derive(Serialize)]
struct IngestArtifact {
    n_samples: usize,
    n_features: usize,
    n_participants: usize,
    n_depressed_samples: usize,
    dataset_hash: String,
    report: IngestReport,
    provenance: facephq::dataset::Provenance,
    reliability: Option<ReliabilityReport>,
    reliability_note: Option<String>,
}

pub fn ingest(cfg: &RunConfig) -> CliResult<Value> {
    let out = ensure_out_dir(cfg)?;
    let loaded = load_inputs(cfg)?;
    let dataset = &loaded.dataset;

    // Reliability runs on the surviving survey sessions, so re-parse the EMA
    // file (cheap next to the feature matrix) and filter the same way.
    let mode = if cfg.ingest.strict { ParseMode::Strict } else { ParseMode::Lenient };
    let reader = BufReader::new(File::open(&loaded.paths[0]).map_err(Error::from)?);
    let ema = parse_ema_file(reader, mode)?;
    let filtered = attention_filter(ema.records, cfg.ingest.tolerance)?;
    let (reliability, reliability_note) = match reliability_report(&filtered.kept) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let n_depressed = dataset.meta.iter().filter(|m| m.depressed).count();
    let artifact = IngestArtifact {
        n_samples: dataset.n_samples(),
        n_features: dataset.n_features(),
        n_participants: dataset.n_participants(),
        n_depressed_samples: n_depressed,
        dataset_hash: dataset.content_hash()?,
        report: loaded.report.clone(),
        provenance: dataset.provenance.clone(),
        reliability,
        reliability_note,
    };
    write_json(&out, "ingest_report.json", &artifact)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "row",
        "participant_id",
        "session_id",
        "image_id",
        "timestamp",
        "total_score",
        "depressed",
        "gender",
        "race",
        "age",
        "response_duration",
        "confidence",
        "success",
    ])
    .map_err(Error::from)?;
    for (i, m) in dataset.meta.iter().enumerate() {
        w.write_record([
            i.to_string(),
            m.participant_id.clone(),
            m.session_id.clone(),
            m.image_id.clone(),
            m.timestamp.to_string(),
            format!("{}", m.total_score),
            m.depressed.to_string(),
            m.gender.key().to_string(),
            m.race.key().to_string(),
            format!("{}", m.age),
            format!("{}", m.response_duration),
            format!("{}", m.confidence),
            m.success.to_string(),
        ])
        .map_err(Error::from)?;
    }
    let meta_csv = String::from_utf8(w.into_inner().map_err(|e| Error::Validation(e.to_string()))?)
        .map_err(|e| Error::Validation(e.to_string()))?;
    write_text(&out, "meta.csv", &meta_csv)?;

    let mut manifest = new_manifest("ingest", cfg)?;
    add_inputs(&mut manifest, &loaded.paths)?;
    manifest.add_output("ingest_report.json");
    manifest.add_output("meta.csv");
    let summary = json!({
        "command": "ingest",
        "n_samples": artifact.n_samples,
        "n_features": artifact.n_features,
        "n_participants": artifact.n_participants,
        "n_depressed_samples": artifact.n_depressed_samples,
        "ema_excluded": dataset.provenance.ema_excluded,
        "dataset_hash": artifact.dataset_hash,
        "cronbach_alpha": artifact.reliability.as_ref().map(|r| r.cronbach_alpha),
        "out_dir": out.display().to_string(),
    });
    manifest.set_summary(&summary)?;
    manifest.write(&out, "manifest.json")?;
    Ok(summary)
}

#[derive(Serialize)]
struct Check {
    name: String,
    passed: bool,
    detail: String,
}

fn check(checks: &mut Vec<Check>, name: &str, passed: bool, detail: String) {
    checks.push(Check {
        name: name.to_string(),
        passed,
        detail,
    });
}

pub fn validate(cfg: &RunConfig) -> CliResult<Value> {
    let out = ensure_out_dir(cfg)?;
    // Parse failures propagate as data errors (exit 2) with the parser's
    // message, e.g. the name of a missing registry column.
    let loaded = load_inputs(cfg)?;
    let dataset = &loaded.dataset;

    let mut checks: Vec<Check> = Vec::new();
    check(
        &mut checks,
        "files_parse",
        true,
        format!(
            "{} feature rows, {} ema rows, {} participants",
            dataset.provenance.feature_records,
            dataset.provenance.ema_total,
            dataset.n_participants()
        ),
    );
    let p = &dataset.provenance;
    check(
        &mut checks,
        "provenance_conserved",
        p.is_conserved(),
        format!(
            "{} joined + {} orphan + {} excluded + {} missing-demographics = {} rows",
            p.joined, p.orphan_images, p.excluded_session_images, p.missing_demographics_images,
            p.feature_records
        ),
    );
    let mislabeled = dataset
        .meta
        .iter()
        .filter(|m| m.depressed != (m.total_score >= dataset.depression_threshold))
        .count();
    check(
        &mut checks,
        "labels_consistent",
        mislabeled == 0,
        format!(
            "{mislabeled} rows disagree with threshold {}",
            dataset.depression_threshold
        ),
    );
    check(
        &mut checks,
        "nonempty",
        dataset.n_samples() > 0,
        format!("{} joined samples", dataset.n_samples()),
    );
    let bad_rows = loaded.report.ema_diagnostics.len() + loaded.report.feature_diagnostics.len();
    check(
        &mut checks,
        "row_diagnostics",
        true,
        format!("{bad_rows} rows skipped by lenient parsing"),
    );

    let mut annotation_count: Option<usize> = None;
    if cfg.inputs.annotations.is_some() {
        let path = require_input(&cfg.inputs.annotations, "annotations")?;
        let mode = if cfg.ingest.strict { ParseMode::Strict } else { ParseMode::Lenient };
        let reader = BufReader::new(File::open(&path).map_err(Error::from)?);
        let parsed = parse_annotation_file(reader, mode)?;
        annotation_count = Some(parsed.annotations.len());
        check(
            &mut checks,
            "annotations_parse",
            true,
            format!(
                "{} annotations, {} rows skipped",
                parsed.annotations.len(),
                parsed.diagnostics.len()
            ),
        );
    }

    let passed = checks.iter().all(|c| c.passed);
    let artifact = json!({
        "passed": passed,
        "checks": checks,
        "dataset_hash": dataset.content_hash()?,
        "annotations": annotation_count,
    });
    write_json(&out, "validation_report.json", &artifact)?;

    let mut manifest = new_manifest("validate", cfg)?;
    add_inputs(&mut manifest, &loaded.paths)?;
    if let Some(path) = &cfg.inputs.annotations {
        manifest.add_input(path)?;
    }
    manifest.add_output("validation_report.json");
    let summary = json!({
        "command": "validate",
        "passed": passed,
        "checks": checks.len(),
        "failed": checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect::<Vec<_>>(),
        "out_dir": out.display().to_string(),
    });
    manifest.set_summary(&summary)?;
    manifest.write(&out, "manifest.json")?;

    if !passed {
        let failed: Vec<&str> = checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        return Err(CliError::Core(Error::Validation(format!(
            "validation failed: {}",
            failed.join(", ")
        ))));
    }
    Ok(summary)
}

pub fn experiment(cfg: &RunConfig) -> CliResult<Value> {
    let out = ensure_out_dir(cfg)?;
    let spec = experiment_spec(cfg)?;
    let loaded = load_inputs(cfg)?;
    let plan = split_plan(cfg, &loaded.dataset)?;
    let outcome = run_experiment(&loaded.dataset, &spec, &plan)?;

    write_json(&out, "experiment_report.json", &outcome)?;
    let table = metrics_table(&outcome.report, &outcome.folds);
    write_text(&out, "metrics.csv", &table.to_csv()?)?;
    write_text(&out, "metrics.txt", &table.render())?;

    let mut manifest = new_manifest("experiment", cfg)?;
    add_inputs(&mut manifest, &loaded.paths)?;
    manifest.add_seed("split", cfg.split.seed);
    manifest.add_named_hash("dataset", outcome.dataset_hash.clone());
    manifest.add_output("experiment_report.json");
    manifest.add_output("metrics.csv");
    manifest.add_output("metrics.txt");
    let summary = json!({
        "command": "experiment",
        "model": spec.kind().key(),
        "features": spec.features.describe(),
        "n_folds": outcome.report.n_folds,
        "metrics": metric_block(&outcome.report),
        "warnings": outcome.report.warnings.len(),
        "dataset_hash": outcome.dataset_hash,
        "out_dir": out.display().to_string(),
    });
    manifest.set_summary(&summary)?;
    manifest.write(&out, "manifest.json")?;
    Ok(summary)
}

pub fn ablate(cfg: &RunConfig) -> CliResult<Value> {
    let out = ensure_out_dir(cfg)?;
    let spec = experiment_spec(cfg)?;
    if spec.kind() != ModelKind::RandomForest {
        return Err(CliError::Usage(format!(
            "ablate runs the random-forest pipeline per feature group; model.kind is {}",
            spec.kind().key()
        )));
    }
    let loaded = load_inputs(cfg)?;
    let plan = split_plan(cfg, &loaded.dataset)?;
    let report = ablation_study(&loaded.dataset, &spec, &plan)?;

    write_json(&out, "ablation_report.json", &report)?;
    let mut table = Table::new(vec![
        "group", "features", "ba", "mcc", "mae", "r2",
    ]);
    for row in &report.rows {
        let m = &row.metrics;
        table.push_row(vec![
            row.label.clone(),
            row.n_features.to_string(),
            fmt_mean_std(m.balanced_accuracy.mean, m.balanced_accuracy.std, 4),
            fmt_mean_std(m.mcc.mean, m.mcc.std, 4),
            fmt_mean_std(m.mae.mean, m.mae.std, 4),
            fmt_mean_std(m.r_squared.mean, m.r_squared.std, 4),
        ]);
    }
    write_text(&out, "ablation.csv", &table.to_csv()?)?;
    write_text(&out, "ablation.txt", &table.render())?;

    let mut manifest = new_manifest("ablate", cfg)?;
    add_inputs(&mut manifest, &loaded.paths)?;
    manifest.add_seed("split", cfg.split.seed);
    manifest.add_output("ablation_report.json");
    manifest.add_output("ablation.csv");
    manifest.add_output("ablation.txt");
    let summary = json!({
        "command": "ablate",
        "rows": report.rows.iter().map(|r| json!({
            "group": r.set.key(),
            "n_features": r.n_features,
            "balanced_accuracy": r.metrics.balanced_accuracy.mean,
            "mae": r.metrics.mae.mean,
        })).collect::<Vec<_>>(),
        "best_balanced_accuracy": report.best_balanced_accuracy.map(|s| s.key()),
        "lowest_mae": report.lowest_mae.map(|s| s.key()),
        "out_dir": out.display().to_string(),
    });
    manifest.set_summary(&summary)?;
    manifest.write(&out, "manifest.json")?;
    Ok(summary)
}

pub fn explain(cfg: &RunConfig) -> CliResult<Value> {
    let out = ensure_out_dir(cfg)?;
    let spec = experiment_spec(cfg)?;
    if spec.kind() != ModelKind::RandomForest {
        return Err(CliError::Usage(format!(
            "explain requires model.kind random_forest (TreeSHAP explains trees); got {}",
            spec.kind().key()
        )));
    }
    let task = Task::parse(&cfg.explain.task).map_err(usage)?;
    if cfg.explain.fold >= cfg.split.folds {
        return Err(CliError::Usage(format!(
            "explain.fold {} out of range for split.folds {}",
            cfg.explain.fold, cfg.split.folds
        )));
    }
    let loaded = load_inputs(cfg)?;
    let plan = split_plan(cfg, &loaded.dataset)?;
    let outcome = explain_experiment(
        &loaded.dataset,
        &spec,
        &plan,
        cfg.explain.fold,
        task,
        cfg.explain.max_samples,
        cfg.explain.top_k,
    )?;

    write_json(&out, "explain_report.json", &outcome)?;

    let mut ranking = Table::new(vec!["rank", "feature", "mean_abs_phi", "direction"]);
    for (i, e) in outcome.report.entries.iter().enumerate() {
        ranking.push_row(vec![
            (i + 1).to_string(),
            e.name.clone(),
            format!("{:.6}", e.score),
            match e.direction {
                1 => "+".to_string(),
                -1 => "-".to_string(),
                _ => "0".to_string(),
            },
        ]);
    }
    write_text(&out, "importance.csv", &ranking.to_csv()?)?;
    write_text(&out, "importance.txt", &ranking.render())?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["sample_id".to_string(), "base_value".to_string(), "prediction".to_string()];
    header.extend(outcome.feature_names.iter().cloned());
    w.write_record(&header).map_err(Error::from)?;
    for (id, a) in outcome.sample_ids.iter().zip(&outcome.attributions) {
        let mut record = vec![id.clone(), format!("{}", a.base_value), format!("{}", a.prediction)];
        record.extend(a.phi.iter().map(|v| format!("{v}")));
        w.write_record(&record).map_err(Error::from)?;
    }
    let attributions_csv =
        String::from_utf8(w.into_inner().map_err(|e| Error::Validation(e.to_string()))?)
            .map_err(|e| Error::Validation(e.to_string()))?;
    write_text(&out, "attributions.csv", &attributions_csv)?;

    let mut manifest = new_manifest("explain", cfg)?;
    add_inputs(&mut manifest, &loaded.paths)?;
    manifest.add_seed("split", cfg.split.seed);
    manifest.add_named_hash("model", outcome.provenance.model_hash.clone());
    manifest.add_output("explain_report.json");
    manifest.add_output("importance.csv");
    manifest.add_output("importance.txt");
    manifest.add_output("attributions.csv");
    let summary = json!({
        "command": "explain",
        "fold": outcome.fold,
        "task": outcome.task.key(),
        "n_samples": outcome.report.n_samples,
        "degenerate": outcome.report.degenerate,
        "top": outcome.report.entries.iter().map(|e| json!({
            "name": e.name,
            "score": e.score,
            "direction": e.direction,
        })).collect::<Vec<_>>(),
        "out_dir": out.display().to_string(),
    });
    manifest.set_summary(&summary)?;
    manifest.write(&out, "manifest.json")?;
    Ok(summary)
}

pub fn bias(cfg: &RunConfig) -> CliResult<Value> {
    let out = ensure_out_dir(cfg)?;
    let spec = experiment_spec(cfg)?;
    let axis = SubgroupAxis::parse(&cfg.bias.axis).map_err(usage)?;
    let loaded = load_inputs(cfg)?;
    let plan = split_plan(cfg, &loaded.dataset)?;
    let report = bias_report(&loaded.dataset, &spec, &plan, axis)?;

    write_json(&out, "bias_report.json", &report)?;
    let mut table = Table::new(vec![
        "group", "samples", "participants", "ba", "mcc", "mae", "r2",
    ]);
    for g in &report.groups {
        let m = &g.metrics;
        table.push_row(vec![
            g.name.clone(),
            g.n_samples.to_string(),
            g.n_participants.to_string(),
            fmt_mean_std(m.balanced_accuracy.mean, m.balanced_accuracy.std, 4),
            fmt_mean_std(m.mcc.mean, m.mcc.std, 4),
            fmt_mean_std(m.mae.mean, m.mae.std, 4),
            fmt_mean_std(m.r_squared.mean, m.r_squared.std, 4),
        ]);
    }
    write_text(&out, "bias.csv", &table.to_csv()?)?;
    write_text(&out, "bias.txt", &table.render())?;

    let mut manifest = new_manifest("bias", cfg)?;
    add_inputs(&mut manifest, &loaded.paths)?;
    manifest.add_seed("split", cfg.split.seed);
    manifest.add_output("bias_report.json");
    manifest.add_output("bias.csv");
    manifest.add_output("bias.txt");
    let summary = json!({
        "command": "bias",
        "axis": axis.key(),
        "groups": report.groups.iter().map(|g| json!({
            "name": g.name,
            "n_samples": g.n_samples,
            "n_participants": g.n_participants,
            "metrics": metric_block(&g.metrics),
        })).collect::<Vec<_>>(),
        "out_dir": out.display().to_string(),
    });
    manifest.set_summary(&summary)?;
    manifest.write(&out, "manifest.json")?;
    Ok(summary)
}

#[derive(Serialize)]
struct AnnotationsArtifact {
    distributions: Vec<DistributionReport>,
    agreements: Vec<AgreementReport>,
    skipped: Vec<String>,
}

pub fn annotations(cfg: &RunConfig) -> CliResult<Value> {
    let out = ensure_out_dir(cfg)?;
    let path = require_input(&cfg.inputs.annotations, "annotations")?;
    let mode = if cfg.ingest.strict { ParseMode::Strict } else { ParseMode::Lenient };
    let reader = BufReader::new(File::open(&path).map_err(Error::from)?);
    let parsed = parse_annotation_file(reader, mode)?;

    let mut distributions = Vec::new();
    let mut agreements = Vec::new();
    let mut skipped = Vec::new();
    for characteristic in Characteristic::ALL {
        match distribution_report(&parsed.annotations, characteristic) {
            Ok(d) => distributions.push(d),
            Err(e) => skipped.push(format!("distribution {}: {e}", characteristic.key())),
        }
        match agreement_report(&parsed.annotations, characteristic) {
            Ok(a) => agreements.push(a),
            Err(e) => skipped.push(format!("agreement {}: {e}", characteristic.key())),
        }
    }
    if distributions.is_empty() && agreements.is_empty() {
        return Err(CliError::Core(Error::Validation(format!(
            "no usable annotations in {}",
            path.display()
        ))));
    }

    let artifact = AnnotationsArtifact {
        distributions,
        agreements,
        skipped,
    };
    write_json(&out, "annotations_report.json", &artifact)?;

    let mut dist_table = Table::new(vec![
        "characteristic", "label", "count", "percentage", "out_of_vocabulary",
    ]);
    for d in &artifact.distributions {
        for row in &d.rows {
            dist_table.push_row(vec![
                d.characteristic.key().to_string(),
                row.label.clone(),
                row.count.to_string(),
                format!("{:.2}", row.percentage),
                row.out_of_vocabulary.to_string(),
            ]);
        }
    }
    write_text(&out, "distributions.csv", &dist_table.to_csv()?)?;

    let mut agree_table = Table::new(vec![
        "characteristic", "images", "kappa", "degenerate", "vqa_accuracy",
    ]);
    for a in &artifact.agreements {
        agree_table.push_row(vec![
            a.characteristic.key().to_string(),
            a.n_images.to_string(),
            format!("{:.4}", a.kappa),
            a.kappa_degenerate.to_string(),
            format!("{:.4}", a.vqa_accuracy),
        ]);
    }
    write_text(&out, "agreement.csv", &agree_table.to_csv()?)?;
    let rendered = format!(
        "Label distributions (VQA)\n{}\nHuman agreement and VQA accuracy\n{}",
        dist_table.render(),
        agree_table.render()
    );
    write_text(&out, "annotations.txt", &rendered)?;

    let mut manifest = new_manifest("annotations", cfg)?;
    manifest.add_input(&path)?;
    manifest.add_output("annotations_report.json");
    manifest.add_output("distributions.csv");
    manifest.add_output("agreement.csv");
    manifest.add_output("annotations.txt");
    let summary = json!({
        "command": "annotations",
        "n_annotations": parsed.annotations.len(),
        "characteristics": artifact.distributions.iter().map(|d| d.characteristic.key()).collect::<Vec<_>>(),
        "kappa": artifact.agreements.iter().map(|a| json!({
            "characteristic": a.characteristic.key(),
            "kappa": a.kappa,
            "vqa_accuracy": a.vqa_accuracy,
        })).collect::<Vec<_>>(),
        "skipped": artifact.skipped,
        "out_dir": out.display().to_string(),
    });
    manifest.set_summary(&summary)?;
    manifest.write(&out, "manifest.json")?;
    Ok(summary)
}

pub fn synth(cfg: &RunConfig) -> CliResult<Value> {
    let out = ensure_out_dir(cfg)?;
    cfg.synth.validate().map_err(usage)?;
    let files = generate_cohort(&cfg.synth, &out)?;
    let truth = TruthFile::load(&files.truth)?;
    let oracle = oracle_metrics(&truth, &cfg.synth)?;
    write_json(&out, "oracle.json", &oracle)?;

    let mut manifest = new_manifest("synth", cfg)?;
    manifest.add_seed("synth", cfg.synth.seed);
    for (name, path) in [
        ("ema.csv", &files.ema),
        ("features.csv", &files.features),
        ("demographics.csv", &files.demographics),
        ("truth.json", &files.truth),
    ] {
        manifest.add_named_hash(name, sha256_file(path)?);
        manifest.add_output(name);
    }
    manifest.add_output("oracle.json");
    let summary = json!({
        "command": "synth",
        "n_participants": cfg.synth.n_participants,
        "n_sessions": oracle.n_sessions,
        "n_depressed": oracle.n_depressed,
        "oracle": {
            "balanced_accuracy": oracle.balanced_accuracy,
            "mae": oracle.mae,
            "predictor": oracle.predictor,
        },
        "out_dir": out.display().to_string(),
    });
    manifest.set_summary(&summary)?;
    manifest.write(&out, "manifest.json")?;
    Ok(summary)
}

/// Render whatever artifacts previous runs left in the output directory, and
/// print the centralized defaults.
pub fn report(cfg: &RunConfig) -> CliResult<Value> {
    let out = ensure_out_dir(cfg)?;
    let mut sections: Vec<String> = Vec::new();
    let mut found: Vec<String> = Vec::new();
    let mut manifest = new_manifest("report", cfg)?;

    let read_artifact = |name: &str| -> CliResult<Option<Value>> {
        let path = out.join(name);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(Error::from)?;
        let value: Value = serde_json::from_str(&text).map_err(Error::from)?;
        Ok(Some(value))
    };

    if let Some(v) = read_artifact("ingest_report.json")? {
        found.push("ingest_report.json".into());
        sections.push(format!(
            "Ingest: {} samples x {} features, {} participants, {} depressed, dataset {}",
            v["n_samples"], v["n_features"], v["n_participants"], v["n_depressed_samples"],
            v["dataset_hash"].as_str().unwrap_or("?"),
        ));
    }
    if let Some(v) = read_artifact("validation_report.json")? {
        found.push("validation_report.json".into());
        sections.push(format!("Validation passed: {}", v["passed"]));
    }
    if let Some(v) = read_artifact("oracle.json")? {
        found.push("oracle.json".into());
        sections.push(format!(
            "Synthetic oracle: predictor {}, balanced accuracy {}, mae {}",
            v["predictor"], v["balanced_accuracy"], v["mae"]
        ));
    }
    if out.join("metrics.txt").exists() {
        found.push("metrics.txt".into());
        let text = fs::read_to_string(out.join("metrics.txt")).map_err(Error::from)?;
        sections.push(format!("Experiment metrics\n{text}"));
    }
    if out.join("ablation.txt").exists() {
        found.push("ablation.txt".into());
        let text = fs::read_to_string(out.join("ablation.txt")).map_err(Error::from)?;
        sections.push(format!("Ablation\n{text}"));
    }
    if out.join("bias.txt").exists() {
        found.push("bias.txt".into());
        let text = fs::read_to_string(out.join("bias.txt")).map_err(Error::from)?;
        sections.push(format!("Subgroup metrics\n{text}"));
    }
    if out.join("importance.txt").exists() {
        found.push("importance.txt".into());
        let text = fs::read_to_string(out.join("importance.txt")).map_err(Error::from)?;
        sections.push(format!("Feature importance\n{text}"));
    }
    if out.join("annotations.txt").exists() {
        found.push("annotations.txt".into());
        let text = fs::read_to_string(out.join("annotations.txt")).map_err(Error::from)?;
        sections.push(text);
    }

    let defaults = RunConfig::default();
    let defaults_toml = toml::to_string_pretty(&defaults)
        .map_err(|e| CliError::Core(Error::Validation(e.to_string())))?;
    sections.push(format!("Defaults\n{defaults_toml}"));
    let rendered = sections.join("\n\n") + "\n";
    write_text(&out, "report.txt", &rendered)?;

    for name in &found {
        if name.ends_with(".json") {
            manifest.add_input(&out.join(name))?;
        }
    }
    manifest.add_output("report.txt");
    let summary = json!({
        "command": "report",
        "found": found,
        "defaults": serde_json::to_value(&defaults).map_err(Error::from)?,
        "out_dir": out.display().to_string(),
    });
    manifest.set_summary(&summary)?;
    manifest.write(&out, "report_manifest.json")?;
    Ok(summary)
}
