//! Experiment orchestration: the per-fold train/evaluate pipeline plus the
//! ablation and subgroup-bias studies built on top of it.
//!
//! Per fold, everything that learns from data — standardization, feature
//! selection, hyperparameter tuning, the model itself — sees training
//! participants only. Held-out rows contribute nothing but predictions.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::metrics::{balanced_accuracy, mae, mcc, r_squared, ConfusionMatrix};
use crate::eval::splits::SplitPlan;
use crate::eval::tuning::{nested_tune, TuneProblem};
use crate::explain::{recompute_covers, top_k_report, tree_shap_batch, Attribution, ImportanceReport};
use crate::features::{
    apply_scaler, fit_scaler, mi_scores_opts, quartile_bin_labels, select_fraction, SelectionMode,
};
use crate::matrix::Matrix;
use crate::models::{
    derive_seed, fit_elastic_net, fit_logistic, fit_random_forest, labels_from_proba, AnyModel,
    ElasticNetConfig, ForestParams, LogisticConfig, Task,
};
use crate::registry::{FeatureRegistry, FeatureSet};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    RandomForest,
    Logistic,
    ElasticNet,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rf" | "forest" | "random_forest" => Ok(ModelKind::RandomForest),
            "logistic" | "logreg" => Ok(ModelKind::Logistic),
            "elastic_net" | "enet" | "elasticnet" => Ok(ModelKind::ElasticNet),
            other => Err(Error::InvalidArgument(format!(
                "unknown model `{other}` (expected random_forest|logistic|elastic_net)"
            ))),
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            ModelKind::RandomForest => "random_forest",
            ModelKind::Logistic => "logistic",
            ModelKind::ElasticNet => "elastic_net",
        }
    }

    /// Which prediction tasks the model family covers. Forests handle both;
    /// the linear models are task-specific.
    pub fn tasks(self) -> &'static [Task] {
        match self {
            ModelKind::RandomForest => &[Task::Classify, Task::Regress],
            ModelKind::Logistic => &[Task::Classify],
            ModelKind::ElasticNet => &[Task::Regress],
        }
    }
}

/// One fully specified model configuration — a grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelConfig {
    RandomForest(ForestParams),
    Logistic(LogisticConfig<f64>),
    ElasticNet(ElasticNetConfig<f64>),
}

impl ModelConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::RandomForest(_) => ModelKind::RandomForest,
            ModelConfig::Logistic(_) => ModelKind::Logistic,
            ModelConfig::ElasticNet(_) => ModelKind::ElasticNet,
        }
    }

    pub fn default_for(kind: ModelKind) -> ModelConfig {
        match kind {
            ModelKind::RandomForest => ModelConfig::RandomForest(ForestParams::default()),
            ModelKind::Logistic => ModelConfig::Logistic(LogisticConfig::default()),
            ModelKind::ElasticNet => ModelConfig::ElasticNet(ElasticNetConfig::default()),
        }
    }

    pub fn check_task(&self, task: Task) -> Result<()> {
        if self.kind().tasks().contains(&task) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "{} cannot run task {}",
                self.kind().key(),
                task.key()
            )))
        }
    }
}

/// Train one configuration. Classification consumes `y_class`, regression
/// `y_score`; the unused slice may be empty.
pub fn fit_config(
    config: &ModelConfig,
    task: Task,
    x: &Matrix<f64>,
    y_class: &[bool],
    y_score: &[f64],
    seed: u64,
) -> Result<AnyModel<f64>> {
    config.check_task(task)?;
    match config {
        ModelConfig::RandomForest(params) => {
            let y: Vec<f64> = match task {
                Task::Classify => y_class.iter().map(|&b| f64::from(u8::from(b))).collect(),
                Task::Regress => y_score.to_vec(),
            };
            Ok(AnyModel::RandomForest(fit_random_forest(x, &y, task, params, seed)?))
        }
        ModelConfig::Logistic(cfg) => {
            let y: Vec<f64> = y_class.iter().map(|&b| f64::from(u8::from(b))).collect();
            Ok(AnyModel::Logistic(fit_logistic(x, &y, cfg)?))
        }
        ModelConfig::ElasticNet(cfg) => {
            Ok(AnyModel::ElasticNet(fit_elastic_net(x, y_score, cfg)?))
        }
    }
}

/// How the per-fold design matrix is assembled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSpec {
    /// Every trainable feature column.
    All,
    /// One registry group (matched by column name, so pre-projected datasets
    /// still work).
    Group { set: FeatureSet },
    /// Mutual-information selection fitted on the training rows.
    MutualInfo {
        mode: SelectionMode,
        fraction: f64,
        bins: usize,
    },
    /// The demographic baseline: gender code, age, and survey duration.
    Baseline,
}

impl FeatureSpec {
    pub fn describe(&self) -> String {
        match self {
            FeatureSpec::All => "all".into(),
            FeatureSpec::Group { set } => format!("group:{}", set.key()),
            FeatureSpec::MutualInfo { mode, fraction, bins } => {
                format!("mi:{}:{fraction}:{bins}", mode.key())
            }
            FeatureSpec::Baseline => "baseline".into(),
        }
    }
}

pub const DEFAULT_MI_BINS: usize = 10;
pub const DEFAULT_INNER_K: usize = 3;

/// A full experiment description: model, optional tuning grid, features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Model fitted when `grid` is empty; also fixes the model family.
    pub config: ModelConfig,
    /// Tuning candidates (same family). Empty = no inner search.
    pub grid: Vec<ModelConfig>,
    pub features: FeatureSpec,
    pub inner_k: usize,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn new(config: ModelConfig, features: FeatureSpec, seed: u64) -> Self {
        Self {
            config,
            grid: Vec::new(),
            features,
            inner_k: DEFAULT_INNER_K,
            seed,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind()
    }

    fn validate(&self) -> Result<()> {
        for entry in &self.grid {
            if entry.kind() != self.kind() {
                return Err(Error::InvalidArgument(format!(
                    "grid entry of kind {} under a {} spec",
                    entry.kind().key(),
                    self.kind().key()
                )));
            }
        }
        if let FeatureSpec::MutualInfo { fraction, bins, .. } = self.features {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "mi fraction {fraction} outside (0,1]"
                )));
            }
            if bins < 2 {
                return Err(Error::InvalidArgument(format!("mi bins {bins} < 2")));
            }
        }
        Ok(())
    }
}

/// Per-fold values of one metric plus their summary. Mean and std run over
/// the folds where the metric is defined; `missing` counts the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub per_fold: Vec<Option<f64>>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub missing: usize,
}

impl MetricSummary {
    pub fn from_folds(per_fold: Vec<Option<f64>>) -> Self {
        let available: Vec<f64> = per_fold.iter().flatten().copied().collect();
        let missing = per_fold.len() - available.len();
        let mean = (!available.is_empty())
            .then(|| available.iter().sum::<f64>() / available.len() as f64);
        let std = (available.len() >= 2).then(|| stats::sample_std(&available));
        Self {
            per_fold,
            mean,
            std,
            missing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub balanced_accuracy: MetricSummary,
    pub mcc: MetricSummary,
    pub mae: MetricSummary,
    pub r_squared: MetricSummary,
    pub n_folds: usize,
    pub warnings: Vec<String>,
}

/// Fitted-model provenance for one fold/task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskProvenance {
    pub task: Task,
    pub seed: u64,
    pub chosen: ModelConfig,
    pub tuned: bool,
    /// SHA-256 of the serialized model.
    pub model_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub test_participants: usize,
    pub n_features_used: usize,
    /// Names chosen by MI selection; None when selection is static.
    pub selected_features: Option<Vec<String>>,
    pub balanced_accuracy: Option<f64>,
    pub mcc: Option<f64>,
    pub mcc_zero_denominator: Option<bool>,
    pub mae: Option<f64>,
    pub r_squared: Option<f64>,
    pub classify: Option<TaskProvenance>,
    pub regress: Option<TaskProvenance>,
    pub warnings: Vec<String>,
}

impl FoldReport {
    fn empty(fold: usize) -> Self {
        Self {
            fold,
            n_train: 0,
            n_test: 0,
            test_participants: 0,
            n_features_used: 0,
            selected_features: None,
            balanced_accuracy: None,
            mcc: None,
            mcc_zero_denominator: None,
            mae: None,
            r_squared: None,
            classify: None,
            regress: None,
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub report: MetricsReport,
    pub folds: Vec<FoldReport>,
    pub dataset_hash: String,
    pub spec: ExperimentSpec,
    pub split_seed: u64,
}

/// Row indices of one outer fold: (train, test), both in dataset order.
fn fold_row_split(dataset: &Dataset, plan: &SplitPlan, fold: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if fold >= plan.k() {
        return Err(Error::InvalidArgument(format!(
            "fold {fold} out of range for k={}",
            plan.k()
        )));
    }
    let test_pids: BTreeSet<&str> = plan.folds[fold].iter().map(String::as_str).collect();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (row, meta) in dataset.meta.iter().enumerate() {
        if test_pids.contains(meta.participant_id.as_str()) {
            test.push(row);
        } else {
            train.push(row);
        }
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::Validation(format!(
            "fold {fold} leaves an empty split ({} train rows, {} test rows)",
            train.len(),
            test.len()
        )));
    }
    Ok((train, test))
}

struct Design {
    x_train: Matrix<f64>,
    x_test: Matrix<f64>,
    names: Vec<String>,
    /// Set only when MI selection ran.
    selected: Option<Vec<String>>,
}

fn baseline_matrix(dataset: &Dataset, rows: &[usize]) -> Matrix<f64> {
    let data: Vec<f64> = rows
        .iter()
        .flat_map(|&r| {
            let m = &dataset.meta[r];
            [m.gender.encoded(), m.age, m.response_duration]
        })
        .collect();
    Matrix::from_vec(rows.len(), 3, data).expect("baseline shape")
}

fn build_design(
    dataset: &Dataset,
    features: &FeatureSpec,
    train_rows: &[usize],
    test_rows: &[usize],
    task: Task,
) -> Result<Design> {
    let (raw_train, raw_test, names, selected) = match features {
        FeatureSpec::Baseline => (
            baseline_matrix(dataset, train_rows),
            baseline_matrix(dataset, test_rows),
            vec!["gender_code".to_string(), "age".to_string(), "ema_duration_s".to_string()],
            None,
        ),
        FeatureSpec::All => (
            dataset.features.select_rows(train_rows),
            dataset.features.select_rows(test_rows),
            dataset.feature_names.clone(),
            None,
        ),
        FeatureSpec::Group { set } => {
            let registry = FeatureRegistry::standard();
            let cols: Vec<usize> = dataset
                .feature_names
                .iter()
                .enumerate()
                .filter(|(_, name)| {
                    registry
                        .index_of(name)
                        .is_some_and(|ri| registry.group_of(ri) == *set)
                })
                .map(|(i, _)| i)
                .collect();
            if cols.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "dataset has no columns from group {}",
                    set.key()
                )));
            }
            let names: Vec<String> = cols.iter().map(|&c| dataset.feature_names[c].clone()).collect();
            (
                dataset.features.select_rows(train_rows).select_columns(&cols),
                dataset.features.select_rows(test_rows).select_columns(&cols),
                names,
                None,
            )
        }
        FeatureSpec::MutualInfo { mode, fraction, bins } => {
            let x_train_full = dataset.features.select_rows(train_rows);
            let label_bins: Vec<u32> = match task {
                Task::Classify => train_rows
                    .iter()
                    .map(|&r| u32::from(dataset.meta[r].depressed))
                    .collect(),
                Task::Regress => {
                    let scores: Vec<f64> =
                        train_rows.iter().map(|&r| dataset.meta[r].total_score).collect();
                    quartile_bin_labels(&scores)?
                }
            };
            let scores = mi_scores_opts(
                &x_train_full,
                &label_bins,
                &dataset.feature_names,
                *bins,
                *mode == SelectionMode::Independence,
            )?;
            let cols = select_fraction(&scores, *fraction, *mode)?;
            let names: Vec<String> = cols.iter().map(|&c| dataset.feature_names[c].clone()).collect();
            let x_train = x_train_full.select_columns(&cols);
            drop(x_train_full);
            let x_test = dataset.features.select_rows(test_rows).select_columns(&cols);
            (x_train, x_test, names.clone(), Some(names))
        }
    };

    let scaler = fit_scaler(&raw_train)?;
    let x_train = apply_scaler(&scaler, &raw_train)?;
    drop(raw_train);
    let x_test = apply_scaler(&scaler, &raw_test)?;
    Ok(Design {
        x_train,
        x_test,
        names,
        selected,
    })
}

struct FittedTask {
    model: AnyModel<f64>,
    predictions: Vec<f64>,
    design: Design,
    provenance: TaskProvenance,
    warnings: Vec<String>,
}

fn model_hash(model: &AnyModel<f64>) -> Result<String> {
    let bytes = serde_json::to_vec(model)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

fn fit_fold_task(
    dataset: &Dataset,
    spec: &ExperimentSpec,
    train_rows: &[usize],
    test_rows: &[usize],
    fold: usize,
    task: Task,
) -> Result<FittedTask> {
    let design = build_design(dataset, &spec.features, train_rows, test_rows, task)?;
    let y_class: Vec<bool> = train_rows.iter().map(|&r| dataset.meta[r].depressed).collect();
    let y_score: Vec<f64> = train_rows.iter().map(|&r| dataset.meta[r].total_score).collect();
    let task_idx = match task {
        Task::Classify => 0u64,
        Task::Regress => 1u64,
    };
    let mut warnings = Vec::new();

    let (chosen, tuned) = if spec.grid.is_empty() {
        (spec.config.clone(), false)
    } else {
        let participants: Vec<String> = train_rows
            .iter()
            .map(|&r| dataset.meta[r].participant_id.clone())
            .collect();
        let problem = TuneProblem {
            x: &design.x_train,
            y_class: &y_class,
            y_score: &y_score,
            participants: &participants,
            task,
            seed: derive_seed(spec.seed, 0x2000 + fold as u64 * 2 + task_idx),
        };
        let outcome = nested_tune(&problem, &spec.grid, spec.inner_k)?;
        warnings.extend(
            outcome
                .warnings
                .iter()
                .map(|w| format!("fold {fold} {} tuning: {w}", task.key())),
        );
        (outcome.best, true)
    };

    let seed = derive_seed(spec.seed, 0x1000 + fold as u64 * 2 + task_idx);
    let model = fit_config(&chosen, task, &design.x_train, &y_class, &y_score, seed)?;
    let predictions = model.predict(&design.x_test)?;
    let provenance = TaskProvenance {
        task,
        seed,
        chosen,
        tuned,
        model_hash: model_hash(&model)?,
    };
    Ok(FittedTask {
        model,
        predictions,
        design,
        provenance,
        warnings,
    })
}

fn single_class(labels: &[bool]) -> bool {
    labels.iter().all(|&b| b) || labels.iter().all(|&b| !b)
}

/// Classification metrics on an evaluation subset. Single-class ground truth
/// marks both metrics missing rather than scoring them.
fn classify_metrics(
    y_true: &[bool],
    proba: &[f64],
    context: &str,
    warnings: &mut Vec<String>,
) -> (Option<f64>, Option<f64>, Option<bool>) {
    if y_true.is_empty() {
        warnings.push(format!("{context}: no samples, classification metrics missing"));
        return (None, None, None);
    }
    if single_class(y_true) {
        warnings.push(format!(
            "{context}: single-class ground truth, balanced accuracy and MCC missing"
        ));
        return (None, None, None);
    }
    let cm = ConfusionMatrix::from_labels(y_true, &labels_from_proba(proba))
        .expect("aligned label vectors");
    let ba = balanced_accuracy::<f64>(&cm).expect("both classes present");
    let m = mcc::<f64>(&cm);
    (Some(ba), Some(m.value), Some(m.zero_denominator))
}

/// Regression metrics on an evaluation subset. Zero-variance truth leaves
/// R² missing; MAE is defined for any nonempty subset.
fn regress_metrics(
    y_true: &[f64],
    pred: &[f64],
    context: &str,
    warnings: &mut Vec<String>,
) -> Result<(Option<f64>, Option<f64>)> {
    if y_true.is_empty() {
        warnings.push(format!("{context}: no samples, regression metrics missing"));
        return Ok((None, None));
    }
    let mae_v = mae(y_true, pred)?;
    let r2 = match r_squared(y_true, pred) {
        Ok(v) => Some(v),
        Err(Error::UndefinedStatistic(_)) | Err(Error::InvalidArgument(_)) => {
            warnings.push(format!("{context}: R² undefined on this subset"));
            None
        }
        Err(e) => return Err(e),
    };
    Ok((Some(mae_v), r2))
}

/// Run the full subject-disjoint pipeline and aggregate per-fold metrics.
pub fn run_experiment(
    dataset: &Dataset,
    spec: &ExperimentSpec,
    plan: &SplitPlan,
) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let participants: Vec<String> = dataset
        .participant_rows()
        .keys()
        .map(|s| s.to_string())
        .collect();
    plan.validate(&participants)?;

    let tasks = spec.kind().tasks();
    let mut folds = Vec::with_capacity(plan.k());
    for fold in 0..plan.k() {
        let (train_rows, test_rows) = fold_row_split(dataset, plan, fold)?;
        let mut fr = FoldReport::empty(fold);
        fr.n_train = train_rows.len();
        fr.n_test = test_rows.len();
        fr.test_participants = plan.folds[fold].len();

        for &task in tasks {
            let fitted = fit_fold_task(dataset, spec, &train_rows, &test_rows, fold, task)?;
            fr.warnings.extend(fitted.warnings.iter().cloned());
            fr.n_features_used = fitted.design.names.len();
            if fitted.design.selected.is_some() {
                // Task-dependent MI selections can differ; keep the last and
                // count both via provenance.
                fr.selected_features = fitted.design.selected.clone();
            }
            let context = format!("fold {fold}");
            match task {
                Task::Classify => {
                    let y_true: Vec<bool> =
                        test_rows.iter().map(|&r| dataset.meta[r].depressed).collect();
                    let (ba, mcc_v, flag) =
                        classify_metrics(&y_true, &fitted.predictions, &context, &mut fr.warnings);
                    fr.balanced_accuracy = ba;
                    fr.mcc = mcc_v;
                    fr.mcc_zero_denominator = flag;
                    fr.classify = Some(fitted.provenance.clone());
                }
                Task::Regress => {
                    let y_true: Vec<f64> =
                        test_rows.iter().map(|&r| dataset.meta[r].total_score).collect();
                    let (mae_v, r2) =
                        regress_metrics(&y_true, &fitted.predictions, &context, &mut fr.warnings)?;
                    fr.mae = mae_v;
                    fr.r_squared = r2;
                    fr.regress = Some(fitted.provenance.clone());
                }
            }
        }
        folds.push(fr);
    }

    let mut warnings: Vec<String> = Vec::new();
    for fr in &folds {
        warnings.extend(fr.warnings.iter().cloned());
    }
    let report = MetricsReport {
        balanced_accuracy: MetricSummary::from_folds(
            folds.iter().map(|f| f.balanced_accuracy).collect(),
        ),
        mcc: MetricSummary::from_folds(folds.iter().map(|f| f.mcc).collect()),
        mae: MetricSummary::from_folds(folds.iter().map(|f| f.mae).collect()),
        r_squared: MetricSummary::from_folds(folds.iter().map(|f| f.r_squared).collect()),
        n_folds: plan.k(),
        warnings,
    };
    Ok(ExperimentOutcome {
        report,
        folds,
        dataset_hash: dataset.content_hash()?,
        spec: spec.clone(),
        split_seed: plan.seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub set: FeatureSet,
    pub label: String,
    pub n_features: usize,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub best_balanced_accuracy: Option<FeatureSet>,
    pub lowest_mae: Option<FeatureSet>,
    pub folds: Vec<Vec<FoldReport>>,
}

/// One experiment per registry feature group, forest models only, emitting
/// a seven-row comparison table.
pub fn ablation_study(
    dataset: &Dataset,
    spec: &ExperimentSpec,
    plan: &SplitPlan,
) -> Result<AblationReport> {
    if spec.kind() != ModelKind::RandomForest {
        return Err(Error::InvalidArgument(
            "ablation_study runs the random-forest spec; pass a forest config".into(),
        ));
    }
    let mut rows = Vec::with_capacity(FeatureSet::ALL.len());
    let mut folds = Vec::with_capacity(FeatureSet::ALL.len());
    for set in FeatureSet::ALL {
        let group_spec = ExperimentSpec {
            features: FeatureSpec::Group { set },
            ..spec.clone()
        };
        let outcome = run_experiment(dataset, &group_spec, plan)?;
        rows.push(AblationRow {
            set,
            label: set.label().to_string(),
            n_features: outcome.folds.first().map_or(0, |f| f.n_features_used),
            metrics: outcome.report,
        });
        folds.push(outcome.folds);
    }

    let best_balanced_accuracy = rows
        .iter()
        .filter_map(|r| r.metrics.balanced_accuracy.mean.map(|m| (r.set, m)))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .map(|(set, _)| set);
    let lowest_mae = rows
        .iter()
        .filter_map(|r| r.metrics.mae.mean.map(|m| (r.set, m)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .map(|(set, _)| set);

    Ok(AblationReport {
        rows,
        best_balanced_accuracy,
        lowest_mae,
        folds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubgroupAxis {
    Gender,
    Race,
}

impl SubgroupAxis {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gender" => Ok(SubgroupAxis::Gender),
            "race" => Ok(SubgroupAxis::Race),
            other => Err(Error::InvalidArgument(format!(
                "unknown subgroup axis `{other}` (expected gender|race)"
            ))),
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            SubgroupAxis::Gender => "gender",
            SubgroupAxis::Race => "race",
        }
    }

    /// The two group labels, majority first.
    pub fn group_names(self) -> [&'static str; 2] {
        match self {
            SubgroupAxis::Gender => ["female", "male_nonbinary"],
            SubgroupAxis::Race => ["white", "non_white"],
        }
    }

    /// Whether a sample belongs to the first (majority) group.
    fn in_first_group(self, meta: &crate::dataset::SampleMeta) -> bool {
        match self {
            SubgroupAxis::Gender => meta.gender == crate::ingest::Gender::Female,
            SubgroupAxis::Race => meta.race == crate::ingest::Race::White,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupMetrics {
    pub name: String,
    pub n_samples: usize,
    pub n_participants: usize,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupReport {
    pub axis: SubgroupAxis,
    pub groups: Vec<SubgroupMetrics>,
    pub dataset_hash: String,
    pub spec: ExperimentSpec,
    pub split_seed: u64,
}

/// Fit the usual per-fold pipeline but score each demographic subgroup's
/// held-out predictions separately.
pub fn bias_report(
    dataset: &Dataset,
    spec: &ExperimentSpec,
    plan: &SplitPlan,
    axis: SubgroupAxis,
) -> Result<SubgroupReport> {
    spec.validate()?;
    let participants: Vec<String> = dataset
        .participant_rows()
        .keys()
        .map(|s| s.to_string())
        .collect();
    plan.validate(&participants)?;

    let tasks = spec.kind().tasks();
    let names = axis.group_names();
    // Per group, per metric, per fold.
    let mut ba = [Vec::new(), Vec::new()];
    let mut mcc_v = [Vec::new(), Vec::new()];
    let mut mae_v = [Vec::new(), Vec::new()];
    let mut r2 = [Vec::new(), Vec::new()];
    let mut warnings: [Vec<String>; 2] = [Vec::new(), Vec::new()];

    for fold in 0..plan.k() {
        let (train_rows, test_rows) = fold_row_split(dataset, plan, fold)?;
        let group_of = |row: usize| usize::from(!axis.in_first_group(&dataset.meta[row]));
        // Positions within the test split, per group.
        let mut members: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (pos, &row) in test_rows.iter().enumerate() {
            members[group_of(row)].push(pos);
        }

        for &task in tasks {
            let fitted = fit_fold_task(dataset, spec, &train_rows, &test_rows, fold, task)?;
            for g in 0..2 {
                let context = format!("fold {fold} group {}", names[g]);
                let pred: Vec<f64> =
                    members[g].iter().map(|&p| fitted.predictions[p]).collect();
                match task {
                    Task::Classify => {
                        let y_true: Vec<bool> = members[g]
                            .iter()
                            .map(|&p| dataset.meta[test_rows[p]].depressed)
                            .collect();
                        let (b, m, _) =
                            classify_metrics(&y_true, &pred, &context, &mut warnings[g]);
                        ba[g].push(b);
                        mcc_v[g].push(m);
                    }
                    Task::Regress => {
                        let y_true: Vec<f64> = members[g]
                            .iter()
                            .map(|&p| dataset.meta[test_rows[p]].total_score)
                            .collect();
                        let (mv, rv) =
                            regress_metrics(&y_true, &pred, &context, &mut warnings[g])?;
                        mae_v[g].push(mv);
                        r2[g].push(rv);
                    }
                }
            }
        }
    }

    let k = plan.k();
    let pad = |v: Vec<Option<f64>>| -> Vec<Option<f64>> {
        if v.is_empty() {
            vec![None; k]
        } else {
            v
        }
    };
    let mut groups = Vec::with_capacity(2);
    for (g, name) in names.iter().enumerate() {
        let mask: Vec<bool> = dataset
            .meta
            .iter()
            .map(|m| usize::from(!axis.in_first_group(m)) == g)
            .collect();
        let n_samples = mask.iter().filter(|&&b| b).count();
        let n_participants = dataset
            .meta
            .iter()
            .zip(&mask)
            .filter(|(_, &b)| b)
            .map(|(m, _)| m.participant_id.as_str())
            .collect::<BTreeSet<_>>()
            .len();
        groups.push(SubgroupMetrics {
            name: name.to_string(),
            n_samples,
            n_participants,
            metrics: MetricsReport {
                balanced_accuracy: MetricSummary::from_folds(pad(std::mem::take(&mut ba[g]))),
                mcc: MetricSummary::from_folds(pad(std::mem::take(&mut mcc_v[g]))),
                mae: MetricSummary::from_folds(pad(std::mem::take(&mut mae_v[g]))),
                r_squared: MetricSummary::from_folds(pad(std::mem::take(&mut r2[g]))),
                n_folds: k,
                warnings: std::mem::take(&mut warnings[g]),
            },
        });
    }

    Ok(SubgroupReport {
        axis,
        groups,
        dataset_hash: dataset.content_hash()?,
        spec: spec.clone(),
        split_seed: plan.seed,
    })
}

/// TreeSHAP explanation of one fold's fitted forest over (a sample of) its
/// held-out rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainOutcome {
    pub fold: usize,
    pub task: Task,
    pub report: ImportanceReport,
    pub attributions: Vec<Attribution<f64>>,
    /// Image id of each explained row, aligned with `attributions`.
    pub sample_ids: Vec<String>,
    pub feature_names: Vec<String>,
    pub provenance: TaskProvenance,
}

pub fn explain_experiment(
    dataset: &Dataset,
    spec: &ExperimentSpec,
    plan: &SplitPlan,
    fold: usize,
    task: Task,
    max_samples: usize,
    k: usize,
) -> Result<ExplainOutcome> {
    spec.validate()?;
    if spec.kind() != ModelKind::RandomForest {
        return Err(Error::InvalidArgument(
            "explain requires a random-forest spec (TreeSHAP explains trees)".into(),
        ));
    }
    if max_samples == 0 {
        return Err(Error::InvalidArgument("explain: max_samples must be >= 1".into()));
    }
    let (train_rows, test_rows) = fold_row_split(dataset, plan, fold)?;
    let fitted = fit_fold_task(dataset, spec, &train_rows, &test_rows, fold, task)?;
    let AnyModel::RandomForest(mut forest) = fitted.model else {
        unreachable!("forest spec fits a forest");
    };
    // Expectations over the training fold, not the bootstrap counts.
    recompute_covers(&mut forest, &fitted.design.x_train)?;

    // Deterministic subsample of the held-out rows.
    let n_test = test_rows.len();
    let mut positions: Vec<usize> = (0..n_test).collect();
    if n_test > max_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0x3000 + fold as u64));
        positions.shuffle(&mut rng);
        positions.truncate(max_samples);
        positions.sort_unstable();
    }
    let x_sub = fitted.design.x_test.select_rows(&positions);
    let sample_ids: Vec<String> = positions
        .iter()
        .map(|&p| dataset.meta[test_rows[p]].image_id.clone())
        .collect();

    let attributions = tree_shap_batch(&forest, &x_sub)?;
    let report = top_k_report(&attributions, &x_sub, &fitted.design.names, k)?;
    Ok(ExplainOutcome {
        fold,
        task,
        report,
        attributions,
        sample_ids,
        feature_names: fitted.design.names,
        provenance: fitted.provenance,
    })
}
