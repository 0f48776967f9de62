//! Evaluation: metrics, subject-disjoint splits, nested tuning, and the
//! experiment/ablation/bias drivers.

pub mod experiment;
pub mod metrics;
pub mod splits;
pub mod tuning;

pub use experiment::{
    ablation_study, bias_report, explain_experiment, fit_config, run_experiment, AblationReport,
    AblationRow, ExperimentOutcome, ExperimentSpec, ExplainOutcome, FeatureSpec, FoldReport,
    MetricSummary, MetricsReport, ModelConfig, ModelKind, SubgroupAxis, SubgroupMetrics,
    SubgroupReport, TaskProvenance, DEFAULT_INNER_K, DEFAULT_MI_BINS,
};
pub use metrics::{balanced_accuracy, mae, mcc, r_squared, ConfusionMatrix, MccOutcome};
pub use splits::{make_subject_folds, SplitPlan};
pub use tuning::{nested_tune, CandidateScore, TuneOutcome, TuneProblem};
