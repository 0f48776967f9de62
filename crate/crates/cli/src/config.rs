//! Declarative run configuration: a TOML file with nested sections, every
//! field defaulted, flags layered on top. The fully resolved value is echoed
//! into each run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use facephq::error::{Error, Result};
use facephq::eval::{
    ExperimentSpec, FeatureSpec, ModelConfig, ModelKind, DEFAULT_INNER_K, DEFAULT_MI_BINS,
};
use facephq::features::SelectionMode;
use facephq::models::{ElasticNetConfig, ForestParams, LogisticConfig};
use facephq::psychometrics::DEFAULT_THRESHOLD;
use facephq::registry::FeatureSet;
use facephq::synth::SynthConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: InputsSection,
    pub ingest: IngestSection,
    pub features: FeaturesSection,
    pub model: ModelSection,
    pub split: SplitSection,
    pub explain: ExplainSection,
    pub bias: BiasSection,
    pub synth: SynthConfig,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputsSection {
    pub ema: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub demographics: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    /// Attention-item tolerance: |item - reflected| above this excludes the
    /// session.
    pub tolerance: f64,
    /// Depression label threshold on the session total.
    pub threshold: f64,
    /// Strict parsing: any bad row fails the run instead of being skipped.
    pub strict: bool,
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection {
            tolerance: 25.0,
            threshold: DEFAULT_THRESHOLD,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    /// "all", "baseline", "mi", or a registry group key (fau, gaze,
    /// eye_landmarks, head_pose, rigidity, landmarks_2d, landmarks_3d).
    pub set: String,
    /// MI scoring mode: "independence" or "relevance".
    pub mi_mode: String,
    pub mi_fraction: f64,
    pub mi_bins: usize,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        FeaturesSection {
            set: "all".into(),
            mi_mode: SelectionMode::default().key().into(),
            mi_fraction: 0.3,
            mi_bins: DEFAULT_MI_BINS,
        }
    }
}

/// Model family plus every hyperparameter, with 0 meaning "unset" for the
/// optional forest knobs (`max_depth`, `mtry`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// "random_forest", "logistic", or "elastic_net".
    pub kind: String,
    pub n_trees: usize,
    /// 0 = unlimited depth.
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// 0 = default (sqrt of the feature count).
    pub mtry: usize,
    pub max_bins: usize,
    pub l2: f64,
    pub logistic_max_iter: usize,
    pub logistic_tol: f64,
    pub lambda: f64,
    pub alpha_mix: f64,
    pub max_sweeps: usize,
    pub elastic_tol: f64,
    /// Inner folds for grid tuning.
    pub inner_k: usize,
    /// Tuning candidates; each entry overrides the knobs it names.
    pub grid: Vec<GridEntry>,
}

impl Default for ModelSection {
    fn default() -> Self {
        let forest = ForestParams::default();
        let logistic = LogisticConfig::<f64>::default();
        let elastic = ElasticNetConfig::<f64>::default();
        ModelSection {
            kind: ModelKind::RandomForest.key().into(),
            n_trees: forest.n_trees,
            max_depth: forest.max_depth.unwrap_or(0),
            min_samples_leaf: forest.min_samples_leaf,
            mtry: forest.mtry.unwrap_or(0),
            max_bins: forest.max_bins,
            l2: logistic.l2,
            logistic_max_iter: logistic.max_iter,
            logistic_tol: logistic.tol,
            lambda: elastic.lambda,
            alpha_mix: elastic.alpha_mix,
            max_sweeps: elastic.max_sweeps,
            elastic_tol: elastic.tol,
            inner_k: DEFAULT_INNER_K,
            grid: Vec::new(),
        }
    }
}

/// One grid candidate: only the named knobs differ from the base model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridEntry {
    pub n_trees: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: Option<usize>,
    pub mtry: Option<usize>,
    pub max_bins: Option<usize>,
    pub l2: Option<f64>,
    pub lambda: Option<f64>,
    pub alpha_mix: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub folds: usize,
    pub seed: u64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection { folds: 5, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSection {
    pub fold: usize,
    /// "classify" or "regress".
    pub task: String,
    pub max_samples: usize,
    pub top_k: usize,
}

impl Default for ExplainSection {
    fn default() -> Self {
        ExplainSection {
            fold: 0,
            task: "classify".into(),
            max_samples: 256,
            top_k: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasSection {
    /// "gender" or "race".
    pub axis: String,
}

impl Default for BiasSection {
    fn default() -> Self {
        BiasSection { axis: "gender".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("facephq_out"),
        }
    }
}

fn none_if_zero(v: usize) -> Option<usize> {
    (v != 0).then_some(v)
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))
    }

    pub fn model_kind(&self) -> Result<ModelKind> {
        ModelKind::parse(&self.model.kind)
    }

    /// The base model the run fits when no grid is given.
    pub fn base_model(&self) -> Result<ModelConfig> {
        let m = &self.model;
        Ok(match self.model_kind()? {
            ModelKind::RandomForest => ModelConfig::RandomForest(ForestParams {
                n_trees: m.n_trees,
                max_depth: none_if_zero(m.max_depth),
                min_samples_leaf: m.min_samples_leaf,
                mtry: none_if_zero(m.mtry),
                max_bins: m.max_bins,
            }),
            ModelKind::Logistic => ModelConfig::Logistic(LogisticConfig {
                l2: m.l2,
                max_iter: m.logistic_max_iter,
                tol: m.logistic_tol,
            }),
            ModelKind::ElasticNet => ModelConfig::ElasticNet(ElasticNetConfig {
                lambda: m.lambda,
                alpha_mix: m.alpha_mix,
                max_sweeps: m.max_sweeps,
                tol: m.elastic_tol,
            }),
        })
    }

    /// The tuning grid: each entry is the base model with its overrides
    /// applied. Knobs foreign to the model family are rejected.
    pub fn grid(&self) -> Result<Vec<ModelConfig>> {
        let kind = self.model_kind()?;
        let mut out = Vec::with_capacity(self.model.grid.len());
        for (i, entry) in self.model.grid.iter().enumerate() {
            let foreign = |knob: &str| {
                Err(Error::InvalidArgument(format!(
                    "model.grid[{i}]: `{knob}` does not apply to {}",
                    kind.key()
                )))
            };
            let config = match self.base_model()? {
                ModelConfig::RandomForest(mut p) => {
                    if entry.l2.is_some() {
                        return foreign("l2");
                    }
                    if entry.lambda.is_some() {
                        return foreign("lambda");
                    }
                    if entry.alpha_mix.is_some() {
                        return foreign("alpha_mix");
                    }
                    if let Some(v) = entry.n_trees {
                        p.n_trees = v;
                    }
                    if let Some(v) = entry.max_depth {
                        p.max_depth = none_if_zero(v);
                    }
                    if let Some(v) = entry.min_samples_leaf {
                        p.min_samples_leaf = v;
                    }
                    if let Some(v) = entry.mtry {
                        p.mtry = none_if_zero(v);
                    }
                    if let Some(v) = entry.max_bins {
                        p.max_bins = v;
                    }
                    ModelConfig::RandomForest(p)
                }
                ModelConfig::Logistic(mut c) => {
                    for (knob, set) in [
                        ("n_trees", entry.n_trees.is_some()),
                        ("max_depth", entry.max_depth.is_some()),
                        ("min_samples_leaf", entry.min_samples_leaf.is_some()),
                        ("mtry", entry.mtry.is_some()),
                        ("max_bins", entry.max_bins.is_some()),
                        ("lambda", entry.lambda.is_some()),
                        ("alpha_mix", entry.alpha_mix.is_some()),
                    ] {
                        if set {
                            return foreign(knob);
                        }
                    }
                    if let Some(v) = entry.l2 {
                        c.l2 = v;
                    }
                    ModelConfig::Logistic(c)
                }
                ModelConfig::ElasticNet(mut c) => {
                    for (knob, set) in [
                        ("n_trees", entry.n_trees.is_some()),
                        ("max_depth", entry.max_depth.is_some()),
                        ("min_samples_leaf", entry.min_samples_leaf.is_some()),
                        ("mtry", entry.mtry.is_some()),
                        ("max_bins", entry.max_bins.is_some()),
                        ("l2", entry.l2.is_some()),
                    ] {
                        if set {
                            return foreign(knob);
                        }
                    }
                    if let Some(v) = entry.lambda {
                        c.lambda = v;
                    }
                    if let Some(v) = entry.alpha_mix {
                        c.alpha_mix = v;
                    }
                    ModelConfig::ElasticNet(c)
                }
            };
            out.push(config);
        }
        Ok(out)
    }

    pub fn feature_spec(&self) -> Result<FeatureSpec> {
        let f = &self.features;
        Ok(match f.set.trim().to_ascii_lowercase().as_str() {
            "all" => FeatureSpec::All,
            "baseline" => FeatureSpec::Baseline,
            "mi" => FeatureSpec::MutualInfo {
                mode: SelectionMode::parse(&f.mi_mode)?,
                fraction: f.mi_fraction,
                bins: f.mi_bins,
            },
            key => FeatureSpec::Group {
                set: FeatureSet::parse(key)?,
            },
        })
    }

    pub fn experiment_spec(&self) -> Result<ExperimentSpec> {
        if self.split.folds < 2 {
            return Err(Error::InvalidArgument(format!(
                "split.folds {} < 2",
                self.split.folds
            )));
        }
        Ok(ExperimentSpec {
            config: self.base_model()?,
            grid: self.grid()?,
            features: self.feature_spec()?,
            inner_k: self.model.inner_k,
            seed: self.split.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.model.n_trees, 100);
        assert_eq!(cfg.split.folds, 5);
        assert_eq!(cfg.ingest.threshold, 334.0);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = toml::from_str::<RunConfig>("[model]\nn_treez = 3\n").unwrap_err();
        assert!(err.to_string().contains("n_treez"));
    }

    #[test]
    fn grid_overlay_and_foreign_knobs() {
        let cfg: RunConfig = toml::from_str(
            "[model]\nkind = \"random_forest\"\nn_trees = 10\n\n\
             [[model.grid]]\nn_trees = 20\n\n[[model.grid]]\nmax_depth = 3\n",
        )
        .unwrap();
        let grid = cfg.grid().unwrap();
        assert_eq!(grid.len(), 2);
        let ModelConfig::RandomForest(p0) = &grid[0] else { panic!() };
        assert_eq!(p0.n_trees, 20);
        let ModelConfig::RandomForest(p1) = &grid[1] else { panic!() };
        assert_eq!(p1.n_trees, 10);
        assert_eq!(p1.max_depth, Some(3));

        let bad: RunConfig =
            toml::from_str("[model]\nkind = \"logistic\"\n\n[[model.grid]]\nn_trees = 5\n").unwrap();
        assert!(bad.grid().is_err());
    }

    #[test]
    fn feature_spec_parses_group_and_mi() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.feature_spec().unwrap(), FeatureSpec::All);
        cfg.features.set = "landmarks_3d".into();
        assert_eq!(
            cfg.feature_spec().unwrap(),
            FeatureSpec::Group { set: FeatureSet::Landmarks3d }
        );
        cfg.features.set = "mi".into();
        cfg.features.mi_fraction = 0.2;
        assert!(matches!(
            cfg.feature_spec().unwrap(),
            FeatureSpec::MutualInfo { fraction, .. } if fraction == 0.2
        ));
        cfg.features.set = "bogus".into();
        assert!(cfg.feature_spec().is_err());
    }
}
