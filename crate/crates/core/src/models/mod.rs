//! From-scratch predictors: L2 logistic regression, elastic net, and CART
//! random forests, plus the serialization envelope shared by all of them.

pub mod elastic_net;
pub mod forest;
pub mod logistic;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub use elastic_net::{fit_elastic_net, ElasticNetConfig, ElasticNetModel};
pub use forest::{derive_seed, fit_random_forest, ForestParams, RandomForest};
pub use logistic::{fit_logistic, LogisticConfig, LogisticModel};
pub use tree::{Node, Tree};

/// Bump when the serialized model layout changes.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classify,
    Regress,
}

impl Task {
    pub fn key(self) -> &'static str {
        match self {
            Task::Classify => "classify",
            Task::Regress => "regress",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "classify" | "classification" => Ok(Task::Classify),
            "regress" | "regression" => Ok(Task::Regress),
            other => Err(Error::InvalidArgument(format!(
                "unknown task '{other}' (expected classify or regress)"
            ))),
        }
    }
}

/// Any trained model, tagged for self-describing serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnyModel<F> {
    Logistic(LogisticModel<F>),
    ElasticNet(ElasticNetModel<F>),
    RandomForest(RandomForest<F>),
}

impl<F: Scalar> AnyModel<F> {
    pub fn n_features(&self) -> usize {
        match self {
            AnyModel::Logistic(m) => m.weights.len(),
            AnyModel::ElasticNet(m) => m.coefficients.len(),
            AnyModel::RandomForest(m) => m.n_features,
        }
    }

    /// Raw model output per row: positive-class probability for classifiers,
    /// real score for regressors.
    pub fn predict(&self, x: &Matrix<F>) -> Result<Vec<F>> {
        match self {
            AnyModel::Logistic(m) => m.predict_proba(x),
            AnyModel::ElasticNet(m) => m.predict(x),
            AnyModel::RandomForest(m) => m.predict(x),
        }
    }
}

/// Serialization envelope: format version + model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact<F> {
    pub format_version: u32,
    pub model: AnyModel<F>,
}

impl<F: Scalar + Serialize + serde::de::DeserializeOwned> ModelArtifact<F> {
    pub fn new(model: AnyModel<F>) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let artifact: ModelArtifact<F> = serde_json::from_str(text)?;
        if artifact.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported model format version {} (expected {})",
                artifact.format_version, MODEL_FORMAT_VERSION
            )));
        }
        Ok(artifact)
    }
}

/// Hard labels from classifier probabilities at the 0.5 cut (>= 0.5 is
/// positive).
pub fn labels_from_proba<F: Scalar>(proba: &[F]) -> Vec<bool> {
    let half = F::from_f64_lossy(0.5);
    proba.iter().map(|&p| p >= half).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_threshold_is_inclusive() {
        let proba = vec![0.49f64, 0.5, 0.51];
        assert_eq!(labels_from_proba(&proba), vec![false, true, true]);
    }
}
