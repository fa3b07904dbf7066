//! JSON model files.
//!
//! ```json
//! {
//!   "lambda": 0.02,
//!   "batch": {"kind": "finite", "pmf": [1.0]},
//!   "G": [[{"weight": 0.9, "family": "erlang", "shape": 2, "rate": 1.8}, ...], ...],
//!   "Gstar": null
//! }
//! ```
//!
//! `batch` defaults to single arrivals and `Gstar` to `G`. Families are
//! `exponential {rate}`, `erlang {shape, rate}`, `deterministic {value}`,
//! `hyperexponential2 {p, rate1, rate2}` and `mixture {components}`, where each
//! component is `{weight, family, ...}`. Batches are `finite {pmf}` with
//! `pmf[k-1] = P(B = k)` or `geometric {p}` on `{1, 2, ...}`. Anything with an
//! infinite second moment is unrepresentable.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distribution::{BatchDistribution, DurationDistribution};
use crate::model::{Kernel, KernelEntry, KernelKind, ModelError, QueueModel};

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl SpecError {
    /// JSON-style path of the offending field, when there is one.
    pub fn path(&self) -> Option<&str> {
        match self {
            Self::Schema { path, .. } | Self::Model(ModelError::Invalid { path, .. }) => Some(path),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum DurationSpec {
    Exponential { rate: f64 },
    Erlang { shape: u32, rate: f64 },
    Deterministic { value: f64 },
    Hyperexponential2 { p: f64, rate1: f64, rate2: f64 },
    Mixture { components: Vec<WeightedDuration> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedDuration {
    pub weight: f64,
    #[serde(flatten)]
    pub duration: DurationSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BatchSpec {
    Finite { pmf: Vec<f64> },
    Geometric { p: f64 },
}

impl Default for BatchSpec {
    fn default() -> Self {
        Self::Finite { pmf: vec![1.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub lambda: f64,
    #[serde(default)]
    pub batch: BatchSpec,
    #[serde(rename = "G")]
    pub g: Vec<Vec<WeightedDuration>>,
    #[serde(rename = "Gstar", default, skip_serializing_if = "Option::is_none")]
    pub gstar: Option<Vec<Vec<WeightedDuration>>>,
}

impl DurationSpec {
    fn to_distribution(&self) -> DurationDistribution<f64> {
        match self {
            Self::Exponential { rate } => DurationDistribution::Exponential { rate: *rate },
            Self::Erlang { shape, rate } => DurationDistribution::Erlang {
                shape: *shape,
                rate: *rate,
            },
            Self::Deterministic { value } => DurationDistribution::Deterministic { value: *value },
            Self::Hyperexponential2 { p, rate1, rate2 } => DurationDistribution::Hyperexponential2 {
                p: *p,
                rate1: *rate1,
                rate2: *rate2,
            },
            Self::Mixture { components } => DurationDistribution::Mixture(
                components
                    .iter()
                    .map(|c| (c.weight, c.duration.to_distribution()))
                    .collect(),
            ),
        }
    }

    fn from_distribution(d: &DurationDistribution<f64>) -> Self {
        match d {
            DurationDistribution::Exponential { rate } => Self::Exponential { rate: *rate },
            DurationDistribution::Erlang { shape, rate } => Self::Erlang {
                shape: *shape,
                rate: *rate,
            },
            DurationDistribution::Deterministic { value } => Self::Deterministic { value: *value },
            DurationDistribution::Hyperexponential2 { p, rate1, rate2 } => Self::Hyperexponential2 {
                p: *p,
                rate1: *rate1,
                rate2: *rate2,
            },
            DurationDistribution::Mixture(parts) => Self::Mixture {
                components: parts
                    .iter()
                    .map(|(w, d)| WeightedDuration {
                        weight: *w,
                        duration: Self::from_distribution(d),
                    })
                    .collect(),
            },
        }
    }
}

fn to_kernel(rows: &[Vec<WeightedDuration>]) -> Kernel<f64> {
    rows.iter()
        .map(|row| {
            row.iter()
                .map(|e| KernelEntry::new(e.weight, e.duration.to_distribution()))
                .collect()
        })
        .collect()
}

fn from_kernel(k: &Kernel<f64>) -> Vec<Vec<WeightedDuration>> {
    k.iter()
        .map(|row| {
            row.iter()
                .map(|e| WeightedDuration {
                    weight: e.weight,
                    duration: DurationSpec::from_distribution(&e.duration),
                })
                .collect()
        })
        .collect()
}

impl ModelSpec {
    pub fn from_json_str(s: &str) -> Result<Self, SpecError> {
        let de = &mut serde_json::Deserializer::from_str(s);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            SpecError::Schema {
                path: if path == "." { "$".into() } else { path },
                message: e.into_inner().to_string(),
            }
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_model(&self) -> Result<QueueModel<f64>, ModelError> {
        let batch = match &self.batch {
            BatchSpec::Finite { pmf } => BatchDistribution::Finite(pmf.clone()),
            BatchSpec::Geometric { p } => BatchDistribution::Geometric { p: *p },
        };
        QueueModel::new(self.lambda, batch, to_kernel(&self.g), self.gstar.as_deref().map(to_kernel))
    }

    /// Spec of an existing model; `Gstar` is omitted when it equals `G`.
    pub fn from_model(model: &QueueModel<f64>) -> Self {
        let batch = match model.batch() {
            BatchDistribution::Finite(pmf) => BatchSpec::Finite { pmf: pmf.clone() },
            BatchDistribution::Geometric { p } => BatchSpec::Geometric { p: *p },
        };
        let g = model.kernel(KernelKind::Regular);
        let gs = model.kernel(KernelKind::Exceptional);
        Self {
            lambda: model.lambda(),
            batch,
            g: from_kernel(g),
            gstar: (g != gs).then(|| from_kernel(gs)),
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("model specs always serialise")
    }
}

/// Reads, parses and validates a model file.
pub fn load_model(path: &Path) -> Result<QueueModel<f64>, SpecError> {
    Ok(ModelSpec::from_path(path)?.to_model()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    const MM1: &str = r#"{"lambda": 0.5, "G": [[{"weight": 1.0, "family": "exponential", "rate": 1.0}]]}"#;

    #[test]
    fn parses_minimal_model() {
        let m = ModelSpec::from_json_str(MM1).unwrap().to_model().unwrap();
        assert_eq!(m, presets::mm1(0.5, 1.0));
    }

    #[test]
    fn roundtrips_presets() {
        for m in [
            presets::two_type_erlang::<f64>(0.02),
            presets::mxg1(0.1, BatchDistribution::Geometric { p: 0.4 }, DurationDistribution::erlang(3, 2.0)),
        ] {
            let text = ModelSpec::from_model(&m).to_json_pretty();
            let back = ModelSpec::from_json_str(&text).unwrap().to_model().unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn schema_errors_carry_paths() {
        let bad = r#"{"lambda": 0.5, "G": [[{"weight": 1.0, "family": "erlang", "rate": 1.0}]]}"#;
        let err = ModelSpec::from_json_str(bad).unwrap_err();
        assert!(err.path().unwrap().starts_with("G[0][0]"), "{err}");
        let bad = r#"{"lambda": 0.5, "batch": {"kind": "pareto"}, "G": []}"#;
        assert_eq!(ModelSpec::from_json_str(bad).unwrap_err().path(), Some("batch.kind"));
    }

    #[test]
    fn validation_errors_carry_paths() {
        let bad = r#"{"lambda": 0.5, "G": [
            [{"weight": 0.5, "family": "exponential", "rate": 1.0}, {"weight": 0.4, "family": "exponential", "rate": 1.0}],
            [{"weight": 0.5, "family": "exponential", "rate": 1.0}, {"weight": 0.5, "family": "exponential", "rate": 1.0}]]}"#;
        let err: SpecError = ModelSpec::from_json_str(bad).unwrap().to_model().unwrap_err().into();
        assert_eq!(err.path(), Some("G[0]"));
    }
}
