//! Trained pair classifiers together with the feature recipe they expect,
//! and their versioned JSON files.

use std::path::Path;

use netsep_core::classifiers::cnn::BLOCK_NAMES;
use netsep_core::classifiers::{ConvNetArch, ConvNetModel, LinearSeparator, TrainingMeta};
use netsep_core::dynamics::ObservedSeries;
use netsep_core::estimators::granger;
use netsep_core::features::{augment, build_feature_tensor, normalize, FeatureTensor, LagWindow};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt17, read_to_string, write_file};

pub const SCHEMA_VERSION: u32 = 1;

/// How pair features are built for a model: normalized lag covariances over
/// `lags`, optionally preceded by the Granger estimate of the pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureSpec {
    pub lags: LagWindow,
    pub granger: bool,
}

impl FeatureSpec {
    pub fn input_length(&self) -> usize {
        self.lags.len() + usize::from(self.granger)
    }

    /// Normalized (and possibly augmented) features of every ordered pair.
    pub fn build(&self, obs: &ObservedSeries, truth: Option<&netsep_core::graph::Graph>) -> Result<FeatureTensor> {
        let t = normalize(&build_feature_tensor(obs, self.lags, truth)?)?;
        if self.granger {
            Ok(augment(&t, &granger(obs)?.values)?)
        } else {
            Ok(t)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Svm(LinearSeparator),
    Cnn(ConvNetModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub features: FeatureSpec,
    pub classifier: Classifier,
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self.classifier {
            Classifier::Svm(_) => "svm",
            Classifier::Cnn(_) => "cnn",
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<bool> {
        Ok(match &self.classifier {
            Classifier::Svm(m) => m.predict(x)?,
            Classifier::Cnn(m) => m.predict(x)?,
        })
    }

    /// Predictions for a feature tensor, in pair order.
    pub fn predict_tensor(&self, t: &FeatureTensor) -> Result<Vec<bool>> {
        t.vectors().map(|x| self.predict(x)).collect()
    }

    /// Builds features from an observed series and classifies every pair.
    pub fn predict_series(&self, obs: &ObservedSeries) -> Result<Vec<bool>> {
        self.predict_tensor(&self.features.build(obs, None)?)
    }

    pub fn to_json(&self) -> String {
        let (shape, training, weights) = match &self.classifier {
            Classifier::Svm(m) => (
                Shape {
                    input_length: m.dim(),
                    ..Shape::default()
                },
                None,
                vec![block("w", m.weights()), block("tau", &[m.tau()])],
            ),
            Classifier::Cnn(m) => {
                let a = m.arch();
                let blocks = a.blocks(m.input_length()).expect("validated model");
                (
                    Shape {
                        input_length: m.input_length(),
                        conv1_filters: Some(a.conv1_filters),
                        conv1_kernel: Some(a.conv1_kernel),
                        conv2_filters: Some(a.conv2_filters),
                        conv2_kernel: Some(a.conv2_kernel),
                        hidden: Some(a.hidden),
                    },
                    Some(Training {
                        epochs: m.meta.epochs,
                        learning_rate: m.meta.learning_rate,
                        batch_size: m.meta.batch_size,
                        seed: m.meta.seed,
                    }),
                    BLOCK_NAMES
                        .iter()
                        .zip(blocks)
                        .map(|(name, r)| block(name, &m.params()[r]))
                        .collect(),
                )
            }
        };
        let doc = Document {
            schema_version: SCHEMA_VERSION,
            kind: self.kind().to_string(),
            features: Features {
                lag_min: self.features.lags.min,
                lag_max: self.features.lags.max,
                granger: self.features.granger,
            },
            shape,
            training,
            weights,
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Format(format!("model file: {msg}"));
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => return Err(bad(format!("unsupported schema_version {v}"))),
            None => return Err(bad("missing schema_version".into())),
        }
        let doc: Document = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
        let features = FeatureSpec {
            lags: LagWindow::new(doc.features.lag_min, doc.features.lag_max)?,
            granger: doc.features.granger,
        };
        let mut blocks = doc.weights.iter();
        let mut next = |name: &str| -> Result<Vec<f64>> {
            let b = blocks
                .next()
                .filter(|b| b.name == name)
                .ok_or_else(|| bad(format!("expected weight block '{name}'")))?;
            b.values
                .iter()
                .map(|v| v.parse::<f64>().map_err(|_| bad(format!("'{v}' in '{name}' is not a number"))))
                .collect()
        };
        let classifier = match doc.kind.as_str() {
            "svm" => {
                let w = next("w")?;
                let tau = next("tau")?;
                if tau.len() != 1 || w.len() != doc.shape.input_length {
                    return Err(bad("weight lengths do not match the shape".into()));
                }
                Classifier::Svm(LinearSeparator::new(w, tau[0])?)
            }
            "cnn" => {
                let s = &doc.shape;
                let field = |v: Option<usize>, name: &str| v.ok_or_else(|| bad(format!("shape lacks {name}")));
                let arch = ConvNetArch {
                    conv1_filters: field(s.conv1_filters, "conv1_filters")?,
                    conv1_kernel: field(s.conv1_kernel, "conv1_kernel")?,
                    conv2_filters: field(s.conv2_filters, "conv2_filters")?,
                    conv2_kernel: field(s.conv2_kernel, "conv2_kernel")?,
                    hidden: field(s.hidden, "hidden")?,
                };
                let expected = arch.blocks(s.input_length)?;
                let mut params = Vec::with_capacity(expected[7].end);
                for (name, r) in BLOCK_NAMES.iter().zip(expected) {
                    let v = next(name)?;
                    if v.len() != r.len() {
                        return Err(bad(format!("block '{name}' has {} values, expected {}", v.len(), r.len())));
                    }
                    params.extend(v);
                }
                let t = doc.training.unwrap_or_default();
                let meta = TrainingMeta {
                    epochs: t.epochs,
                    learning_rate: t.learning_rate,
                    batch_size: t.batch_size,
                    seed: t.seed,
                };
                Classifier::Cnn(ConvNetModel::from_parts(arch, s.input_length, params, meta)?)
            }
            other => return Err(bad(format!("unknown model kind '{other}'"))),
        };
        if blocks.next().is_some() {
            return Err(bad("unexpected extra weight blocks".into()));
        }
        let model = Model { features, classifier };
        if model.input_length() != features.input_length() {
            return Err(bad("input length does not match the feature recipe".into()));
        }
        Ok(model)
    }

    pub fn input_length(&self) -> usize {
        match &self.classifier {
            Classifier::Svm(m) => m.dim(),
            Classifier::Cnn(m) => m.input_length(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_to_string(path)?).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

fn block(name: &str, values: &[f64]) -> Block {
    Block {
        name: name.to_string(),
        values: values.iter().map(|&v| fmt17(v)).collect(),
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    schema_version: u32,
    kind: String,
    features: Features,
    shape: Shape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    training: Option<Training>,
    weights: Vec<Block>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Features {
    lag_min: i64,
    lag_max: i64,
    granger: bool,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct Shape {
    input_length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    conv1_filters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    conv1_kernel: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    conv2_filters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    conv2_kernel: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hidden: Option<usize>,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct Training {
    epochs: usize,
    learning_rate: f64,
    batch_size: usize,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Block {
    name: String,
    values: Vec<String>,
}
