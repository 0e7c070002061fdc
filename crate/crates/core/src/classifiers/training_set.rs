use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::features::FeatureTensor;

/// Where a training set came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub graph_seed: u64,
    pub n_values: Vec<usize>,
    pub sigma2: f64,
}

/// Labelled, normalized feature vectors of a fixed length.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<bool>,
    pub provenance: Provenance,
}

impl TrainingSet {
    /// Builds a set from raw rows. Both classes must be present.
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<bool>, provenance: Provenance) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("feature length must be positive"));
        }
        if features.len() != dim * labels.len() {
            return Err(invalid(format!(
                "{} values do not form {} vectors of length {dim}",
                features.len(),
                labels.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(invalid("training features must be finite"));
        }
        if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
            return Err(invalid("training set needs both classes"));
        }
        Ok(Self {
            dim,
            features,
            labels,
            provenance,
        })
    }

    /// Pools normalized, labelled tensors that share a feature length.
    pub fn from_tensors<'a>(
        tensors: impl IntoIterator<Item = &'a FeatureTensor>,
        provenance: Provenance,
    ) -> Result<Self> {
        let mut dim = None;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for t in tensors {
            if !t.is_normalized() {
                return Err(invalid("training tensors must be normalized"));
            }
            let l = t
                .labels()
                .ok_or_else(|| invalid("training tensors must be labelled"))?;
            match dim {
                None => dim = Some(t.dim()),
                Some(d) if d != t.dim() => {
                    return Err(invalid(format!("feature length {} differs from {d}", t.dim())))
                }
                _ => {}
            }
            features.extend_from_slice(t.values());
            labels.extend_from_slice(l);
        }
        let dim = dim.ok_or_else(|| invalid("no training tensors"))?;
        Self::new(dim, features, labels, provenance)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> bool {
        self.labels[i]
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    /// The subset at `indices`, in that order. Class balance is not checked.
    pub(crate) fn rows(&self, indices: &[usize]) -> (Vec<f64>, Vec<bool>) {
        let mut f = Vec::with_capacity(indices.len() * self.dim);
        let mut l = Vec::with_capacity(indices.len());
        for &i in indices {
            f.extend_from_slice(self.features(i));
            l.push(self.labels[i]);
        }
        (f, l)
    }
}
