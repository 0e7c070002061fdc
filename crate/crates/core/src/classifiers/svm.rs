//! Linear max-margin separator trained with Pegasos.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TrainingSet;
use crate::error::{invalid, Error, Result};

/// Decision rule `w . x > tau` means connected; the hyperplane itself is
/// disconnected.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSeparator {
    w: Vec<f64>,
    tau: f64,
}

impl LinearSeparator {
    pub fn new(w: Vec<f64>, tau: f64) -> Result<Self> {
        if w.iter().chain([&tau]).any(|v| !v.is_finite()) {
            return Err(invalid("separator parameters must be finite"));
        }
        if w.iter().all(|&v| v == 0.0) {
            return Err(invalid("separator weights must be non-zero"));
        }
        Ok(Self { w, tau })
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// `w . x - tau`.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.w.len() {
            return Err(invalid(format!(
                "feature length {} does not match separator length {}",
                x.len(),
                self.w.len()
            )));
        }
        Ok(self.w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - self.tau)
    }

    pub fn predict(&self, x: &[f64]) -> Result<bool> {
        Ok(self.decision_value(x)? > 0.0)
    }

    /// The same separator with `(w, tau)` multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(invalid("scale must be positive"));
        }
        Self::new(self.w.iter().map(|v| v * c).collect(), self.tau * c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    /// L2 regularization weight.
    pub reg: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            reg: 1e-4,
            epochs: 100,
            seed: 0,
        }
    }
}

/// Minimizes the regularized hinge loss with projected stochastic
/// subgradient steps of size `1 / (reg * t)`.
///
/// Features are standardized per coordinate and a constant bias coordinate
/// is appended; the learned hyperplane is mapped back to raw coordinates.
pub fn svm_train(ts: &TrainingSet, params: &SvmParams) -> Result<LinearSeparator> {
    let reg = params.reg;
    if !(reg > 0.0) || !reg.is_finite() {
        return Err(invalid("reg must be positive"));
    }
    if params.epochs == 0 {
        return Err(invalid("epochs must be positive"));
    }
    let d = ts.dim();
    let n = ts.len();
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, x) in mean.iter_mut().zip(ts.features(i)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut scale = vec![0.0; d];
    for i in 0..n {
        for ((s, x), m) in scale.iter_mut().zip(ts.features(i)).zip(&mean) {
            *s += (x - m) * (x - m);
        }
    }
    // inverse standard deviation; constant coordinates are ignored
    for s in &mut scale {
        let sd = (*s / n as f64).sqrt();
        *s = if sd > 0.0 { 1.0 / sd } else { 0.0 };
    }
    let mut z = vec![0.0; n * (d + 1)];
    for i in 0..n {
        let row = &mut z[i * (d + 1)..(i + 1) * (d + 1)];
        for k in 0..d {
            row[k] = (ts.features(i)[k] - mean[k]) * scale[k];
        }
        row[d] = 1.0;
    }

    let radius = 1.0 / reg.sqrt();
    let mut v = vec![0.0; d + 1];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut t = 0u64;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (reg * t as f64);
            let row = &z[i * (d + 1)..(i + 1) * (d + 1)];
            let y = if ts.label(i) { 1.0 } else { -1.0 };
            let margin = y * row.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
            let shrink = 1.0 - 1.0 / t as f64;
            if margin < 1.0 {
                for (vk, r) in v.iter_mut().zip(row) {
                    *vk = shrink * *vk + eta * y * r;
                }
            } else {
                v.iter_mut().for_each(|vk| *vk *= shrink);
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > radius {
                let c = radius / norm;
                v.iter_mut().for_each(|vk| *vk *= c);
            }
        }
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("separator weights diverged".into()));
    }
    let w: Vec<f64> = v[..d].iter().zip(&scale).map(|(a, s)| a * s).collect();
    let tau = w.iter().zip(&mean).map(|(a, m)| a * m).sum::<f64>() - v[d];
    LinearSeparator::new(w, tau).map_err(|_| Error::Degenerate("training produced a zero separator".into()))
}
