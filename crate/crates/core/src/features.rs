//! Pairwise lag-covariance features.
//!
//! The empirical lag covariance for lag `k >= 0` averages over the
//! `n - k` overlapping windows:
//!
//! ```text
//! [R_k]_ij = 1/(n-k) * sum_{l=0}^{n-k-1} y_i(l+k) y_j(l)
//! ```
//!
//! and negative lags use `[R_{-k}]_ij = [R_k]_ji`. Every entry is computed by
//! the same [`lagged_dot`] kernel, so pair features and full matrices agree
//! bit for bit.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::dynamics::ObservedSeries;
use crate::error::{invalid, Error, Result};
use crate::graph::{ordered_pairs, Graph, Support};

/// Inclusive lag range `min..=max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LagWindow {
    pub min: i64,
    pub max: i64,
}

impl LagWindow {
    pub fn new(min: i64, max: i64) -> Result<Self> {
        if max < min {
            return Err(invalid(format!("lag window {min}..={max} is empty")));
        }
        Ok(Self { min, max })
    }

    /// Number of lags `M`.
    pub fn len(&self) -> usize {
        (self.max - self.min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lags(&self) -> impl Iterator<Item = i64> + Clone {
        self.min..=self.max
    }

    /// Largest absolute lag.
    pub fn reach(&self) -> usize {
        self.min.unsigned_abs().max(self.max.unsigned_abs()) as usize
    }

    /// Position of lag `k` inside the window.
    pub fn index_of(&self, k: i64) -> Option<usize> {
        (self.min..=self.max)
            .contains(&k)
            .then(|| (k - self.min) as usize)
    }

    /// Whether the window holds lags 1 and 3, which makes the features
    /// linearly separable for symmetric interaction matrices.
    pub fn supports_separability(&self) -> bool {
        self.min <= 1 && self.max >= 3
    }
}

impl Default for LagWindow {
    fn default() -> Self {
        Self {
            min: -100,
            max: 100,
        }
    }
}

/// `sum_{l=0}^{n-lag-1} later[l+lag] * earlier[l]` with a fixed summation order.
pub fn lagged_dot(later: &[f64], earlier: &[f64], lag: usize) -> f64 {
    let n = later.len().min(earlier.len());
    if lag >= n {
        return 0.0;
    }
    let m = n - lag;
    let a = &later[lag..lag + m];
    let b = &earlier[..m];
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}

/// `[R_k]_ij` from the two node series.
fn lag_cov_entry(yi: &[f64], yj: &[f64], k: i64) -> f64 {
    let n = yi.len();
    let lag = k.unsigned_abs() as usize;
    let norm = (n - lag) as f64;
    if k >= 0 {
        lagged_dot(yi, yj, lag) / norm
    } else {
        lagged_dot(yj, yi, lag) / norm
    }
}

fn check_lag(k: i64, n: usize) -> Result<()> {
    if k.unsigned_abs() as usize >= n {
        return Err(invalid(format!("lag {k} needs more than {n} samples")));
    }
    Ok(())
}

/// Empirical lag-`k` covariance over the observed nodes.
pub fn empirical_lag_cov(obs: &ObservedSeries, k: i64) -> Result<DMatrix<f64>> {
    check_lag(k, obs.samples())?;
    let s = obs.node_count();
    Ok(DMatrix::from_fn(s, s, |i, j| {
        lag_cov_entry(obs.row(i), obs.row(j), k)
    }))
}

/// Lag-covariance feature of one ordered pair from its two series only.
pub fn pairwise_feature(series_i: &[f64], series_j: &[f64], lags: LagWindow) -> Result<Vec<f64>> {
    if series_i.len() != series_j.len() {
        return Err(invalid("pair series differ in length"));
    }
    let n = series_i.len();
    check_lag(lags.min, n)?;
    check_lag(lags.max, n)?;
    Ok(lags
        .lags()
        .map(|k| lag_cov_entry(series_i, series_j, k))
        .collect())
}

/// One feature vector per ordered pair of observed nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    node_ids: Vec<usize>,
    pairs: Vec<(usize, usize)>,
    lags: LagWindow,
    leading: usize,
    dim: usize,
    values: Vec<f64>,
    labels: Option<Vec<bool>>,
    normalized: bool,
}

impl FeatureTensor {
    /// Assembles a tensor from raw parts; pairs index into `node_ids`.
    pub fn from_parts(
        node_ids: Vec<usize>,
        pairs: Vec<(usize, usize)>,
        lags: LagWindow,
        leading: usize,
        values: Vec<f64>,
        labels: Option<Vec<bool>>,
        normalized: bool,
    ) -> Result<Self> {
        let dim = leading + lags.len();
        if values.len() != pairs.len() * dim {
            return Err(invalid(format!(
                "expected {} feature values, got {}",
                pairs.len() * dim,
                values.len()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != pairs.len() {
                return Err(invalid("labels must cover every pair"));
            }
        }
        let k = node_ids.len();
        if pairs.iter().any(|&(i, j)| i == j || i >= k || j >= k) {
            return Err(invalid("pairs must be distinct positions inside the node set"));
        }
        Ok(Self {
            node_ids,
            pairs,
            lags,
            leading,
            dim,
            values,
            labels,
            normalized,
        })
    }

    pub fn node_ids(&self) -> &[usize] {
        &self.node_ids
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn lags(&self) -> LagWindow {
        self.lags
    }

    /// Number of leading components added by [`augment`].
    pub fn leading(&self) -> usize {
        self.leading
    }

    /// Vector length `M`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn vector(&self, p: usize) -> &[f64] {
        &self.values[p * self.dim..(p + 1) * self.dim]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Attaches ground truth labels from a graph over the original node ids.
    pub fn with_truth(mut self, truth: &Graph) -> Result<Self> {
        let support = truth.support_on(&self.node_ids)?;
        self.labels = Some(
            self.pairs
                .iter()
                .map(|&(i, j)| support.is_connected(i, j))
                .collect(),
        );
        Ok(self)
    }

    /// Largest absolute entry over all pairs.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Builds the lag-covariance tensor for every ordered pair of observed nodes.
///
/// Pairs are enumerated in [`ordered_pairs`] order. With a `truth` graph,
/// pair `(i, j)` is labelled connected iff `A_{m_i m_j} != 0`.
pub fn build_feature_tensor(
    obs: &ObservedSeries,
    lags: LagWindow,
    truth: Option<&Graph>,
) -> Result<FeatureTensor> {
    let n = obs.samples();
    check_lag(lags.min, n)?;
    check_lag(lags.max, n)?;
    let s = obs.node_count();
    let reach = lags.reach();
    // table[(i * s + j) * (reach + 1) + k] = [R_k]_ij for k = 0..=reach.
    // Negative lags read the transposed entry, which is the same
    // lag_cov_entry call pairwise_feature makes.
    let mut table = vec![0.0; s * s * (reach + 1)];
    let needed: Vec<usize> = (0..=reach)
        .filter(|&k| lags.index_of(k as i64).is_some() || lags.index_of(-(k as i64)).is_some())
        .collect();
    for (i, j) in ordered_pairs(s) {
        let base = (i * s + j) * (reach + 1);
        for &k in &needed {
            table[base + k] = lag_cov_entry(obs.row(i), obs.row(j), k as i64);
        }
    }
    let pairs: Vec<_> = ordered_pairs(s).collect();
    let mut values = Vec::with_capacity(pairs.len() * lags.len());
    for &(i, j) in &pairs {
        for k in lags.lags() {
            let v = if k >= 0 {
                table[(i * s + j) * (reach + 1) + k as usize]
            } else {
                table[(j * s + i) * (reach + 1) + k.unsigned_abs() as usize]
            };
            values.push(v);
        }
    }
    let tensor = FeatureTensor::from_parts(
        obs.node_ids().to_vec(),
        pairs,
        lags,
        0,
        values,
        None,
        false,
    )?;
    match truth {
        Some(g) => tensor.with_truth(g),
        None => Ok(tensor),
    }
}

/// Divides every vector by the largest absolute entry over all pairs.
pub fn normalize(t: &FeatureTensor) -> Result<FeatureTensor> {
    if t.normalized {
        return Err(invalid("feature tensor is already normalized"));
    }
    let scale = t.max_abs();
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Degenerate(
            "cannot normalize an all-zero feature tensor".into(),
        ));
    }
    let mut out = t.clone();
    for v in &mut out.values {
        *v /= scale;
    }
    out.normalized = true;
    Ok(out)
}

/// Prepends `[e]_ij` to the vector of every pair `(i, j)`.
pub fn augment(t: &FeatureTensor, e: &DMatrix<f64>) -> Result<FeatureTensor> {
    let s = t.node_ids.len();
    if e.nrows() != s || e.ncols() != s {
        return Err(invalid(format!(
            "estimate is {}x{}, tensor covers {s} nodes",
            e.nrows(),
            e.ncols()
        )));
    }
    let dim = t.dim + 1;
    let mut values = Vec::with_capacity(t.len() * dim);
    for (p, &(i, j)) in t.pairs.iter().enumerate() {
        values.push(e[(i, j)]);
        values.extend_from_slice(t.vector(p));
    }
    Ok(FeatureTensor {
        node_ids: t.node_ids.clone(),
        pairs: t.pairs.clone(),
        lags: t.lags,
        leading: t.leading + 1,
        dim,
        values,
        labels: t.labels.clone(),
        normalized: t.normalized,
    })
}

/// Labels of a tensor as a [`Support`] over the observed positions.
pub fn support_from_labels(t: &FeatureTensor) -> Option<Support> {
    let labels = t.labels()?;
    let s = t.node_ids.len();
    let mut grid = vec![false; s * s];
    for (&(i, j), &l) in t.pairs.iter().zip(labels) {
        grid[i * s + j] = l;
    }
    Some(Support::from_fn(s, |i, j| grid[i * s + j]))
}
