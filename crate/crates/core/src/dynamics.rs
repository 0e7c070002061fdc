//! Simulation of `y(t+1) = A y(t) + x(t+1)` and partial observation.
//!
//! # Noise stream layout
//!
//! Returned samples are indexed `t = 0..n`. The burn-in steps before them are
//! `t = -burn_in..0`, and the state just before the first burn-in step is
//! zero. The excitation `x(t)` is drawn from ChaCha8 stream number
//! `t as i64 as u64` of the run seed, so `x(t)` depends only on `(seed, t)`.
//! Changing `burn_in` therefore prepends history without reshuffling the
//! noise of the returned window, and simulations of different lengths with
//! the same seed agree on their common prefix.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::graph::InteractionMatrix;

/// Node time series stored node-major: `row(i)[t]` is node `i` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    node_ids: Vec<usize>,
    samples: usize,
    data: Vec<f64>,
    sigma2: f64,
}

/// A series restricted to an observed node set.
pub type ObservedSeries = Series;

impl Series {
    /// Builds a series from per-node rows.
    pub fn from_rows(node_ids: Vec<usize>, rows: &[Vec<f64>], sigma2: f64) -> Result<Self> {
        if node_ids.len() != rows.len() || rows.is_empty() {
            return Err(invalid("need one non-empty row per node id"));
        }
        if node_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("node ids must be strictly increasing"));
        }
        let samples = rows[0].len();
        if samples == 0 || rows.iter().any(|r| r.len() != samples) {
            return Err(invalid("rows must share a positive length"));
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("series contains non-finite values".into()));
        }
        Ok(Self {
            node_ids,
            samples,
            data,
            sigma2,
        })
    }

    /// Node ids of the rows (`m_1 < m_2 < ...`).
    pub fn node_ids(&self) -> &[usize] {
        &self.node_ids
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    /// Number of time samples `n`.
    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.samples..(i + 1) * self.samples]
    }

    /// The first `n` samples of every row.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.samples {
            return Err(invalid(format!(
                "prefix length {n} outside 1..={}",
                self.samples
            )));
        }
        let mut data = Vec::with_capacity(n * self.node_count());
        for i in 0..self.node_count() {
            data.extend_from_slice(&self.row(i)[..n]);
        }
        Ok(Self {
            node_ids: self.node_ids.clone(),
            samples: n,
            data,
            sigma2: self.sigma2,
        })
    }

    /// Multiplies every sample by `c`; the recorded noise variance scales by `c^2`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            node_ids: self.node_ids.clone(),
            samples: self.samples,
            data: self.data.iter().map(|v| v * c).collect(),
            sigma2: self.sigma2 * c * c,
        }
    }
}

/// Simulates the network for `n` samples after `burn_in` discarded steps.
pub fn simulate(
    a: &InteractionMatrix,
    sigma2: f64,
    n: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Series> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(invalid(format!("noise variance must be positive, got {sigma2}")));
    }
    if n == 0 {
        return Err(invalid("sample count must be positive"));
    }
    let rho = a.spectral_radius()?;
    if rho >= 1.0 {
        return Err(Error::Unstable(rho));
    }
    let nodes = a.node_count();
    let weights = a.weights();
    let sigma = sigma2.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = DVector::zeros(nodes);
    let mut next = DVector::zeros(nodes);
    let mut data = vec![0.0; nodes * n];
    let start = -(burn_in as i64);
    for t in start..n as i64 {
        rng.set_stream(t as u64);
        rng.set_word_pos(0);
        weights.mul_to(&y, &mut next);
        for v in next.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += sigma * z;
        }
        core::mem::swap(&mut y, &mut next);
        if t >= 0 {
            let t = t as usize;
            for (i, v) in y.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite state at node {i}, step {t}"
                    )));
                }
                data[i * n + t] = *v;
            }
        }
    }
    Ok(Series {
        node_ids: (0..nodes).collect(),
        samples: n,
        data,
        sigma2,
    })
}

/// Restricts a series to the observed nodes `s` (ids in the full series).
pub fn observe(series: &Series, s: &[usize]) -> Result<ObservedSeries> {
    if s.is_empty() {
        return Err(invalid("observed set is empty"));
    }
    if s.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("observed nodes must be strictly increasing without duplicates"));
    }
    let mut data = Vec::with_capacity(s.len() * series.samples);
    for &m in s {
        let row = series
            .node_ids
            .binary_search(&m)
            .map_err(|_| invalid(format!("observed node {m} not present in series")))?;
        data.extend_from_slice(series.row(row));
    }
    Ok(Series {
        node_ids: s.to_vec(),
        samples: series.samples,
        data,
        sigma2: series.sigma2,
    })
}

const SERIES_TRUNCATION: f64 = 1e-14;
const SERIES_MAX_TERMS: usize = 1_000_000;

/// Stationary covariance `R_0 = sum_m sigma2 A^m (A^m)^T`.
pub fn stationary_cov(a: &InteractionMatrix, sigma2: f64) -> Result<DMatrix<f64>> {
    let rho = a.spectral_radius()?;
    if rho >= 1.0 {
        return Err(Error::Unstable(rho));
    }
    let n = a.node_count();
    let weights = a.weights();
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut r0 = DMatrix::<f64>::zeros(n, n);
    for _ in 0..SERIES_MAX_TERMS {
        let term = &power * power.transpose() * sigma2;
        r0 += &term;
        if term.amax() < SERIES_TRUNCATION {
            return Ok(r0);
        }
        power = weights * &power;
    }
    Err(Error::Numeric("covariance series did not converge".into()))
}

/// Stationary lag covariance `R_k = A^k R_0` for `k >= 0`.
pub fn true_lag_cov(a: &InteractionMatrix, sigma2: f64, k: usize) -> Result<DMatrix<f64>> {
    let mut r = stationary_cov(a, sigma2)?;
    for _ in 0..k {
        r = a.weights() * r;
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coupled_pair() -> InteractionMatrix {
        InteractionMatrix::from_weights(DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]))
            .unwrap()
    }

    #[test]
    fn zero_dynamics_is_white_noise() {
        let a = InteractionMatrix::from_weights(DMatrix::zeros(3, 3)).unwrap();
        let s = simulate(&a, 1.0, 100_000, 10, 3).unwrap();
        for i in 0..3 {
            let var = s.row(i).iter().map(|v| v * v).sum::<f64>() / 1e5;
            assert!((var - 1.0).abs() < 0.03, "var {var}");
        }
        let cross = s
            .row(0)
            .iter()
            .zip(s.row(1))
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / 1e5;
        assert!(cross.abs() < 0.03);
    }

    #[test]
    fn simulation_is_deterministic() {
        let a = coupled_pair();
        assert_eq!(
            simulate(&a, 1.0, 500, 20, 11).unwrap(),
            simulate(&a, 1.0, 500, 20, 11).unwrap()
        );
    }

    #[test]
    fn prefix_matches_shorter_simulation() {
        let a = coupled_pair();
        let long = simulate(&a, 0.5, 300, 50, 4).unwrap();
        let short = simulate(&a, 0.5, 120, 50, 4).unwrap();
        assert_eq!(long.prefix(120).unwrap(), short);
    }

    #[test]
    fn burn_in_only_prepends_history() {
        // alpha = 0.5: 10 * log(1e-12) / log(0.5) ~ 400 steps.
        let a = coupled_pair();
        let s1 = simulate(&a, 1.0, 200, 400, 8).unwrap();
        let s2 = simulate(&a, 1.0, 200, 900, 8).unwrap();
        for i in 0..2 {
            for (x, y) in s1.row(i).iter().zip(s2.row(i)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_scales_with_sigma() {
        let a = coupled_pair();
        let s1 = simulate(&a, 1.0, 100, 10, 2).unwrap();
        let s4 = simulate(&a, 4.0, 100, 10, 2).unwrap();
        for (x, y) in s1.row(0).iter().zip(s4.row(0)) {
            assert!((2.0 * x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn unstable_and_bad_arguments_rejected() {
        let a = InteractionMatrix::from_weights(DMatrix::from_row_slice(
            2,
            2,
            &[0.6, 0.5, 0.5, 0.6],
        ))
        .unwrap();
        assert!(matches!(simulate(&a, 1.0, 10, 0, 0), Err(Error::Unstable(_))));
        assert!(matches!(true_lag_cov(&a, 1.0, 0), Err(Error::Unstable(_))));
        let b = coupled_pair();
        assert!(simulate(&b, 0.0, 10, 0, 0).is_err());
        assert!(simulate(&b, 1.0, 0, 0, 0).is_err());
    }

    #[test]
    fn observe_restricts_rows() {
        let a = InteractionMatrix::from_weights(DMatrix::zeros(5, 5)).unwrap();
        let full = simulate(&a, 1.0, 50, 0, 1).unwrap();
        let all = observe(&full, &[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(all, full);
        let one = observe(&full, &[4]).unwrap();
        assert_eq!(one.row(0), full.row(4));
        assert_eq!(one.node_ids(), &[4]);
        assert!(observe(&full, &[5]).is_err());
        assert!(observe(&full, &[1, 1]).is_err());
        assert!(observe(&full, &[2, 1]).is_err());
        assert!(observe(&full, &[]).is_err());
    }

    #[test]
    fn oracle_closed_forms() {
        let a = coupled_pair();
        let r0 = true_lag_cov(&a, 1.0, 0).unwrap();
        let r1 = true_lag_cov(&a, 1.0, 1).unwrap();
        let r3 = true_lag_cov(&a, 1.0, 3).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() < 1e-12;
        assert!(close(r0[(0, 0)], 4.0 / 3.0) && close(r0[(0, 1)], 0.0));
        assert!(close(r1[(0, 1)], 2.0 / 3.0) && close(r1[(0, 0)], 0.0));
        assert!(close(r3[(1, 0)], 1.0 / 6.0));
        let diff = r1 - r3;
        assert!(close(diff[(0, 1)], 0.5) && close(diff[(0, 0)], 0.0));
    }

    #[test]
    fn oracle_for_zero_matrix() {
        let a = InteractionMatrix::from_weights(DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(true_lag_cov(&a, 2.0, 0).unwrap(), DMatrix::identity(3, 3) * 2.0);
        assert_eq!(true_lag_cov(&a, 2.0, 2).unwrap(), DMatrix::zeros(3, 3));
    }
}
