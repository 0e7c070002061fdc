//! Two-component univariate Gaussian mixture fitted by EM.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::estimators::MatrixEstimate;
use crate::graph::ordered_pairs;

pub const GMM_TOLERANCE: f64 = 1e-8;
pub const GMM_MAX_ITERATIONS: usize = 500;

/// Variances below this fraction of the data variance count as collapsed.
const COLLAPSE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub mean: f64,
    pub variance: f64,
    pub weight: f64,
}

impl Component {
    fn log_density(&self, x: f64) -> f64 {
        let d = x - self.mean;
        self.weight.ln() - 0.5 * (2.0 * PI * self.variance).ln() - d * d / (2.0 * self.variance)
    }

    fn moments(values: &[f64], weight: f64) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            mean,
            variance,
            weight,
        }
    }
}

/// `upper` has the larger mean and stands for connected pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMixture1D {
    pub lower: Component,
    pub upper: Component,
    pub decision_boundary: f64,
}

impl GaussianMixture1D {
    fn new(a: Component, b: Component) -> Self {
        let (lower, upper) = if b.mean >= a.mean { (a, b) } else { (b, a) };
        Self {
            lower,
            upper,
            decision_boundary: boundary(&lower, &upper),
        }
    }

    /// Posterior probability of the upper component.
    pub fn posterior_upper(&self, x: f64) -> f64 {
        let lu = self.upper.log_density(x);
        let ll = self.lower.log_density(x);
        1.0 / (1.0 + (ll - lu).exp())
    }

    /// Connected iff the upper posterior is strictly above one half.
    pub fn classify(&self, x: f64) -> bool {
        self.upper.log_density(x) > self.lower.log_density(x)
    }

    fn log_likelihood(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .map(|&x| log_add(self.lower.log_density(x), self.upper.log_density(x)))
            .sum::<f64>()
            / values.len() as f64
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Where the two weighted densities cross, preferring a crossing between
/// the means.
fn boundary(lo: &Component, up: &Component) -> f64 {
    // log w_u N_u(x) - log w_l N_l(x) = a x^2 + b x + c
    let a = 0.5 / lo.variance - 0.5 / up.variance;
    let b = up.mean / up.variance - lo.mean / lo.variance;
    let c = lo.mean * lo.mean / (2.0 * lo.variance) - up.mean * up.mean / (2.0 * up.variance)
        + (up.weight / lo.weight).ln()
        - 0.5 * (up.variance / lo.variance).ln();
    let mid = 0.5 * (lo.mean + up.mean);
    if a.abs() < 1e-12 * (b.abs() + 1e-300) {
        return if b == 0.0 { mid } else { -c / b };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return mid;
    }
    let s = disc.sqrt();
    let r1 = (-b + s) / (2.0 * a);
    let r2 = (-b - s) / (2.0 * a);
    let inside = |r: f64| r >= lo.mean && r <= up.mean;
    match (inside(r1), inside(r2)) {
        (true, _) => r1,
        (_, true) => r2,
        _ if (r1 - mid).abs() <= (r2 - mid).abs() => r1,
        _ => r2,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub model: GaussianMixture1D,
    /// Mean log-likelihood after initialization and after every EM step.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
    /// Whether the quartile re-initialization was needed.
    pub reinitialized: bool,
}

/// Fits the mixture by EM, starting from a median split and falling back
/// once to an upper-quartile split if a component collapses.
pub fn gmm_fit(values: &[f64]) -> Result<GmmFit> {
    if values.len() < 4 {
        return Err(invalid(format!("mixture fit needs at least 4 values, got {}", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("mixture fit needs finite values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total = Component::moments(values, 1.0).variance;
    if !(total > 0.0) {
        return Err(Error::Degenerate("all entries are equal".into()));
    }
    let floor = COLLAPSE * total;
    match run_em(values, &sorted, sorted.len() / 2, floor) {
        Ok(fit) => Ok(fit),
        Err(Error::Degenerate(_)) => {
            let mut fit = run_em(values, &sorted, (3 * sorted.len()) / 4, floor)?;
            fit.reinitialized = true;
            Ok(fit)
        }
        Err(e) => Err(e),
    }
}

fn run_em(values: &[f64], sorted: &[f64], split: usize, floor: f64) -> Result<GmmFit> {
    let w = split as f64 / sorted.len() as f64;
    let a = Component::moments(&sorted[..split], w);
    let b = Component::moments(&sorted[split..], 1.0 - w);
    check(&a, floor)?;
    check(&b, floor)?;
    let mut model = GaussianMixture1D::new(a, b);
    let mut trace = Vec::with_capacity(16);
    trace.push(model.log_likelihood(values));
    let n = values.len() as f64;
    for _ in 0..GMM_MAX_ITERATIONS {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        let (mut t0, mut t1, mut t2) = (0.0, 0.0, 0.0);
        for &x in values {
            let r = model.posterior_upper(x);
            s0 += r;
            s1 += r * x;
            t0 += 1.0 - r;
            t1 += (1.0 - r) * x;
        }
        if s0 <= 0.0 || t0 <= 0.0 {
            return Err(Error::Degenerate("a mixture component lost all mass".into()));
        }
        let mu_u = s1 / s0;
        let mu_l = t1 / t0;
        for &x in values {
            let r = model.posterior_upper(x);
            s2 += r * (x - mu_u) * (x - mu_u);
            t2 += (1.0 - r) * (x - mu_l) * (x - mu_l);
        }
        let up = Component {
            mean: mu_u,
            variance: s2 / s0,
            weight: s0 / n,
        };
        let lo = Component {
            mean: mu_l,
            variance: t2 / t0,
            weight: t0 / n,
        };
        check(&up, floor)?;
        check(&lo, floor)?;
        model = GaussianMixture1D::new(lo, up);
        let ll = model.log_likelihood(values);
        let prev = *trace.last().unwrap();
        if ll < prev - 1e-9 * prev.abs().max(1.0) {
            return Err(Error::Invariant(format!(
                "EM log-likelihood decreased from {prev} to {ll}"
            )));
        }
        trace.push(ll);
        if (ll - prev).abs() < GMM_TOLERANCE {
            return Ok(GmmFit {
                model,
                log_likelihood: trace,
                converged: true,
                reinitialized: false,
            });
        }
    }
    Ok(GmmFit {
        model,
        log_likelihood: trace,
        converged: false,
        reinitialized: false,
    })
}

fn check(c: &Component, floor: f64) -> Result<()> {
    if c.variance.is_finite() && c.variance > floor {
        Ok(())
    } else {
        Err(Error::Degenerate(format!(
            "mixture component at {} collapsed (variance {:e})",
            c.mean, c.variance
        )))
    }
}

/// Thresholds the off-diagonal entries of an estimate with a fitted mixture.
/// Predictions follow [`ordered_pairs`] order.
pub fn gmm_fit_classify(e: &MatrixEstimate) -> Result<Vec<bool>> {
    let s = e.values.nrows();
    if e.values.ncols() != s {
        return Err(invalid("estimate must be square"));
    }
    let entries: Vec<f64> = ordered_pairs(s).map(|(i, j)| e.values[(i, j)]).collect();
    let fit = gmm_fit(&entries)?;
    Ok(entries.iter().map(|&x| fit.model.classify(x)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::EstimatorKind;
    use alloc::vec;
    use nalgebra::DMatrix;

    #[test]
    fn separated_clusters() {
        let v = [0.01, 0.02, 0.03, 0.49, 0.50, 0.52];
        let fit = gmm_fit(&v).unwrap();
        let labels: Vec<bool> = v.iter().map(|&x| fit.model.classify(x)).collect();
        assert_eq!(labels, vec![false, false, false, true, true, true]);
        let m = fit.model;
        assert!((m.lower.weight + m.upper.weight - 1.0).abs() < 1e-12);
        assert!(m.decision_boundary > 0.03 && m.decision_boundary < 0.49);
    }

    #[test]
    fn equal_entries_are_degenerate() {
        assert!(matches!(gmm_fit(&[0.3; 6]), Err(Error::Degenerate(_))));
        assert!(gmm_fit(&[0.1, 0.2, 0.3]).is_err());
    }

    #[test]
    fn classify_matrix_in_pair_order() {
        let mut v = DMatrix::from_element(3, 3, 0.0);
        v[(0, 1)] = 0.5;
        v[(1, 0)] = 0.52;
        v[(0, 2)] = 0.01;
        v[(2, 0)] = 0.03;
        v[(1, 2)] = 0.02;
        v[(2, 1)] = 0.49;
        let e = MatrixEstimate {
            kind: EstimatorKind::OneLag,
            values: v,
            samples: 10,
        };
        assert_eq!(
            gmm_fit_classify(&e).unwrap(),
            vec![true, false, true, false, false, true]
        );
    }

    #[test]
    fn log_likelihood_is_monotone() {
        let mut x = 0.37_f64;
        let v: Vec<f64> = (0..200)
            .map(|i| {
                x = (x * 3.9 * (1.0 - x)).clamp(1e-6, 1.0 - 1e-6);
                if i % 3 == 0 { 1.0 + x } else { x * 0.5 }
            })
            .collect();
        let fit = gmm_fit(&v).unwrap();
        for w in fit.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn collapsed_half_falls_back_to_quartiles() {
        // The lower half is identical, so the median split collapses.
        let v = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.4, 0.5, 0.6, 0.7, 0.8];
        match gmm_fit(&v) {
            Ok(fit) => assert!(fit.reinitialized),
            Err(e) => assert!(matches!(e, Error::Degenerate(_))),
        }
    }
}
