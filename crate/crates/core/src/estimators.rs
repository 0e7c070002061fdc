//! Matrix-valued structure estimators and identifiability gaps.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use nalgebra::DMatrix;

use crate::dynamics::ObservedSeries;
#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::features::{empirical_lag_cov, FeatureTensor};
use crate::graph::Support;
use crate::hull::{hull_distance, HullDistance, HullOptions};

/// Condition number above which the Granger solve refuses to proceed.
pub const GRANGER_MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    Granger,
    OneLag,
    Residual,
    R1MinusR3,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Granger,
        EstimatorKind::OneLag,
        EstimatorKind::Residual,
        EstimatorKind::R1MinusR3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Granger => "granger",
            EstimatorKind::OneLag => "one_lag",
            EstimatorKind::Residual => "residual",
            EstimatorKind::R1MinusR3 => "r1_minus_r3",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid(format!("unknown estimator '{s}'")))
    }
}

/// An `|S| x |S|` estimate whose entry `(i, j)` scores the link between the
/// i-th and j-th observed nodes. Diagonal entries are never classified.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixEstimate {
    pub kind: EstimatorKind,
    pub values: DMatrix<f64>,
    pub samples: usize,
}

/// `[R_1]_S ([R_0]_S)^{-1}`, solved as `R_0^T X^T = R_1^T`.
pub fn granger(obs: &ObservedSeries) -> Result<MatrixEstimate> {
    let r0 = empirical_lag_cov(obs, 0)?;
    let r1 = empirical_lag_cov(obs, 1)?;
    let sv = r0.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition < GRANGER_MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }
    let solved = r0
        .transpose()
        .lu()
        .solve(&r1.transpose())
        .ok_or(Error::Singular { condition })?;
    Ok(MatrixEstimate {
        kind: EstimatorKind::Granger,
        values: solved.transpose(),
        samples: obs.samples(),
    })
}

/// `[R_1]_S`.
pub fn one_lag(obs: &ObservedSeries) -> Result<MatrixEstimate> {
    Ok(MatrixEstimate {
        kind: EstimatorKind::OneLag,
        values: empirical_lag_cov(obs, 1)?,
        samples: obs.samples(),
    })
}

/// `[R_1]_S - [R_0]_S`.
pub fn residual(obs: &ObservedSeries) -> Result<MatrixEstimate> {
    let values = empirical_lag_cov(obs, 1)? - empirical_lag_cov(obs, 0)?;
    Ok(MatrixEstimate {
        kind: EstimatorKind::Residual,
        values,
        samples: obs.samples(),
    })
}

/// `[R_1]_S - [R_3]_S`, which tends to `sigma2 * A_S` for symmetric `A`.
pub fn r1_minus_r3(obs: &ObservedSeries) -> Result<MatrixEstimate> {
    let values = empirical_lag_cov(obs, 1)? - empirical_lag_cov(obs, 3)?;
    Ok(MatrixEstimate {
        kind: EstimatorKind::R1MinusR3,
        values,
        samples: obs.samples(),
    })
}

pub fn estimate(kind: EstimatorKind, obs: &ObservedSeries) -> Result<MatrixEstimate> {
    match kind {
        EstimatorKind::Granger => granger(obs),
        EstimatorKind::OneLag => one_lag(obs),
        EstimatorKind::Residual => residual(obs),
        EstimatorKind::R1MinusR3 => r1_minus_r3(obs),
    }
}

/// Smallest entry over connected pairs minus largest entry over disconnected
/// pairs, diagonal excluded. Positive iff some threshold classifies every
/// pair correctly.
pub fn gap_matrix(values: &DMatrix<f64>, truth: &Support) -> Result<f64> {
    let s = truth.size();
    if values.nrows() != s || values.ncols() != s {
        return Err(invalid(format!(
            "estimate is {}x{}, truth covers {s} nodes",
            values.nrows(),
            values.ncols()
        )));
    }
    let mut min_connected = f64::INFINITY;
    let mut max_disconnected = f64::NEG_INFINITY;
    for i in 0..s {
        for j in 0..s {
            if i == j {
                continue;
            }
            let v = values[(i, j)];
            if truth.is_connected(i, j) {
                min_connected = min_connected.min(v);
            } else {
                max_disconnected = max_disconnected.max(v);
            }
        }
    }
    if min_connected == f64::INFINITY {
        return Err(Error::UndefinedGap("no connected pair"));
    }
    if max_disconnected == f64::NEG_INFINITY {
        return Err(Error::UndefinedGap("no disconnected pair"));
    }
    Ok(min_connected - max_disconnected)
}

/// Identifiability gap of a labelled feature tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TensorGap {
    /// Distance between the convex hulls of the two classes.
    Separated(f64),
    /// The hulls intersect: no separating hyperplane exists.
    Inseparable,
}

impl TensorGap {
    /// The gap value, zero when inseparable.
    pub fn value(self) -> f64 {
        match self {
            TensorGap::Separated(d) => d,
            TensorGap::Inseparable => 0.0,
        }
    }

    pub fn is_separated(self) -> bool {
        matches!(self, TensorGap::Separated(_))
    }
}

/// Widest margin between parallel hyperplanes separating the connected and
/// disconnected feature vectors, computed as the distance between the
/// convex hulls of the two classes.
pub fn gap_tensor(t: &FeatureTensor) -> Result<TensorGap> {
    gap_tensor_with(t, HullOptions::default())
}

pub fn gap_tensor_with(t: &FeatureTensor, opts: HullOptions) -> Result<TensorGap> {
    let labels = t
        .labels()
        .ok_or_else(|| invalid("gap needs a labelled tensor"))?;
    let (connected, disconnected): (Vec<_>, Vec<_>) = t
        .vectors()
        .zip(labels)
        .partition(|(_, &l)| l);
    if connected.is_empty() {
        return Err(Error::UndefinedGap("no connected pair"));
    }
    if disconnected.is_empty() {
        return Err(Error::UndefinedGap("no disconnected pair"));
    }
    let c: Vec<&[f64]> = connected.into_iter().map(|(v, _)| v).collect();
    let d: Vec<&[f64]> = disconnected.into_iter().map(|(v, _)| v).collect();
    Ok(match hull_distance(&c, &d, opts)? {
        HullDistance::Separated { distance, .. } => TensorGap::Separated(distance),
        HullDistance::Intersecting { .. } => TensorGap::Inseparable,
    })
}

/// Whether an augmented tensor's gap obeys the stacking bound
/// `gap_augmented >= sqrt(gap_a^2 + gap_e^2)` (up to `1e-6`).
///
/// Meaningful when both individual gaps are positive.
pub fn stacking_check(gap_a: f64, gap_e: f64, gap_augmented: f64) -> bool {
    gap_augmented >= gap_a.hypot(gap_e) - 1e-6
}
