//! Euclidean distance between the convex hulls of two finite point sets.
//!
//! The distance is the norm of the minimum-norm point of the difference
//! polytope `conv{c_i - d_j}`. It is found with away-step Frank-Wolfe using
//! exact line search, which converges linearly on polytopes. Every iterate
//! `z` is a feasible difference, so `|z|` bounds the distance from above,
//! and `min_p <p, z> / |z|` bounds it from below.

use alloc::vec;

#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullOptions {
    /// Absolute tolerance on the distance; also the intersection threshold.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for HullOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HullDistance {
    /// Hulls are disjoint; `distance` is within `tolerance` of the true value
    /// and never below it.
    Separated { distance: f64, iterations: usize },
    /// Hulls intersect (distance below `tolerance`).
    Intersecting { iterations: usize },
}

impl HullDistance {
    pub fn distance(&self) -> f64 {
        match *self {
            HullDistance::Separated { distance, .. } => distance,
            HullDistance::Intersecting { .. } => 0.0,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Atom {
    c: usize,
    d: usize,
    weight: f64,
}

/// Distance between `conv(first)` and `conv(second)`.
pub fn hull_distance(first: &[&[f64]], second: &[&[f64]], opts: HullOptions) -> Result<HullDistance> {
    if first.is_empty() || second.is_empty() {
        return Err(invalid("both point sets must be non-empty"));
    }
    let dim = first[0].len();
    if first.iter().chain(second).any(|p| p.len() != dim) {
        return Err(invalid("points differ in dimension"));
    }
    let atom_vec = |c: usize, d: usize, out: &mut [f64]| {
        for ((o, x), y) in out.iter_mut().zip(first[c]).zip(second[d]) {
            *o = x - y;
        }
    };

    let mut z = vec![0.0; dim];
    atom_vec(0, 0, &mut z);
    let mut active = vec![Atom {
        c: 0,
        d: 0,
        weight: 1.0,
    }];
    let mut zc = vec![0.0; first.len()];
    let mut zd = vec![0.0; second.len()];
    let mut dir = vec![0.0; dim];
    let mut lower = 0.0;
    let mut upper = f64::INFINITY;

    for it in 0..opts.max_iterations {
        if it % 64 == 63 {
            // Rebuild the iterate from its atoms to shed accumulated rounding.
            z.iter_mut().for_each(|v| *v = 0.0);
            for a in &active {
                for ((v, x), y) in z.iter_mut().zip(first[a.c]).zip(second[a.d]) {
                    *v += a.weight * (x - y);
                }
            }
        }
        for (v, p) in zc.iter_mut().zip(first) {
            *v = dot(&z, p);
        }
        for (v, p) in zd.iter_mut().zip(second) {
            *v = dot(&z, p);
        }
        let zz = dot(&z, &z);
        upper = zz.sqrt();
        if upper < opts.tolerance {
            return Ok(HullDistance::Intersecting { iterations: it });
        }
        let (fw_c, _) = argmin(&zc);
        let (fw_d, _) = argmax(&zd);
        let z_fw = zc[fw_c] - zd[fw_d];
        lower = (z_fw / upper).max(0.0);
        if upper - lower <= opts.tolerance {
            return Ok(HullDistance::Separated {
                distance: upper,
                iterations: it,
            });
        }

        let mut away = 0;
        for (k, a) in active.iter().enumerate() {
            if zc[a.c] - zd[a.d] > zc[active[away].c] - zd[active[away].d] {
                away = k;
            }
        }
        let z_away = zc[active[away].c] - zd[active[away].d];
        let fw_gap = zz - z_fw;
        let away_gap = z_away - zz;

        let (step_max, is_fw) = if fw_gap >= away_gap || active.len() == 1 {
            atom_vec(fw_c, fw_d, &mut dir);
            for (d, v) in dir.iter_mut().zip(&z) {
                *d -= v;
            }
            (1.0, true)
        } else {
            let w = active[away].weight;
            atom_vec(active[away].c, active[away].d, &mut dir);
            for (d, v) in dir.iter_mut().zip(&z) {
                *d = v - *d;
            }
            (w / (1.0 - w), false)
        };
        let dd = dot(&dir, &dir);
        if dd == 0.0 {
            break;
        }
        let step = (-dot(&z, &dir) / dd).clamp(0.0, step_max);
        for (v, d) in z.iter_mut().zip(&dir) {
            *v += step * d;
        }
        if is_fw {
            if step >= 1.0 {
                active.clear();
                active.push(Atom {
                    c: fw_c,
                    d: fw_d,
                    weight: 1.0,
                });
                atom_vec(fw_c, fw_d, &mut z);
            } else {
                for a in active.iter_mut() {
                    a.weight *= 1.0 - step;
                }
                match active.iter_mut().find(|a| a.c == fw_c && a.d == fw_d) {
                    Some(a) => a.weight += step,
                    None => active.push(Atom {
                        c: fw_c,
                        d: fw_d,
                        weight: step,
                    }),
                }
            }
        } else {
            for a in active.iter_mut() {
                a.weight *= 1.0 + step;
            }
            if step >= step_max {
                active.swap_remove(away);
            } else {
                active[away].weight -= step;
            }
        }
        active.retain(|a| a.weight > 0.0);
    }
    Err(Error::HullNoConvergence {
        iterations: opts.max_iterations,
        lower,
        upper,
    })
}

fn argmin(v: &[f64]) -> (usize, f64) {
    v.iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, x)| if x < best.1 { (i, x) } else { best })
}

fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, x)| if x > best.1 { (i, x) } else { best })
}
