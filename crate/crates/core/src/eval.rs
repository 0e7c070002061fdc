//! Classification accuracy against ground truth.

use alloc::collections::BTreeMap;
use alloc::format;

use crate::error::{invalid, Result};
use crate::graph::{ordered_pairs, Support};

/// Fraction of off-diagonal pairs whose predicted label matches `truth`.
///
/// Every ordered pair `i != j` of the support must be predicted exactly once.
pub fn accuracy(predictions: &[((usize, usize), bool)], truth: &Support) -> Result<f64> {
    let s = truth.size();
    let mut seen = BTreeMap::new();
    for &((i, j), label) in predictions {
        if i >= s || j >= s || i == j {
            return Err(invalid(format!("pair ({i}, {j}) is not an off-diagonal pair of {s} nodes")));
        }
        if seen.insert((i, j), label).is_some() {
            return Err(invalid(format!("pair ({i}, {j}) predicted twice")));
        }
    }
    let total = s * s.saturating_sub(1);
    if total == 0 {
        return Err(invalid("accuracy needs at least two observed nodes"));
    }
    let mut correct = 0usize;
    for (i, j) in ordered_pairs(s) {
        let label = *seen
            .get(&(i, j))
            .ok_or_else(|| invalid(format!("no prediction for pair ({i}, {j})")))?;
        if label == truth.is_connected(i, j) {
            correct += 1;
        }
    }
    Ok(correct as f64 / total as f64)
}

/// Convenience form for labels listed in [`ordered_pairs`] order.
pub fn accuracy_ordered(labels: &[bool], truth: &Support) -> Result<f64> {
    let s = truth.size();
    if labels.len() != s * s.saturating_sub(1) {
        return Err(invalid(format!(
            "expected {} labels, got {}",
            s * s.saturating_sub(1),
            labels.len()
        )));
    }
    let preds: alloc::vec::Vec<_> = ordered_pairs(s).zip(labels.iter().copied()).collect();
    accuracy(&preds, truth)
}
