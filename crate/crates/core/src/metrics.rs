//! Distances between parameter vectors of programs that differ only in their
//! fact probabilities.

use crate::ast::Program;
use crate::error::{Error, Result};
use crate::grounder::Grounding;

/// Number of ground instances of each probabilistic fact statement, in
/// declaration order.
pub fn instance_counts(p: &Program) -> Result<Vec<f64>> {
    let g = Grounding::new(p)?;
    let mut counts = vec![0.0; p.prob_facts.len()];
    for f in &g.full().prob_facts {
        counts[f.origin] += 1.0;
    }
    Ok(counts)
}

/// `x ln(x / y)` with `0 ln 0 = 0`; `None` when infinite.
fn xlogx(x: f64, y: f64) -> Option<f64> {
    if x == 0.0 {
        Some(0.0)
    } else if y == 0.0 {
        None
    } else {
        Some(x * (x / y).ln())
    }
}

/// KL(truth ‖ learned) between the distributions of two programs whose
/// independent facts have probabilities `truth` and `learned`, each fact
/// repeated `counts[i]` times in the grounding.
pub fn kl_divergence(truth: &[f64], learned: &[f64], counts: &[f64]) -> Result<f64> {
    if truth.len() != learned.len() || truth.len() != counts.len() {
        return Err(Error::Semantic(format!(
            "parameter vectors of lengths {}, {} with {} counts",
            truth.len(),
            learned.len(),
            counts.len()
        )));
    }
    let mut total = 0.0;
    for (i, ((&p, &q), &k)) in truth.iter().zip(learned).zip(counts).enumerate() {
        if k == 0.0 {
            continue;
        }
        let term = xlogx(p, q)
            .zip(xlogx(1.0 - p, 1.0 - q))
            .map(|(a, b)| a + b)
            .ok_or(Error::InfiniteDivergence {
                index: i,
                truth: p,
                learned: q,
            })?;
        total += k * term;
    }
    Ok(total)
}

/// Mean absolute difference over all indices.
pub fn mae(truth: &[f64], learned: &[f64]) -> f64 {
    assert_eq!(truth.len(), learned.len(), "parameter vectors differ in length");
    if truth.is_empty() {
        return 0.0;
    }
    truth.iter().zip(learned).map(|(p, q)| (p - q).abs()).sum::<f64>() / truth.len() as f64
}
