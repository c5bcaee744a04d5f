//! Euclidean projection onto the l1 ball `{g : ||g||_1 <= tau}`.
//!
//! The projection is a soft threshold at the unique `theta >= 0` solving
//! `sum_i max(|y_i| - theta, 0) = tau`. `theta` is located with a
//! randomized-pivot partition search (expected linear time, no sort).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};

use super::soft_threshold_scalar;

pub fn project_l1_ball(y: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) || !tau.is_finite() {
        return invalid(format!("l1-ball radius must be > 0, got {tau}"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return invalid("l1-ball projection input is not finite");
    }
    let norm1: f64 = y.iter().map(|v| v.abs()).sum();
    if norm1 <= tau {
        return Ok(y.to_vec());
    }
    let theta = l1_threshold(y, tau);
    Ok(y.iter().map(|&v| soft_threshold_scalar(v, theta)).collect())
}

/// Threshold `theta` for an infeasible `y` (`||y||_1 > tau`).
pub(crate) fn l1_threshold(y: &[f64], tau: f64) -> f64 {
    // fixed seed keeps the projection bitwise reproducible
    let mut rng = ChaCha8Rng::seed_from_u64(0x005e_ed11_ba11_u64 ^ y.len() as u64);
    let mut work: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    let mut upper: Vec<f64> = Vec::with_capacity(work.len());
    let mut lower: Vec<f64> = Vec::with_capacity(work.len());
    // running sum and count of magnitudes known to lie above theta
    let mut sum_above = 0.0;
    let mut count_above = 0usize;

    while !work.is_empty() {
        let pivot = work[rng.random_range(0..work.len())];
        upper.clear();
        lower.clear();
        let mut sum_upper = 0.0;
        for &v in &work {
            if v >= pivot {
                upper.push(v);
                sum_upper += v;
            } else {
                lower.push(v);
            }
        }
        let cand_sum = sum_above + sum_upper;
        let cand_count = count_above + upper.len();
        if cand_sum - cand_count as f64 * pivot < tau {
            // theta < pivot: every entry >= pivot is in the support
            sum_above = cand_sum;
            count_above = cand_count;
            std::mem::swap(&mut work, &mut lower);
        } else {
            // theta >= pivot: drop one copy of the pivot and recurse on the rest
            let pos = upper.iter().position(|&v| v == pivot).expect("pivot in upper set");
            upper.swap_remove(pos);
            std::mem::swap(&mut work, &mut upper);
        }
    }
    ((sum_above - tau) / count_above as f64).max(0.0)
}
