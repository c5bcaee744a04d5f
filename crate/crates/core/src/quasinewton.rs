//! Limited-memory BFGS curvature store and the quadratic model it defines.
//!
//! The memory applies the Hessian approximation `B_k` directly (not its
//! inverse): starting from `B_0 = I / gamma`, each stored pair `(s_i, t_i)`
//! contributes the rank-two BFGS correction
//! `- (b_i b_i^T) / (s_i^T b_i) + (t_i t_i^T) / (t_i^T s_i)`, where
//! `b_i = B_{i-1} s_i` is cached whenever the memory changes.

use std::collections::VecDeque;

use crate::error::{invalid, Result};

pub const DEFAULT_CAPACITY: usize = 10;
pub const DEFAULT_CURVATURE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
struct Pair {
    s: Vec<f64>,
    t: Vec<f64>,
    ts: f64,
    /// `B_{i-1} s_i`
    b: Vec<f64>,
    sb: f64,
}

#[derive(Debug, Clone)]
pub struct LbfgsMemory {
    capacity: usize,
    curvature_tol: f64,
    pairs: VecDeque<Pair>,
    gamma: f64,
    skipped: usize,
}

impl Default for LbfgsMemory {
    fn default() -> Self {
        Self::new(DEFAULT_CAPACITY)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LbfgsMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            curvature_tol: DEFAULT_CURVATURE_TOL,
            pairs: VecDeque::with_capacity(capacity.max(1)),
            gamma: 1.0,
            skipped: 0,
        }
    }

    pub fn with_curvature_tol(mut self, tol: f64) -> Self {
        self.curvature_tol = tol;
        self
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Inverse scale of `B_0 = I / gamma`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Number of pairs rejected by the curvature test.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    /// Overrides `gamma` while the memory is empty (first-iteration scaling).
    pub fn set_initial_gamma(&mut self, gamma: f64) {
        if self.pairs.is_empty() && gamma > 0.0 && gamma.is_finite() {
            self.gamma = gamma;
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.pairs.iter().map(|p| (p.s.as_slice(), p.t.as_slice()))
    }

    /// Stores `(s, t)` when `<s, t> > tol ||s|| ||t||`; returns whether the
    /// pair was accepted. The oldest pair is evicted at capacity.
    pub fn update(&mut self, s: &[f64], t: &[f64]) -> Result<bool> {
        if s.len() != t.len() {
            return invalid(format!("curvature pair lengths differ: {} vs {}", s.len(), t.len()));
        }
        if let Some(p) = self.pairs.front() {
            if p.s.len() != s.len() {
                return invalid(format!("pair length {} differs from stored {}", s.len(), p.s.len()));
            }
        }
        let ts = dot(s, t);
        let tt = dot(t, t);
        let ss = dot(s, s);
        if !(ts > self.curvature_tol * (ss * tt).sqrt()) || !ts.is_finite() || tt == 0.0 {
            self.skipped += 1;
            log::debug!("skipping curvature pair with <s,t> = {ts:e}");
            return Ok(false);
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back(Pair {
            s: s.to_vec(),
            t: t.to_vec(),
            ts,
            b: Vec::new(),
            sb: 0.0,
        });
        self.gamma = ts / tt;
        self.refresh();
        Ok(true)
    }

    fn refresh(&mut self) {
        for i in 0..self.pairs.len() {
            let b = self.apply_first(i, &self.pairs[i].s);
            let sb = dot(&self.pairs[i].s, &b);
            let p = &mut self.pairs[i];
            p.b = b;
            p.sb = sb;
        }
    }

    /// `B` built from the first `k` stored pairs applied to `d`.
    fn apply_first(&self, k: usize, d: &[f64]) -> Vec<f64> {
        let inv_gamma = 1.0 / self.gamma;
        let mut out: Vec<f64> = d.iter().map(|v| v * inv_gamma).collect();
        for p in self.pairs.iter().take(k) {
            let cb = dot(&p.b, d) / p.sb;
            let ct = dot(&p.t, d) / p.ts;
            for ((o, b), t) in out.iter_mut().zip(&p.b).zip(&p.t) {
                *o += ct * t - cb * b;
            }
        }
        out
    }

    /// `B_k d`.
    pub fn hessian_apply(&self, d: &[f64]) -> Result<Vec<f64>> {
        if let Some(p) = self.pairs.front() {
            if p.s.len() != d.len() {
                return invalid(format!("direction length {} differs from memory {}", d.len(), p.s.len()));
            }
        }
        Ok(self.apply_first(self.pairs.len(), d))
    }

    /// `Q(y) = phi_k + <g_k, y - y_k> + 1/2 <y - y_k, B_k (y - y_k)>`.
    pub fn quadratic_model(&self, y_k: &[f64], g_k: &[f64], phi_k: f64, y: &[f64]) -> Result<f64> {
        if y_k.len() != y.len() || g_k.len() != y.len() {
            return invalid("quadratic model vectors differ in length");
        }
        let delta: Vec<f64> = y.iter().zip(y_k).map(|(a, b)| a - b).collect();
        let bd = self.hessian_apply(&delta)?;
        Ok(phi_k + dot(g_k, &delta) + 0.5 * dot(&delta, &bd))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_pair_sets_gamma() {
        let mut mem = LbfgsMemory::new(3);
        assert!(mem.update(&[1.0, 0.0], &[2.0, 1.0]).unwrap());
        assert_eq!(mem.len(), 1);
        assert!((mem.gamma() - 2.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn non_positive_curvature_is_skipped() {
        let mut mem = LbfgsMemory::new(3);
        assert!(!mem.update(&[1.0, 0.0], &[-1.0, 0.0]).unwrap());
        assert!(!mem.update(&[1.0, 0.0], &[0.0, 1.0]).unwrap());
        assert!(mem.is_empty());
        assert_eq!(mem.skipped(), 2);
        assert_eq!(mem.gamma(), 1.0);
        assert!(mem.update(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn eviction_keeps_newest() {
        let mut mem = LbfgsMemory::new(2);
        for k in 1..=3 {
            let v = k as f64;
            mem.update(&[v, 0.0], &[v, 0.1]).unwrap();
        }
        let firsts: Vec<f64> = mem.pairs().map(|(s, _)| s[0]).collect();
        assert_eq!(firsts, vec![2.0, 3.0]);
    }

    #[test]
    fn empty_memory_is_identity() {
        let mem = LbfgsMemory::new(5);
        assert_eq!(mem.hessian_apply(&[1.0, -2.0]).unwrap(), vec![1.0, -2.0]);
        let q = mem.quadratic_model(&[0.0, 0.0], &[1.0, 1.0], 3.0, &[1.0, 2.0]).unwrap();
        assert_eq!(q, 3.0 + 3.0 + 0.5 * 5.0);
        assert_eq!(mem.quadratic_model(&[4.0, 1.0], &[1.0, 1.0], 3.0, &[4.0, 1.0]).unwrap(), 3.0);
    }

    #[test]
    fn secant_condition_for_newest_pair() {
        let mut mem = LbfgsMemory::new(4);
        let pairs = [
            (vec![1.0, 0.2, -0.3], vec![2.0, 0.1, 0.0]),
            (vec![0.1, 1.0, 0.5], vec![0.3, 1.5, 0.4]),
            (vec![-0.4, 0.3, 1.0], vec![-0.2, 0.6, 2.2]),
        ];
        for (s, t) in &pairs {
            assert!(mem.update(s, t).unwrap());
            let bs = mem.hessian_apply(s).unwrap();
            for (a, b) in bs.iter().zip(t) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
