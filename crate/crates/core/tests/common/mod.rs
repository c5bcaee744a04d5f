//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use fwiprox::helmholtz::HelmholtzOperator;
use fwiprox::regularizers::{prox, reg_value};
use fwiprox::{LbfgsMemory, RegularizerKind};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn l1(y: &[f64]) -> f64 {
    y.iter().map(|v| v.abs()).sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Scalar soft thresholding by enumerating the stationary candidates of
/// `1/2 (x - y)^2 + t |x|`.
pub fn soft_threshold_oracle(y: f64, t: f64) -> f64 {
    let f = |x: f64| 0.5 * (x - y) * (x - y) + t * x.abs();
    let mut best = 0.0;
    for c in [y - t, y + t] {
        // y - t is stationary only for x > 0, y + t only for x < 0
        let valid = (c == y - t && c > 0.0) || (c == y + t && c < 0.0);
        if valid && f(c) < f(best) {
            best = c;
        }
    }
    best
}

/// Box projection by picking the feasible candidate in `{lo, hi, y}` with
/// the least squared distance.
pub fn box_oracle(y: f64, lo: f64, hi: f64) -> f64 {
    [lo, hi, y]
        .into_iter()
        .filter(|c| *c >= lo && *c <= hi)
        .min_by(|a, b| (a - y).abs().total_cmp(&(b - y).abs()))
        .unwrap()
}

/// l1-ball projection via the sort-based threshold.
pub fn l1_ball_sort_oracle(y: &[f64], tau: f64) -> Vec<f64> {
    if l1(y) <= tau {
        return y.to_vec();
    }
    let mut u: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - tau) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|v| v.signum() * (v.abs() - theta).max(0.0)).collect()
}

/// l1-ball projection with the threshold found by bisection on
/// `sum max(|y_i| - theta, 0) = tau`.
pub fn l1_ball_bisection_oracle(y: &[f64], tau: f64) -> Vec<f64> {
    if l1(y) <= tau {
        return y.to_vec();
    }
    let mass = |theta: f64| y.iter().map(|v| (v.abs() - theta).max(0.0)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, y.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > tau {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    y.iter().map(|v| v.signum() * (v.abs() - theta).max(0.0)).collect()
}

/// Exact 1-D TV prox rebuilt from the jump pattern of a candidate `g`.
///
/// On each constant run `[a, b]` with value `c`, optimality gives
/// `c = (sum y - z_b + z_{a-1}) / len` with the edge duals
/// `z = -lambda * sign(jump)` (zero at the ends). The rebuilt solution is
/// returned only if its duals satisfy `|z_i| <= lambda` and its jump signs
/// agree with the assumed ones, which certifies it as the unique minimizer.
pub fn tv1d_certified_oracle(y: &[f64], g: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let n = y.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let scale = y.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut runs = vec![(0usize, 0usize)];
    for i in 1..n {
        if (g[i] - g[i - 1]).abs() <= 1e-11 * scale {
            runs.last_mut().unwrap().1 = i;
        } else {
            runs.push((i, i));
        }
    }
    let mean_g = |(a, b): (usize, usize)| g[a..=b].iter().sum::<f64>() / (b - a + 1) as f64;
    let sign_between = |k: usize| (mean_g(runs[k + 1]) - mean_g(runs[k])).signum();
    let mut out = vec![0.0; n];
    let mut values = Vec::with_capacity(runs.len());
    for (k, &(a, b)) in runs.iter().enumerate() {
        let z_right = if k + 1 < runs.len() { -lambda * sign_between(k) } else { 0.0 };
        let z_left = if k > 0 { -lambda * sign_between(k - 1) } else { 0.0 };
        let c = (y[a..=b].iter().sum::<f64>() - z_right + z_left) / (b - a + 1) as f64;
        values.push(c);
        out[a..=b].iter_mut().for_each(|v| *v = c);
    }
    for k in 0..runs.len().saturating_sub(1) {
        let jump = values[k + 1] - values[k];
        if jump == 0.0 || jump.signum() != sign_between(k) {
            return None;
        }
    }
    let mut z = 0.0;
    for i in 0..n {
        z += y[i] - out[i];
        if z.abs() > lambda * (1.0 + 1e-9) + 1e-12 * scale {
            return None;
        }
    }
    Some(out)
}

/// `1/2 ||x - y||^2 + t R(x)`.
pub fn prox_objective(kind: &RegularizerKind, y: &[f64], t: f64, x: &[f64]) -> f64 {
    0.5 * y.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>() + t * reg_value(kind, x).unwrap()
}

/// Smallest `F(x') - F(x*)` over random perturbations `x'` of the prox
/// output `x*`. Perturbations of indicator kinds are projected back.
pub fn prox_optimality_gap(kind: &RegularizerKind, y: &[f64], t: f64, rng: &mut ChaCha8Rng, trials: usize) -> f64 {
    let x = prox(kind, y, t).unwrap();
    let fx = prox_objective(kind, y, t, &x);
    let mut worst = f64::INFINITY;
    for k in 0..trials {
        let eps = 10f64.powi(-(k as i32 % 6) - 1);
        let mut xp: Vec<f64> = x.iter().map(|v| v + eps * rng.random_range(-1.0..1.0)).collect();
        if k % 3 == 0 {
            // single-coordinate moves probe kinks one at a time
            xp = x.clone();
            let i = rng.random_range(0..x.len());
            xp[i] += eps * rng.random_range(-1.0..1.0);
        }
        if kind.is_indicator() {
            xp = prox(kind, &xp, 1.0).unwrap();
        }
        worst = worst.min(prox_objective(kind, y, t, &xp) - fx);
    }
    worst
}

/// Random symmetric positive definite matrix with eigenvalues in `[lo, hi]`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = m.qr().q();
    let d = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.random_range(lo..hi)));
    let a = &q * d * q.transpose();
    (&a + a.transpose()) * 0.5
}

/// L-BFGS memory whose `B` equals `a`: BFGS with `a`-conjugate steps
/// reproduces `a` after `n` updates.
pub fn memory_equal_to(a: &DMatrix<f64>) -> LbfgsMemory {
    let n = a.nrows();
    let mut mem = LbfgsMemory::new(n.max(10));
    // Gram-Schmidt in the a-inner product
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for k in 0..n {
        let mut v = DVector::from_fn(n, |i, _| if i == k { 1.0 } else { 0.0 });
        for b in &basis {
            let c = (b.transpose() * a * &v)[0] / (b.transpose() * a * b)[0];
            v -= b * c;
        }
        basis.push(v);
    }
    for s in &basis {
        let t = a * s;
        assert!(mem.update(s.as_slice(), t.as_slice()).unwrap());
    }
    mem
}

/// Global minimizer of `1/2 x^T A x + b^T x` over a box by enumerating all
/// `3^n` assignments of each coordinate to its lower bound, upper bound or
/// the free set.
pub fn box_qp_enumeration(a: &DMatrix<f64>, b: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let n = b.len();
    let obj = |x: &DVector<f64>| 0.5 * (x.transpose() * a * x)[0] + x.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut state = vec![0u8; n];
        let mut c = code;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let mut x = DVector::zeros(n);
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        for i in 0..n {
            match state[i] {
                0 => x[i] = lo[i],
                1 => x[i] = hi[i],
                _ => {}
            }
        }
        if !free.is_empty() {
            let aff = DMatrix::from_fn(free.len(), free.len(), |r, c| a[(free[r], free[c])]);
            let rhs = DVector::from_fn(free.len(), |r, _| {
                let i = free[r];
                -b[i] - (0..n).filter(|j| state[*j] != 2).map(|j| a[(i, j)] * x[j]).sum::<f64>()
            });
            let Some(sol) = aff.lu().solve(&rhs) else { continue };
            for (r, &i) in free.iter().enumerate() {
                x[i] = sol[r];
            }
            if free.iter().any(|&i| x[i] < lo[i] - 1e-12 || x[i] > hi[i] + 1e-12) {
                continue;
            }
        }
        let f = obj(&x);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, x));
        }
    }
    best.unwrap().1.iter().copied().collect()
}

/// Dense copy of an assembled operator.
pub fn dense_operator(op: &HelmholtzOperator) -> DMatrix<Complex64> {
    let n = op.matrix().dim();
    let mut a = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        for (j, v) in op.matrix().row(i) {
            a[(i, j)] = v;
        }
    }
    a
}

pub fn dense_solve(a: &DMatrix<Complex64>, b: &[Complex64]) -> Vec<Complex64> {
    let rhs = DVector::from_column_slice(b);
    a.clone().lu().solve(&rhs).expect("nonsingular").iter().copied().collect()
}

/// Central difference of `f` along coordinate `i`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, y: &[f64], i: usize, h: f64) -> f64 {
    let mut p = y.to_vec();
    p[i] += h;
    let mut m = y.to_vec();
    m[i] -= h;
    (f(&p) - f(&m)) / (2.0 * h)
}
