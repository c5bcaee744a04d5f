//! Differentiable misfit penalties on complex residual matrices.
//!
//! All penalties act entrywise on the modulus of the residual, so they are
//! invariant to a global phase rotation of the data. Gradients are taken with
//! respect to the real inner product `Re<A, B> = Re(trace(A^H B))`, so that
//! `d rho = Re<grad, dr>` to first order.
//!
//! The Student's t gradient `2r / (nu + |r|^2)` is twice the influence curve
//! `x / (1 + x^2)` usually drawn for unit `nu`. Its modulus peaks at
//! `|r| = sqrt(nu)` with value `1 / sqrt(nu)` and decays to zero for large
//! residuals (re-descending).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Complex residual `n_recv x n_src` stored column-major (receiver fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMatrix {
    n_recv: usize,
    n_src: usize,
    omega: f64,
    entries: Vec<Complex64>,
}

impl ResidualMatrix {
    pub fn new(n_recv: usize, n_src: usize, omega: f64, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != n_recv * n_src {
            return invalid(format!(
                "residual has {} entries, expected {}x{}",
                entries.len(),
                n_recv,
                n_src
            ));
        }
        if let Some(i) = entries.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid(format!("residual entry {i} is not finite"));
        }
        Ok(Self {
            n_recv,
            n_src,
            omega,
            entries,
        })
    }

    pub fn zeros(n_recv: usize, n_src: usize, omega: f64) -> Self {
        Self {
            n_recv,
            n_src,
            omega,
            entries: vec![Complex64::new(0.0, 0.0); n_recv * n_src],
        }
    }

    pub fn n_recv(&self) -> usize {
        self.n_recv
    }

    pub fn n_src(&self) -> usize {
        self.n_src
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Complex64> {
        self.entries
    }

    /// Column for source `s`.
    pub fn column(&self, s: usize) -> &[Complex64] {
        &self.entries[s * self.n_recv..(s + 1) * self.n_recv]
    }

    pub fn get(&self, r: usize, s: usize) -> Complex64 {
        self.entries[s * self.n_recv + r]
    }
}

/// Misfit penalty selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PenaltyKind {
    LeastSquares,
    Huber { kappa: f64 },
    StudentT { nu: f64 },
}

impl PenaltyKind {
    pub fn huber(kappa: f64) -> Result<Self> {
        let kind = PenaltyKind::Huber { kappa };
        kind.validate()?;
        Ok(kind)
    }

    pub fn student_t(nu: f64) -> Result<Self> {
        let kind = PenaltyKind::StudentT { nu };
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PenaltyKind::LeastSquares => Ok(()),
            PenaltyKind::Huber { kappa } if kappa > 0.0 && kappa.is_finite() => Ok(()),
            PenaltyKind::Huber { kappa } => invalid(format!("huber kappa must be > 0, got {kappa}")),
            PenaltyKind::StudentT { nu } if nu > 0.0 && nu.is_finite() => Ok(()),
            PenaltyKind::StudentT { nu } => invalid(format!("student-t nu must be > 0, got {nu}")),
        }
    }

    /// Scalar penalty of one residual entry.
    #[inline]
    pub fn entry_value(&self, r: Complex64) -> f64 {
        match *self {
            PenaltyKind::LeastSquares => r.norm_sqr(),
            PenaltyKind::Huber { kappa } => {
                let a = r.norm();
                if a <= kappa {
                    0.5 * a * a
                } else {
                    kappa * a - 0.5 * kappa * kappa
                }
            }
            PenaltyKind::StudentT { nu } => (nu + r.norm_sqr()).ln(),
        }
    }

    /// Gradient of [`entry_value`](Self::entry_value) under the real inner product.
    #[inline]
    pub fn entry_gradient(&self, r: Complex64) -> Complex64 {
        match *self {
            PenaltyKind::LeastSquares => 2.0 * r,
            PenaltyKind::Huber { kappa } => {
                let a = r.norm();
                // the quadratic branch owns the seam |r| = kappa
                if a <= kappa {
                    r
                } else {
                    r * (kappa / a)
                }
            }
            PenaltyKind::StudentT { nu } => r * (2.0 / (nu + r.norm_sqr())),
        }
    }
}

pub fn penalty_value(kind: &PenaltyKind, r: &ResidualMatrix) -> Result<f64> {
    kind.validate()?;
    Ok(r.entries.iter().map(|&z| kind.entry_value(z)).sum())
}

pub fn penalty_gradient(kind: &PenaltyKind, r: &ResidualMatrix) -> Result<ResidualMatrix> {
    kind.validate()?;
    Ok(ResidualMatrix {
        n_recv: r.n_recv,
        n_src: r.n_src,
        omega: r.omega,
        entries: r.entries.iter().map(|&z| kind.entry_gradient(z)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn single(z: Complex64) -> ResidualMatrix {
        ResidualMatrix::new(1, 1, 1.0, vec![z]).unwrap()
    }

    fn random_residual(rng: &mut ChaCha8Rng, n_recv: usize, n_src: usize, scale: f64) -> ResidualMatrix {
        let entries = (0..n_recv * n_src)
            .map(|_| c(rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
            .collect();
        ResidualMatrix::new(n_recv, n_src, 2.0, entries).unwrap()
    }

    #[test]
    fn zero_residual_values() {
        let r = ResidualMatrix::zeros(3, 2, 1.0);
        assert_eq!(penalty_value(&PenaltyKind::LeastSquares, &r).unwrap(), 0.0);
        assert_eq!(penalty_value(&PenaltyKind::Huber { kappa: 0.3 }, &r).unwrap(), 0.0);
        let nu = 0.7;
        let v = penalty_value(&PenaltyKind::StudentT { nu }, &r).unwrap();
        assert!((v - 6.0 * nu.ln()).abs() < 1e-15);
    }

    #[test]
    fn worked_values() {
        let st = PenaltyKind::StudentT { nu: 1.0 };
        assert!((penalty_value(&st, &single(c(1.0, 0.0))).unwrap() - 2f64.ln()).abs() < 1e-15);
        let hub = PenaltyKind::Huber { kappa: 1.0 };
        assert_eq!(penalty_value(&hub, &single(c(3.0, 0.0))).unwrap(), 2.5);
    }

    #[test]
    fn rejects_bad_parameters_and_entries() {
        assert!(PenaltyKind::huber(0.0).is_err());
        assert!(PenaltyKind::huber(-1.0).is_err());
        assert!(PenaltyKind::student_t(0.0).is_err());
        assert!(PenaltyKind::student_t(f64::NAN).is_err());
        assert!(ResidualMatrix::new(1, 1, 1.0, vec![c(f64::NAN, 0.0)]).is_err());
        assert!(ResidualMatrix::new(1, 1, 1.0, vec![c(0.0, f64::INFINITY)]).is_err());
        assert!(ResidualMatrix::new(2, 1, 1.0, vec![c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn zero_residual_gradient_vanishes() {
        let r = ResidualMatrix::zeros(2, 2, 1.0);
        for kind in [
            PenaltyKind::LeastSquares,
            PenaltyKind::Huber { kappa: 1.0 },
            PenaltyKind::StudentT { nu: 2.0 },
        ] {
            let g = penalty_gradient(&kind, &r).unwrap();
            assert!(g.entries().iter().all(|z| z.norm() == 0.0));
        }
    }

    /// Huber as the infimal convolution min_t 1/2 (a - t)^2 + kappa |t|,
    /// evaluated on a fine grid followed by a local parabola refinement.
    fn huber_oracle(a: f64, kappa: f64) -> f64 {
        let lo = -a.abs() - 1.0;
        let hi = a.abs() + 1.0;
        let n = 200_000;
        let f = |t: f64| 0.5 * (a - t).powi(2) + kappa * t.abs();
        let mut best = f64::INFINITY;
        let mut best_t = 0.0;
        for i in 0..=n {
            let t = lo + (hi - lo) * i as f64 / n as f64;
            let v = f(t);
            if v < best {
                best = v;
                best_t = t;
            }
        }
        // golden-section polish around the grid minimiser
        let step = (hi - lo) / n as f64;
        let (mut l, mut r) = (best_t - step, best_t + step);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let x1 = r - g * (r - l);
            let x2 = l + g * (r - l);
            if f(x1) < f(x2) {
                r = x2;
            } else {
                l = x1;
            }
        }
        f(0.5 * (l + r)).min(best).min(f(0.0))
    }

    #[test]
    fn huber_matches_infimal_convolution_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let kind = PenaltyKind::Huber { kappa: 1.0 };
        for _ in 0..20 {
            let z = c(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
            let got = kind.entry_value(z);
            let want = huber_oracle(z.norm(), 1.0);
            assert!((got - want).abs() < 1e-9, "{got} vs {want} at |r|={}", z.norm());
        }
    }

    #[test]
    fn huber_seam_is_c1() {
        let kappa = 0.8;
        let kind = PenaltyKind::Huber { kappa };
        let dir = c(0.6, -0.8);
        let at = dir * kappa;
        let quad = 0.5 * kappa * kappa;
        let lin = kappa * kappa - 0.5 * kappa * kappa;
        assert!((quad - lin).abs() < 1e-15);
        assert!((kind.entry_value(at) - quad).abs() < 1e-15);
        let g_quad = at;
        let g_lin = at * (kappa / at.norm());
        assert!((g_quad - g_lin).norm() < 1e-15);
        assert!((kind.entry_gradient(at) - g_quad).norm() < 1e-15);
        let just_out = dir * (kappa * (1.0 + 1e-12));
        assert!((kind.entry_gradient(just_out) - g_quad).norm() < 1e-11);
    }

    #[test]
    fn student_t_gradient_is_redescending() {
        let kind = PenaltyKind::StudentT { nu: 1.0 };
        for i in -40..=40 {
            let x = i as f64 * 0.25;
            let g = kind.entry_gradient(c(x, 0.0));
            assert!(g.im.abs() == 0.0);
            assert!((g.re - 2.0 * x / (1.0 + x * x)).abs() < 1e-15);
        }
        // sampled supremum is 1/sqrt(nu)
        for nu in [0.25, 1.0, 4.0] {
            let kind = PenaltyKind::StudentT { nu };
            let sup = (0..=100_000)
                .map(|i| kind.entry_gradient(c(i as f64 * 1e-4 * 10.0 * nu.sqrt(), 0.0)).norm())
                .fold(0.0, f64::max);
            assert!((sup - 1.0 / nu.sqrt()).abs() < 1e-6, "nu={nu}: {sup}");
            assert!(kind.entry_gradient(c(1e6, 0.0)).norm() < 1e-5);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-6;
        for kind in [
            PenaltyKind::LeastSquares,
            PenaltyKind::Huber { kappa: 0.9 },
            PenaltyKind::StudentT { nu: 0.5 },
        ] {
            let r = random_residual(&mut rng, 4, 3, 2.0);
            let g = penalty_gradient(&kind, &r).unwrap();
            for i in 0..r.entries().len() {
                for (unit, part) in [(c(1.0, 0.0), 0), (c(0.0, 1.0), 1)] {
                    let mut plus = r.entries().to_vec();
                    let mut minus = r.entries().to_vec();
                    plus[i] += unit * h;
                    minus[i] -= unit * h;
                    let fp = penalty_value(&kind, &ResidualMatrix::new(4, 3, 2.0, plus).unwrap()).unwrap();
                    let fm = penalty_value(&kind, &ResidualMatrix::new(4, 3, 2.0, minus).unwrap()).unwrap();
                    let fd = (fp - fm) / (2.0 * h);
                    let an = if part == 0 { g.entries()[i].re } else { g.entries()[i].im };
                    let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-3);
                    assert!(rel < 1e-6, "{kind:?} entry {i} part {part}: fd {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn convex_kinds_are_minimised_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let r = random_residual(&mut rng, 3, 2, 5.0);
            for kind in [PenaltyKind::LeastSquares, PenaltyKind::Huber { kappa: 1.3 }] {
                assert!(penalty_value(&kind, &r).unwrap() >= 0.0);
            }
        }
    }
}
