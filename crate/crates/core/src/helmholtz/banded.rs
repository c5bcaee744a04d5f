//! Banded LU with partial pivoting for complex matrices.
//!
//! Each row `i` stores columns `i - kl ..= i + kl + ku`; the extra `kl`
//! super-diagonals hold fill-in created by row interchanges. Row swaps are
//! recorded per elimination step and replayed on the right-hand side, so the
//! unit-lower factor is kept in product form.

use num_complex::Complex64;

pub(crate) struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<Complex64>,
    pivots: Vec<usize>,
}

/// Why a factorization was rejected.
#[derive(Debug)]
pub(crate) enum LuFailure {
    ZeroPivot(usize),
    IllConditioned(f64),
}

/// Pivot-ratio estimate above which the factorization is refused.
pub(crate) const MAX_CONDITION: f64 = 1e14;

impl BandedLu {
    /// Factorizes the matrix given by `entries(i, j)` over its band.
    pub(crate) fn factorize(
        n: usize,
        kl: usize,
        ku: usize,
        mut fill: impl FnMut(&mut dyn FnMut(usize, usize, Complex64)),
    ) -> Result<Self, LuFailure> {
        let width = 2 * kl + ku + 1;
        let mut band = vec![Complex64::new(0.0, 0.0); n * width];
        fill(&mut |i, j, v| {
            debug_assert!(j + kl >= i && j <= i + ku, "entry ({i},{j}) outside band");
            band[i * width + (j + kl - i)] += v;
        });
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            width,
            band,
            pivots: vec![0; n],
        };
        lu.eliminate()?;
        Ok(lu)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn eliminate(&mut self) -> Result<(), LuFailure> {
        let n = self.n;
        let mut max_pivot: f64 = 0.0;
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + self.kl + self.ku).min(n - 1);

            let mut p = k;
            let mut best = self.band[self.at(k, k)].norm();
            for r in k + 1..=last_row {
                let v = self.band[self.at(r, k)].norm();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(LuFailure::ZeroPivot(k));
            }
            self.pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.at(k, j), self.at(p, j));
                    self.band.swap(a, b);
                }
            }
            max_pivot = max_pivot.max(best);
            min_pivot = min_pivot.min(best);

            let pivot = self.band[self.at(k, k)];
            let inv = pivot.inv();
            for r in k + 1..=last_row {
                let idx = self.at(r, k);
                let l = self.band[idx] * inv;
                self.band[idx] = l;
                if l.re == 0.0 && l.im == 0.0 {
                    continue;
                }
                let row_k = k * self.width + self.kl - k;
                let row_r = r * self.width + self.kl - r;
                for j in k + 1..=last_col {
                    let u = self.band[row_k + j];
                    self.band[row_r + j] -= l * u;
                }
            }
        }
        let ratio = max_pivot / min_pivot;
        if ratio > MAX_CONDITION {
            return Err(LuFailure::IllConditioned(ratio));
        }
        Ok(())
    }

    /// Solves `A x = b` in place.
    pub(crate) fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk.re == 0.0 && bk.im == 0.0 {
                continue;
            }
            let last_row = (k + self.kl).min(n - 1);
            for r in k + 1..=last_row {
                b[r] -= self.band[self.at(r, k)] * bk;
            }
        }
        for i in (0..n).rev() {
            let last_col = (i + self.kl + self.ku).min(n - 1);
            let row = i * self.width + self.kl - i;
            let mut acc = b[i];
            for j in i + 1..=last_col {
                acc -= self.band[row + j] * b[j];
            }
            b[i] = acc / self.band[row + i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn random_banded_system_with_pivoting() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (n, kl, ku) = (40, 3, 2);
        let mut dense = vec![vec![c(0.0, 0.0); n]; n];
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // weak diagonal forces row interchanges
                dense[i][j] = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        let lu = BandedLu::factorize(n, kl, ku, |put| {
            for i in 0..n {
                for j in 0..n {
                    if dense[i][j] != c(0.0, 0.0) {
                        put(i, j, dense[i][j]);
                    }
                }
            }
        })
        .unwrap();
        assert!(lu.pivots.iter().enumerate().any(|(k, &p)| p != k));
        let x_true: Vec<Complex64> = (0..n).map(|i| c(i as f64, 1.0 - i as f64 * 0.5)).collect();
        let mut b: Vec<Complex64> = (0..n)
            .map(|i| (0..n).map(|j| dense[i][j] * x_true[j]).sum())
            .collect();
        lu.solve_in_place(&mut b);
        for (x, t) in b.iter().zip(&x_true) {
            assert!((x - t).norm() < 1e-9 * (1.0 + t.norm()), "{x} vs {t}");
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let res = BandedLu::factorize(3, 1, 1, |put| {
            put(0, 0, c(1.0, 0.0));
            put(1, 1, c(0.0, 0.0));
            put(2, 2, c(1.0, 0.0));
        });
        assert!(matches!(res, Err(LuFailure::ZeroPivot(1))));
        let res = BandedLu::factorize(2, 1, 1, |put| {
            put(0, 0, c(1.0, 0.0));
            put(1, 1, c(1e-15, 0.0));
        });
        assert!(matches!(res, Err(LuFailure::IllConditioned(_))));
    }
}
