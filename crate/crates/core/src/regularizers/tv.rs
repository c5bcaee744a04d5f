//! Total-variation proximity operators.
//!
//! 1-D: exact direct (taut-string) algorithm of Condat, linear in practice.
//! 2-D anisotropic: Dykstra-like alternation between the row and column
//! 1-D problems. It is inexact; iteration stops after [`TV2D_MAX_ITERS`]
//! passes or once the iterate moves less than [`TV2D_TOL`] in max-norm.

pub const TV2D_MAX_ITERS: usize = 50;
pub const TV2D_TOL: f64 = 1e-8;

/// argmin_g 1/2 ||g - y||^2 + lambda * sum_i |g_{i+1} - g_i|
pub fn tv1d_prox(y: &[f64], lambda: f64) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    tv1d_prox_into(y, lambda, &mut out);
    out
}

pub(crate) fn tv1d_prox_into(input: &[f64], lambda: f64, output: &mut [f64]) {
    let width = input.len();
    debug_assert_eq!(output.len(), width);
    if width == 0 {
        return;
    }
    if lambda <= 0.0 {
        output.copy_from_slice(input);
        return;
    }
    let last = width - 1;
    let (mut k, mut k0, mut kplus, mut kminus) = (0usize, 0usize, 0usize, 0usize);
    let two_lambda = 2.0 * lambda;
    let min_lambda = -lambda;
    let mut umin = lambda;
    let mut umax = min_lambda;
    let mut vmin = input[0] - lambda;
    let mut vmax = input[0] + lambda;

    loop {
        while k == last {
            if umin < 0.0 {
                // close a segment at the lower bound
                loop {
                    output[k0] = vmin;
                    k0 += 1;
                    if k0 > kminus {
                        break;
                    }
                }
                k = k0;
                kminus = k0;
                vmin = input[k0];
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if umax > 0.0 {
                loop {
                    output[k0] = vmax;
                    k0 += 1;
                    if k0 > kplus {
                        break;
                    }
                }
                k = k0;
                kplus = k0;
                vmax = input[k0];
                umax = min_lambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / (k - k0 + 1) as f64;
                loop {
                    output[k0] = vmin;
                    k0 += 1;
                    if k0 > k {
                        break;
                    }
                }
                return;
            }
        }
        umin += input[k + 1] - vmin;
        if umin < min_lambda {
            loop {
                output[k0] = vmin;
                k0 += 1;
                if k0 > kminus {
                    break;
                }
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmin = input[k0];
            vmax = vmin + two_lambda;
            umin = lambda;
            umax = min_lambda;
            continue;
        }
        umax += input[k + 1] - vmax;
        if umax > lambda {
            loop {
                output[k0] = vmax;
                k0 += 1;
                if k0 > kplus {
                    break;
                }
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmax = input[k0];
            vmin = vmax - two_lambda;
            umin = lambda;
            umax = min_lambda;
            continue;
        }
        k += 1;
        if umin >= lambda {
            kminus = k;
            vmin += (umin - lambda) / (kminus - k0 + 1) as f64;
            umin = lambda;
        }
        if umax <= min_lambda {
            kplus = k;
            vmax += (umax + lambda) / (kplus - k0 + 1) as f64;
            umax = min_lambda;
        }
    }
}

/// Anisotropic TV value on an `nz x nx` grid stored with z fastest.
pub fn tv2d_value(y: &[f64], nz: usize, nx: usize) -> f64 {
    let mut total = 0.0;
    for ix in 0..nx {
        let col = &y[ix * nz..(ix + 1) * nz];
        total += col.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>();
        if ix + 1 < nx {
            let next = &y[(ix + 1) * nz..(ix + 2) * nz];
            total += col.iter().zip(next).map(|(a, b)| (b - a).abs()).sum::<f64>();
        }
    }
    total
}

pub fn tv1d_value(y: &[f64]) -> f64 {
    y.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Approximate prox of `lambda * TV_aniso` on an `nz x nx` grid (z fastest).
pub fn tv2d_prox(y: &[f64], nz: usize, nx: usize, lambda: f64) -> Vec<f64> {
    debug_assert_eq!(y.len(), nz * nx);
    if lambda <= 0.0 {
        return y.to_vec();
    }
    let n = y.len();
    let mut x = y.to_vec();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut buf_in = vec![0.0; nx.max(nz)];
    let mut buf_out = vec![0.0; nx.max(nz)];
    let mut work = vec![0.0; n];

    for _ in 0..TV2D_MAX_ITERS {
        // z = prox_cols(x + p), z-direction lines are contiguous
        for i in 0..n {
            work[i] = x[i] + p[i];
        }
        for ix in 0..nx {
            let r = ix * nz..(ix + 1) * nz;
            tv1d_prox_into(&work[r.clone()], lambda, &mut z[r]);
        }
        for i in 0..n {
            p[i] = work[i] - z[i];
        }
        // x = prox_rows(z + q), x-direction lines are strided by nz
        for i in 0..n {
            work[i] = z[i] + q[i];
        }
        let mut change: f64 = 0.0;
        for iz in 0..nz {
            for ix in 0..nx {
                buf_in[ix] = work[ix * nz + iz];
            }
            tv1d_prox_into(&buf_in[..nx], lambda, &mut buf_out[..nx]);
            for ix in 0..nx {
                let idx = ix * nz + iz;
                change = change.max((buf_out[ix] - x[idx]).abs());
                x[idx] = buf_out[ix];
            }
        }
        for i in 0..n {
            q[i] = work[i] - x[i];
        }
        if change < TV2D_TOL {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// KKT certificate for 1-D TV: with z_i = sum_{j<=i}(y_j - g_j) the
    /// dual variable on edge i, optimality holds iff z_{n-1} = 0,
    /// |z_i| <= lambda and z_i = -lambda*sign(g_{i+1}-g_i) where the jump is nonzero.
    pub(crate) fn tv1d_kkt_violation(y: &[f64], g: &[f64], lambda: f64) -> f64 {
        let mut z = 0.0;
        let mut worst: f64 = 0.0;
        for i in 0..y.len() {
            z += y[i] - g[i];
            if i + 1 == y.len() {
                worst = worst.max(z.abs());
                break;
            }
            let jump = g[i + 1] - g[i];
            worst = worst.max(z.abs() - lambda);
            if jump.abs() > 1e-9 {
                worst = worst.max((z + lambda * jump.signum()).abs());
            }
        }
        worst
    }

    #[test]
    fn two_point_example() {
        let g = tv1d_prox(&[0.0, 4.0], 1.0);
        assert!((g[0] - 1.0).abs() < 1e-15 && (g[1] - 3.0).abs() < 1e-15, "{g:?}");
        // merged when lambda exceeds half the jump
        let g = tv1d_prox(&[0.0, 4.0], 3.0);
        assert!((g[0] - 2.0).abs() < 1e-15 && (g[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_vector_is_fixed() {
        let y = vec![1.25; 17];
        assert!(tv1d_prox(&y, 0.7).iter().all(|v| (v - 1.25).abs() < 1e-14));
        let y2 = vec![-3.0; 12];
        let g = tv2d_prox(&y2, 3, 4, 0.5);
        assert!(g.iter().all(|v| (v + 3.0).abs() < 1e-14));
    }

    #[test]
    fn single_entry_and_empty() {
        assert_eq!(tv1d_prox(&[2.5], 10.0), vec![2.5]);
        assert!(tv1d_prox(&[], 1.0).is_empty());
    }

    #[test]
    fn kkt_holds_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..500 {
            let n = rng.random_range(1..60);
            let lambda = rng.random_range(0.01..3.0);
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let g = tv1d_prox(&y, lambda);
            let v = tv1d_kkt_violation(&y, &g, lambda);
            assert!(v < 1e-9, "violation {v} n={n}");
        }
    }

    #[test]
    fn tv2d_value_counts_both_directions() {
        // 2x2 grid, z fastest: [a00, a10, a01, a11]
        let y = [0.0, 1.0, 3.0, 7.0];
        // z diffs: |1-0| + |7-3| = 5, x diffs: |3-0| + |7-1| = 9
        assert_eq!(tv2d_value(&y, 2, 2), 14.0);
    }
}
