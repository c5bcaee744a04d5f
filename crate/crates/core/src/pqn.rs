//! Proximal quasi-Newton driver for `min f(y) + R(y)`.
//!
//! Each outer iteration builds the L-BFGS quadratic model `Q` of `f` at the
//! current iterate, approximately minimizes `Q + R` with a spectral
//! (Barzilai-Borwein) proximal-gradient method, and line-searches the true
//! composite objective along the resulting direction. Only the prox of `R`
//! is ever needed, so indicator constraints, l1 penalties and TV all go
//! through the same code path.

use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::objective::SmoothObjective;
use crate::quasinewton::{LbfgsMemory, DEFAULT_CAPACITY, DEFAULT_CURVATURE_TOL};
use crate::regularizers::{prox, reg_value, RegularizerKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_outer_iters: usize,
    /// Outer stop: prox-gradient norm below this fraction of its initial value.
    pub outer_tol: f64,
    pub inner_max_iters: usize,
    pub inner_tol: f64,
    pub nonmonotone_window: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub step_min: f64,
    pub step_max: f64,
    pub memory: usize,
    pub curvature_tol: f64,
    /// Relative step size below which the outer loop reports a collapse.
    pub step_collapse_tol: f64,
    /// First-iteration scaling: limit the largest entry of the first
    /// quasi-Newton step to this size. `None` keeps `B_0 = I`.
    pub initial_step: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 100,
            outer_tol: 1e-6,
            inner_max_iters: 100,
            inner_tol: 1e-8,
            nonmonotone_window: 10,
            armijo_c: 1e-4,
            backtrack: 0.5,
            max_backtracks: 50,
            step_min: 1e-10,
            step_max: 1e10,
            memory: DEFAULT_CAPACITY,
            curvature_tol: DEFAULT_CURVATURE_TOL,
            step_collapse_tol: 1e-14,
            initial_step: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("outer_tol", self.outer_tol),
            ("inner_tol", self.inner_tol),
            ("step_min", self.step_min),
            ("step_max", self.step_max),
            ("curvature_tol", self.curvature_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return invalid(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(self.step_collapse_tol >= 0.0) {
            return invalid("step_collapse_tol must be >= 0");
        }
        if self.step_min > self.step_max {
            return invalid("step_min exceeds step_max");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return invalid(format!("backtrack must be in (0, 1), got {}", self.backtrack));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return invalid(format!("armijo_c must be in (0, 1), got {}", self.armijo_c));
        }
        for (name, v) in [
            ("max_outer_iters", self.max_outer_iters),
            ("inner_max_iters", self.inner_max_iters),
            ("nonmonotone_window", self.nonmonotone_window),
            ("max_backtracks", self.max_backtracks),
            ("memory", self.memory),
        ] {
            if v == 0 {
                return invalid(format!("{name} must be >= 1"));
            }
        }
        if let Some(s) = self.initial_step {
            if !(s > 0.0) || !s.is_finite() {
                return invalid(format!("initial_step must be > 0, got {s}"));
            }
        }
        Ok(())
    }
}

/// One row of the convergence trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub phi: f64,
    pub misfit: f64,
    pub reg: f64,
    pub ls_residual: f64,
    pub prox_grad_norm: f64,
    pub step: f64,
    pub inner_iters: usize,
    pub pde_solves: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    Stationary,
    StepCollapse,
    MaxIterations,
    LineSearchFailure,
}

#[derive(Debug, Clone)]
pub struct PqnResult {
    /// Iterate with the lowest composite objective.
    pub y: Vec<f64>,
    /// Last accepted iterate.
    pub last_y: Vec<f64>,
    pub phi: f64,
    pub trace: Vec<IterationRecord>,
    pub stop: StopReason,
    /// Set when the line search failed to find an acceptable step.
    pub degraded: bool,
    pub skipped_pairs: usize,
}

#[derive(Debug, Clone)]
pub struct SubproblemResult {
    pub y: Vec<f64>,
    pub iterations: usize,
    /// `Q(y) + R(y) - Q(y_k) - R(y_k)`, non-positive.
    pub decrease: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn window_max(w: &VecDeque<f64>) -> f64 {
    w.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn push_window(w: &mut VecDeque<f64>, v: f64, cap: usize) {
    w.push_back(v);
    while w.len() > cap {
        w.pop_front();
    }
}

/// `||y - prox(y - g, 1)||`
pub fn prox_grad_norm(y: &[f64], g: &[f64], reg: &RegularizerKind) -> Result<f64> {
    let trial: Vec<f64> = y.iter().zip(g).map(|(a, b)| a - b).collect();
    let p = prox(reg, &trial, 1.0)?;
    Ok(y.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
}

/// Proximal-gradient direction `prox(y - gamma g, gamma) - y`.
pub fn steepest_fallback(y: &[f64], g: &[f64], reg: &RegularizerKind, gamma: f64) -> Result<Vec<f64>> {
    let trial: Vec<f64> = y.iter().zip(g).map(|(a, b)| a - gamma * b).collect();
    let p = prox(reg, &trial, gamma)?;
    Ok(p.iter().zip(y).map(|(a, b)| a - b).collect())
}

/// Approximately minimizes `Q(z) + R(z)` where
/// `Q(z) = <g_k, z - y_k> + 1/2 <z - y_k, B_k (z - y_k)>`.
///
/// Iterates `z+ = prox(z - alpha grad Q(z), alpha)` with Barzilai-Borwein
/// `alpha` and a nonmonotone Armijo search along `z+ - z`. Returns the best
/// point visited, so the model value never increases over `y_k`.
pub fn spg_prox_solve(
    mem: &LbfgsMemory,
    y_k: &[f64],
    g_k: &[f64],
    reg: &RegularizerKind,
    cfg: &SolverConfig,
) -> Result<SubproblemResult> {
    let n = y_k.len();
    if g_k.len() != n {
        return invalid("gradient and iterate lengths differ");
    }
    let mut z = y_k.to_vec();
    let mut r_z = reg_value(reg, &z)?;
    if !r_z.is_finite() {
        z = prox(reg, &z, 1.0)?;
        r_z = reg_value(reg, &z)?;
    }
    let mut delta: Vec<f64> = z.iter().zip(y_k).map(|(a, b)| a - b).collect();
    let mut b_delta = mem.hessian_apply(&delta)?;
    let model = |delta: &[f64], b_delta: &[f64], r: f64| dot(g_k, delta) + 0.5 * dot(delta, b_delta) + r;
    let mut f_z = model(&delta, &b_delta, r_z);
    let f_start = reg_value(reg, y_k)?;
    let f_start = if f_start.is_finite() { f_start } else { f_z };
    let mut grad: Vec<f64> = g_k.iter().zip(&b_delta).map(|(a, b)| a + b).collect();
    let mut alpha = mem.gamma().clamp(cfg.step_min, cfg.step_max);
    let mut window = VecDeque::from([f_z]);
    let mut best = (f_z, z.clone());
    let mut iterations = 0;

    while iterations < cfg.inner_max_iters {
        let shifted: Vec<f64> = z.iter().zip(&grad).map(|(a, b)| a - alpha * b).collect();
        let target = prox(reg, &shifted, alpha)?;
        let d: Vec<f64> = target.iter().zip(&z).map(|(a, b)| a - b).collect();
        if norm(&d) / alpha <= cfg.inner_tol {
            break;
        }
        iterations += 1;
        let b_d = mem.hessian_apply(&d)?;
        let r_target = reg_value(reg, &target)?;
        let slope = dot(&grad, &d) + r_target - r_z;
        let reference = window_max(&window);

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let z_new: Vec<f64> = if lambda == 1.0 {
                target.clone()
            } else {
                z.iter().zip(&d).map(|(a, b)| a + lambda * b).collect()
            };
            let delta_new: Vec<f64> = delta.iter().zip(&d).map(|(a, b)| a + lambda * b).collect();
            let b_delta_new: Vec<f64> = b_delta.iter().zip(&b_d).map(|(a, b)| a + lambda * b).collect();
            let r_new = if lambda == 1.0 { r_target } else { reg_value(reg, &z_new)? };
            let f_new = model(&delta_new, &b_delta_new, r_new);
            if !f_new.is_finite() && r_new.is_finite() {
                return Err(Error::Divergence(format!("model value {f_new} at inner iteration {iterations}")));
            }
            if f_new <= reference + cfg.armijo_c * lambda * slope {
                accepted = Some((z_new, delta_new, b_delta_new, r_new, f_new));
                break;
            }
            lambda *= cfg.backtrack;
        }
        let Some((z_new, delta_new, b_delta_new, r_new, f_new)) = accepted else {
            break;
        };

        let sy = lambda * lambda * dot(&d, &b_d);
        let ss = lambda * lambda * dot(&d, &d);
        alpha = if sy > 0.0 { ss / sy } else { cfg.step_max };
        alpha = alpha.clamp(cfg.step_min, cfg.step_max);

        z = z_new;
        delta = delta_new;
        b_delta = b_delta_new;
        r_z = r_new;
        f_z = f_new;
        grad = g_k.iter().zip(&b_delta).map(|(a, b)| a + b).collect();
        push_window(&mut window, f_z, cfg.nonmonotone_window);
        if f_z < best.0 {
            best = (f_z, z.clone());
        }
    }
    Ok(SubproblemResult {
        y: best.1,
        iterations,
        decrease: best.0 - f_start,
    })
}

/// Minimizes `f + R` from `y0`; infeasible starts are first passed
/// through the prox.
pub fn minimize<F: SmoothObjective + ?Sized>(
    f: &F,
    reg: &RegularizerKind,
    y0: &[f64],
    cfg: &SolverConfig,
) -> Result<PqnResult> {
    cfg.validate()?;
    reg.validate()?;
    if y0.len() != f.dim() {
        return invalid(format!("start has length {}, problem dimension {}", y0.len(), f.dim()));
    }
    let clock = Instant::now();
    let elapsed_ms = || clock.elapsed().as_secs_f64() * 1e3;

    let mut y = y0.to_vec();
    if !reg_value(reg, &y)?.is_finite() {
        y = prox(reg, &y, 1.0)?;
    }
    let mut eval = f.evaluate(&y)?;
    let mut r_y = reg_value(reg, &y)?;
    let mut phi = eval.value + r_y;
    let mut solves = eval.pde_solves;
    let mut pg = prox_grad_norm(&y, &eval.gradient, reg)?;
    let tol_abs = cfg.outer_tol * pg;

    let mut mem = LbfgsMemory::new(cfg.memory).with_curvature_tol(cfg.curvature_tol);
    if let Some(step) = cfg.initial_step {
        let g_inf = eval.gradient.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if g_inf > 0.0 {
            mem.set_initial_gamma(step / g_inf);
        }
    }

    let mut trace = vec![IterationRecord {
        iter: 0,
        phi,
        misfit: eval.value,
        reg: r_y,
        ls_residual: eval.ls_residual,
        prox_grad_norm: pg,
        step: 0.0,
        inner_iters: 0,
        pde_solves: solves,
        wall_ms: elapsed_ms(),
    }];
    let mut window = VecDeque::from([phi]);
    let mut best = (phi, y.clone());
    let mut stop = StopReason::MaxIterations;
    let mut degraded = false;

    for k in 1..=cfg.max_outer_iters {
        if pg <= tol_abs {
            stop = StopReason::Tolerance;
            break;
        }
        let sub = spg_prox_solve(&mem, &y, &eval.gradient, reg, cfg)?;
        let mut target = sub.y;
        let mut d: Vec<f64> = target.iter().zip(&y).map(|(a, b)| a - b).collect();
        let mut r_target = reg_value(reg, &target)?;
        let mut slope = dot(&eval.gradient, &d) + r_target - r_y;
        if !(slope < 0.0) {
            log::debug!("quasi-Newton direction is not a descent direction (slope {slope:e}); using prox-gradient");
            d = steepest_fallback(&y, &eval.gradient, reg, mem.gamma())?;
            target = y.iter().zip(&d).map(|(a, b)| a + b).collect();
            r_target = reg_value(reg, &target)?;
            slope = dot(&eval.gradient, &d) + r_target - r_y;
            if !(slope < 0.0) {
                stop = StopReason::Stationary;
                break;
            }
        }

        let reference = window_max(&window);
        let mut eta = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let trial: Vec<f64> = if eta == 1.0 {
                target.clone()
            } else {
                y.iter().zip(&d).map(|(a, b)| a + eta * b).collect()
            };
            let r_trial = if eta == 1.0 { r_target } else { reg_value(reg, &trial)? };
            if r_trial.is_finite() {
                match f.evaluate(&trial) {
                    Ok(ev) => {
                        solves += ev.pde_solves;
                        let phi_trial = ev.value + r_trial;
                        if phi_trial <= reference + cfg.armijo_c * eta * slope {
                            accepted = Some((trial, ev, r_trial, phi_trial));
                            break;
                        }
                    }
                    Err(Error::InvalidModel { index, value }) => {
                        log::debug!("trial model invalid at cell {index} ({value:e}); backtracking");
                    }
                    Err(e) => return Err(e),
                }
            }
            eta *= cfg.backtrack;
        }
        let Some((y_new, eval_new, r_new, phi_new)) = accepted else {
            log::warn!("line search failed at outer iteration {k}; returning best iterate");
            degraded = true;
            stop = StopReason::LineSearchFailure;
            break;
        };

        let s: Vec<f64> = y_new.iter().zip(&y).map(|(a, b)| a - b).collect();
        let t: Vec<f64> = eval_new.gradient.iter().zip(&eval.gradient).map(|(a, b)| a - b).collect();
        mem.update(&s, &t)?;

        y = y_new;
        eval = eval_new;
        r_y = r_new;
        phi = phi_new;
        push_window(&mut window, phi, cfg.nonmonotone_window);
        if phi < best.0 {
            best = (phi, y.clone());
        }
        pg = prox_grad_norm(&y, &eval.gradient, reg)?;
        trace.push(IterationRecord {
            iter: k,
            phi,
            misfit: eval.value,
            reg: r_y,
            ls_residual: eval.ls_residual,
            prox_grad_norm: pg,
            step: eta,
            inner_iters: sub.iterations,
            pde_solves: solves,
            wall_ms: elapsed_ms(),
        });
        if norm(&s) <= cfg.step_collapse_tol * norm(&y).max(1.0) {
            stop = StopReason::StepCollapse;
            break;
        }
        if k == cfg.max_outer_iters && pg <= tol_abs {
            stop = StopReason::Tolerance;
        }
    }

    Ok(PqnResult {
        y: best.1,
        last_y: y,
        phi: best.0,
        trace,
        stop,
        degraded,
        skipped_pairs: mem.skipped(),
    })
}
