//! End-to-end inversion runs and their on-disk artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, StartSpec};
use super::synth::{gaussian_blur, synth_data, synth_model};
use crate::error::{Error, Result};
use crate::helmholtz::io::{read_data, read_model, write_data, write_model};
use crate::helmholtz::GridModel2D;
use crate::objective::CompositeProblem;
use crate::pqn::{minimize, IterationRecord, PqnResult, StopReason};

pub const CSV_HEADER: &str = "iter,phi,misfit,reg,ls_residual,prox_grad_norm,step,inner_iters,pde_solves,wall_ms";

pub const TRUE_MODEL_FILE: &str = "true_model.bin";
pub const INITIAL_MODEL_FILE: &str = "initial_model.bin";
pub const FINAL_MODEL_FILE: &str = "final_model.bin";
pub const DATA_FILE: &str = "observed_data.bin";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const CONFIG_ECHO_FILE: &str = "config.json";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads for the frequency loop; `Some(1)` also writes zero
    /// wall times to the CSV so that repeated runs are byte-identical.
    pub threads: Option<usize>,
}

impl RunOptions {
    pub fn deterministic(&self) -> bool {
        self.threads == Some(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub initial_phi: f64,
    pub final_phi: f64,
    pub final_misfit: f64,
    pub final_reg: f64,
    pub initial_ls_residual: f64,
    pub ls_residual: f64,
    pub initial_model_rmse: f64,
    pub model_rmse: f64,
    pub outer_iterations: usize,
    pub pde_solves: usize,
    pub skipped_pairs: usize,
    pub zero_coefficients: usize,
    pub n_coefficients: usize,
    pub stop_reason: StopReason,
    pub converged: bool,
    pub degraded: bool,
    pub seed: u64,
    pub wall_ms: f64,
}

impl RunSummary {
    /// Process exit status: 0 converged, 2 budget or step collapse, 3 line-search failure.
    pub fn exit_code(&self) -> i32 {
        if self.degraded {
            3
        } else if self.converged {
            0
        } else {
            2
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub initial_model: PathBuf,
    pub final_model: PathBuf,
    pub convergence_csv: PathBuf,
    pub config_echo: PathBuf,
    pub summary_json: PathBuf,
    pub summary: RunSummary,
    pub result: PqnResult,
    pub true_model: GridModel2D,
    pub start_model: GridModel2D,
    pub final_values: GridModel2D,
}

pub fn model_rmse(a: &GridModel2D, b: &GridModel2D) -> f64 {
    let n = a.len() as f64;
    (a.values().iter().zip(b.values()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n).sqrt()
}

/// CSV text for a trace; wall times are written as 0 when `zero_wall` is set.
pub fn convergence_csv(trace: &[IterationRecord], zero_wall: bool) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in trace {
        let wall = if zero_wall { 0.0 } else { r.wall_ms };
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{}",
            r.iter, r.phi, r.misfit, r.reg, r.ls_residual, r.prox_grad_norm, r.step, r.inner_iters, r.pde_solves, wall
        )
        .expect("write to String");
    }
    out
}

fn start_model(cfg: &ExperimentConfig, truth: &GridModel2D) -> Result<GridModel2D> {
    let m = match &cfg.start {
        StartSpec::BlurredTruth { sigma } => gaussian_blur(truth, *sigma)?,
        StartSpec::File { path } => read_model(path)?,
        StartSpec::PriorRun { dir } => read_model(&dir.join(FINAL_MODEL_FILE))?,
    };
    if m.nz() != truth.nz() || m.nx() != truth.nx() {
        return Err(Error::Config {
            field: "start".into(),
            message: format!("start grid {}x{} differs from model grid {}x{}", m.nz(), m.nx(), truth.nz(), truth.nx()),
        });
    }
    Ok(m)
}

/// Builds the problem described by `cfg` along with the true and start models.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<(CompositeProblem, GridModel2D, GridModel2D)> {
    cfg.validate()?;
    let truth = synth_model(&cfg.model, cfg.seed)?;
    let (nz, nx) = (truth.nz(), truth.nx());
    let geom = cfg.geometry.build(nz, nx, &cfg.frequencies_hz)?;
    geom.check_sampling(&truth);
    let data = match &cfg.data_path {
        Some(p) => read_data(p)?,
        None => synth_data(&truth, &geom, &cfg.noise, cfg.seed)?,
    };
    let regularizer = cfg.regularizer.build(nz, nx)?;
    let transform = cfg.transform.build(nz, nx)?;
    let mut problem = CompositeProblem::new(truth.clone(), geom, data, cfg.penalty, regularizer, transform)?
        .with_model_scale(cfg.model_scale)?;
    if let Some([vmin, vmax]) = cfg.velocity_bounds {
        problem = problem.with_physical_bounds(1.0 / (vmax * vmax), 1.0 / (vmin * vmin))?;
    }
    if let Some(w) = &cfg.frequency_weights {
        problem = problem.with_frequency_weights(w.clone())?;
    }
    let start = start_model(cfg, &truth)?;
    Ok((problem, truth, start))
}

/// Runs one configured inversion and writes its artifacts to `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunArtifacts> {
    let clock = Instant::now();
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = opts.threads {
            b = b.num_threads(t);
        }
        b.build().map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
    };
    let (problem, truth, start) = pool.install(|| build_problem(cfg))?;
    let y0 = problem.coefficients_from(&start)?;
    log::info!(
        "inverting {}x{} grid, {} sources, {} receivers, {} frequencies",
        truth.nz(),
        truth.nx(),
        problem.geometry().n_src(),
        problem.geometry().n_recv(),
        problem.geometry().omegas.len()
    );
    let result = pool.install(|| minimize(&problem, &problem.regularizer, &y0, &cfg.solver))?;
    let final_model = problem.model_from(&result.y)?;
    let wall_ms = clock.elapsed().as_secs_f64() * 1e3;

    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let path = |name: &str| dir.join(name);
    write_model(&path(TRUE_MODEL_FILE), &truth)?;
    write_model(&path(INITIAL_MODEL_FILE), &start)?;
    write_model(&path(FINAL_MODEL_FILE), &final_model)?;
    write_data(&path(DATA_FILE), problem.observed())?;
    fs::write(path(CONVERGENCE_FILE), convergence_csv(&result.trace, opts.deterministic()))?;
    fs::write(path(CONFIG_ECHO_FILE), serde_json::to_string_pretty(cfg)?)?;

    let first = &result.trace[0];
    let best = result
        .trace
        .iter()
        .rfind(|r| r.phi == result.phi)
        .unwrap_or_else(|| result.trace.last().expect("non-empty trace"));
    let summary = RunSummary {
        initial_phi: first.phi,
        final_phi: result.phi,
        final_misfit: best.misfit,
        final_reg: best.reg,
        initial_ls_residual: first.ls_residual,
        ls_residual: best.ls_residual,
        initial_model_rmse: model_rmse(&start, &truth),
        model_rmse: model_rmse(&final_model, &truth),
        outer_iterations: result.trace.len() - 1,
        pde_solves: result.trace.last().map_or(0, |r| r.pde_solves),
        skipped_pairs: result.skipped_pairs,
        zero_coefficients: result.y.iter().filter(|v| **v == 0.0).count(),
        n_coefficients: result.y.len(),
        stop_reason: result.stop,
        converged: matches!(result.stop, StopReason::Tolerance | StopReason::Stationary),
        degraded: result.degraded,
        seed: cfg.seed,
        wall_ms,
    };
    fs::write(path(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
    log::info!(
        "stop: {:?} after {} iterations, phi {:e} -> {:e}",
        summary.stop_reason,
        summary.outer_iterations,
        summary.initial_phi,
        summary.final_phi
    );

    Ok(RunArtifacts {
        initial_model: path(INITIAL_MODEL_FILE),
        final_model: path(FINAL_MODEL_FILE),
        convergence_csv: path(CONVERGENCE_FILE),
        config_echo: path(CONFIG_ECHO_FILE),
        summary_json: path(SUMMARY_FILE),
        dir,
        summary,
        result,
        true_model: truth,
        start_model: start,
        final_values: final_model,
    })
}

/// Reads a `summary.json` written by [`run_experiment`].
pub fn read_summary(dir: &Path) -> Result<RunSummary> {
    Ok(serde_json::from_str(&fs::read_to_string(dir.join(SUMMARY_FILE))?)?)
}
