//! Finite-difference check of the adjoint-state gradient.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{Blob, Layer, ModelSpec};
use super::synth::{gaussian_blur, synth_model};
use crate::error::Result;
use crate::helmholtz::{predict_data, AcquisitionGeometry, GridModel2D, GridPoint, Sponge};
use crate::objective::CompositeProblem;
use crate::penalties::PenaltyKind;
use crate::regularizers::RegularizerKind;
use crate::transforms::TransformKind;

/// Relative step for central differences in coefficient space.
pub const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckCase {
    pub penalty: String,
    pub transform: String,
    pub coords: Vec<usize>,
    pub adjoint: Vec<f64>,
    pub finite_difference: Vec<f64>,
    pub max_rel_err: f64,
}

/// 12x12 two-layer model with a blob, two sources and two receiver rows,
/// two frequencies. Returns the truth and the smoothed start model.
pub fn check_models() -> Result<(GridModel2D, GridModel2D)> {
    let spec = ModelSpec::Layered {
        nz: 12,
        nx: 12,
        h: 10.0,
        layers: vec![Layer { top: 0, velocity: 2000.0 }, Layer { top: 6, velocity: 2400.0 }],
        blobs: vec![Blob { iz: 5.0, ix: 7.0, sigma: 1.5, dv: 250.0 }],
        random_blobs: None,
    };
    let truth = synth_model(&spec, 0)?;
    let start = gaussian_blur(&truth, 2.0)?;
    Ok((truth, start))
}

pub fn check_geometry() -> AcquisitionGeometry {
    let receivers = [2, 9]
        .iter()
        .flat_map(|&iz| (2..10).map(move |ix| GridPoint::new(iz, ix)))
        .collect();
    AcquisitionGeometry::new(
        vec![GridPoint::new(4, 4), GridPoint::new(4, 8)],
        receivers,
        vec![2.0 * std::f64::consts::PI * 8.0, 2.0 * std::f64::consts::PI * 12.0],
        Sponge { width: 2, gamma_max: 1.0 },
    )
}

/// Penalty parameters set from the start residual so that both regimes of
/// Huber and Student's t are exercised. The Huber threshold sits in the
/// widest gap of the middle half of the residual moduli, away from any
/// residual, since the penalty is only once differentiable there.
pub fn check_penalties(truth: &GridModel2D, start: &GridModel2D, geom: &AcquisitionGeometry) -> Result<Vec<PenaltyKind>> {
    let observed = predict_data(truth, geom)?;
    let predicted = predict_data(start, geom)?;
    let mut moduli: Vec<f64> = (0..geom.omegas.len())
        .flat_map(|k| {
            let (p, o) = (predicted.matrix(k), observed.matrix(k));
            p.iter().zip(o).map(|(a, b)| (a - b).norm()).collect::<Vec<_>>()
        })
        .collect();
    moduli.sort_by(f64::total_cmp);
    let median = moduli[moduli.len() / 2];
    let (lo, hi) = (moduli.len() / 4, 3 * moduli.len() / 4);
    let gap = (lo..hi)
        .max_by(|&a, &b| (moduli[a + 1] - moduli[a]).total_cmp(&(moduli[b + 1] - moduli[b])))
        .unwrap_or(lo);
    let kappa = 0.5 * (moduli[gap] + moduli[gap + 1]);
    Ok(vec![
        PenaltyKind::LeastSquares,
        PenaltyKind::Huber { kappa },
        PenaltyKind::StudentT { nu: median * median },
    ])
}

fn penalty_name(p: &PenaltyKind) -> String {
    match p {
        PenaltyKind::LeastSquares => "least_squares".into(),
        PenaltyKind::Huber { .. } => "huber".into(),
        PenaltyKind::StudentT { .. } => "student_t".into(),
    }
}

/// Runs every penalty and transform and compares `n_coords` seeded random
/// gradient entries with central differences.
pub fn gradient_check_suite(seed: u64, n_coords: usize) -> Result<Vec<GradCheckCase>> {
    let (truth, start) = check_models()?;
    let geom = check_geometry();
    let observed = predict_data(&truth, &geom)?;
    let (nz, nx) = (truth.nz(), truth.nx());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();
    for penalty in check_penalties(&truth, &start, &geom)? {
        for (tname, transform) in [("identity", TransformKind::Identity), ("haar", TransformKind::haar(2, nz, nx)?)] {
            let problem = CompositeProblem::new(
                truth.clone(),
                geom.clone(),
                observed.clone(),
                penalty,
                RegularizerKind::Zero,
                transform,
            )?
            .with_model_scale(1e-6)?;
            let y = problem.coefficients_from(&start)?;
            let grad = problem.eval_smooth(&y)?.gradient;
            let coords = sample(&mut rng, y.len(), n_coords.min(y.len())).into_vec();
            let mut fd = Vec::with_capacity(coords.len());
            let mut worst: f64 = 0.0;
            for &i in &coords {
                let step = FD_STEP * y[i].abs().max(1.0);
                let mut yp = y.clone();
                yp[i] += step;
                let mut ym = y.clone();
                ym[i] -= step;
                let d = (problem.eval_total(&yp)? - problem.eval_total(&ym)?) / (2.0 * step);
                worst = worst.max((d - grad[i]).abs() / d.abs().max(grad[i].abs()).max(f64::MIN_POSITIVE));
                fd.push(d);
            }
            cases.push(GradCheckCase {
                penalty: penalty_name(&penalty),
                transform: tname.into(),
                adjoint: coords.iter().map(|&i| grad[i]).collect(),
                coords,
                finite_difference: fd,
                max_rel_err: worst,
            });
        }
    }
    Ok(cases)
}
