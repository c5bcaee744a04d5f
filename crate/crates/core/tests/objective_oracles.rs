mod common;

use common::*;
use fwiprox::experiment::gradcheck::{check_geometry, check_models};
use fwiprox::helmholtz::{misfit_and_gradient, predict_data};
use fwiprox::transforms;
use fwiprox::{CompositeProblem, Error, PenaltyKind, RegularizerKind, SmoothObjective, TransformKind};

fn problem(transform: TransformKind, penalty: PenaltyKind, reg: RegularizerKind) -> (CompositeProblem, Vec<f64>) {
    let (truth, start) = check_models().unwrap();
    let geom = check_geometry();
    let observed = predict_data(&truth, &geom).unwrap();
    let p = CompositeProblem::new(truth, geom, observed, penalty, reg, transform)
        .unwrap()
        .with_model_scale(1e-6)
        .unwrap();
    let y = p.coefficients_from(&start).unwrap();
    (p, y)
}

#[test]
fn coefficient_gradient_is_scaled_adjoint_of_model_gradient() {
    let haar = TransformKind::haar(2, 12, 12).unwrap();
    let (p, y) = problem(haar, PenaltyKind::LeastSquares, RegularizerKind::Zero);
    let model = p.model_from(&y).unwrap();
    let gm = misfit_and_gradient(&model, p.geometry(), p.observed(), &PenaltyKind::LeastSquares, &[1.0, 1.0], true)
        .unwrap()
        .gradient
        .unwrap();
    let want: Vec<f64> = transforms::adjoint(&haar, &gm).unwrap().iter().map(|g| g * 1e-6).collect();
    let got = p.evaluate(&y).unwrap().gradient;
    let scale = want.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(max_abs_diff(&got, &want) <= 1e-12 * scale);
}

#[test]
fn identity_and_haar_problems_agree_on_the_same_model() {
    let (pi, yi) = problem(TransformKind::Identity, PenaltyKind::StudentT { nu: 1e-6 }, RegularizerKind::Zero);
    let (ph, yh) = problem(TransformKind::haar(2, 12, 12).unwrap(), PenaltyKind::StudentT { nu: 1e-6 }, RegularizerKind::Zero);
    let ei = pi.evaluate(&yi).unwrap();
    let eh = ph.evaluate(&yh).unwrap();
    assert!((ei.value - eh.value).abs() <= 1e-12 * ei.value.abs());
    // gradient norms agree since the transform is orthonormal
    let n = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((n(&ei.gradient) - n(&eh.gradient)).abs() <= 1e-9 * n(&ei.gradient));
}

#[test]
fn haar_domain_gradient_matches_finite_differences() {
    for penalty in [PenaltyKind::LeastSquares, PenaltyKind::StudentT { nu: 1e-6 }] {
        let (p, y) = problem(TransformKind::haar(2, 12, 12).unwrap(), penalty, RegularizerKind::Zero);
        let g = p.evaluate(&y).unwrap().gradient;
        let f = |v: &[f64]| p.eval_total(v).unwrap();
        for i in [0, 5, 17, 40, 77, 143] {
            let fd = central_difference(f, &y, i, 1e-4 * y[i].abs().max(1.0));
            let rel = (fd - g[i]).abs() / fd.abs().max(g[i].abs());
            assert!(rel < 1e-5, "{penalty:?} coefficient {i}: {fd} vs {}", g[i]);
        }
    }
}

#[test]
fn eval_smooth_reports_regularizer_and_solves() {
    let (p, y) = problem(TransformKind::Identity, PenaltyKind::LeastSquares, RegularizerKind::L1Penalty { lambda: 0.3 });
    let rec = p.eval_smooth(&y).unwrap();
    assert!((rec.reg - 0.3 * l1(&y)).abs() <= 1e-12 * rec.reg);
    assert_eq!(rec.total, rec.smooth + rec.reg);
    assert_eq!(rec.pde_solve_count, 2 * 2 * 2);
    assert_eq!(rec.ls_residual, rec.smooth);
    assert!((p.eval_total(&y).unwrap() - rec.total).abs() <= 1e-12 * rec.total);
}

#[test]
fn weights_combine_single_frequency_misfits() {
    let (truth, start) = check_models().unwrap();
    let geom = check_geometry();
    let observed = predict_data(&truth, &geom).unwrap();
    let both = misfit_and_gradient(&start, &geom, &observed, &PenaltyKind::LeastSquares, &[2.0, 0.5], false)
        .unwrap()
        .value;
    let first = misfit_and_gradient(&start, &geom, &observed, &PenaltyKind::LeastSquares, &[1.0, 0.0], false)
        .unwrap()
        .value;
    let second = misfit_and_gradient(&start, &geom, &observed, &PenaltyKind::LeastSquares, &[0.0, 1.0], false)
        .unwrap()
        .value;
    assert!((both - (2.0 * first + 0.5 * second)).abs() <= 1e-12 * both);
}

#[test]
fn out_of_bounds_models_are_rejected() {
    let (p, y) = problem(TransformKind::Identity, PenaltyKind::LeastSquares, RegularizerKind::Zero);
    let p = p.with_physical_bounds(1.0 / 3000f64.powi(2), 1.0 / 1900f64.powi(2)).unwrap();
    assert!(p.evaluate(&y).is_ok());
    let mut bad = y.clone();
    bad[30] = 1e6 / 1000f64.powi(2);
    assert!(matches!(p.evaluate(&bad), Err(Error::InvalidModel { index: 30, .. })));
    bad[30] = -0.1;
    assert!(matches!(p.evaluate(&bad), Err(Error::InvalidModel { .. })));
}

#[test]
fn coefficients_round_trip() {
    let (p, y) = problem(TransformKind::haar(2, 12, 12).unwrap(), PenaltyKind::LeastSquares, RegularizerKind::Zero);
    let back = p.coefficients_from(&p.model_from(&y).unwrap()).unwrap();
    assert!(max_abs_diff(&back, &y) <= 1e-12);
}
