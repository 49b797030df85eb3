mod common;

use common::{bump_in, closed, forced};
use owc_core::diagnostics::{chamber_identity, energy_monitor, mass_drift, physical_energy};
use owc_core::model::{BoundaryState, DomainTag, FieldState};
use owc_core::solver::{picard_solve, run, OdeStepper, PicardMode, SolverConfig};

#[test]
fn closed_flume_conserves_volume() {
    let pr = closed(80, 56, 36);
    let u0 = bump_in(&pr, DomainTag::EPlusLeft, 0.02, 3.0, 0.5);
    let res = run(&pr, &u0, &BoundaryState::default(), &SolverConfig::new(1.0)).unwrap();
    let drift = mass_drift(&res, &pr.layout);
    assert!(drift <= 1e-12, "relative drift {drift:e}");
}

#[test]
fn chamber_identity_residual_shrinks_under_refinement() {
    let mut last = f64::INFINITY;
    for k in [1, 2, 4] {
        let pr = forced(25 * k, 28 * k, 50 * k);
        let res = run(
            &pr,
            &FieldState::rest(&pr.layout),
            &BoundaryState::default(),
            &SolverConfig::new(4.0),
        )
        .unwrap();
        let ci = chamber_identity(&res, &pr.params);
        assert!(ci.amplitude > 0.0);
        assert!(
            ci.max_residual < last,
            "level {k}: {} vs {last}",
            ci.max_residual
        );
        last = ci.max_residual;
    }
}

#[test]
fn constant_pressure_reduction_keeps_p_ch_zero() {
    let mut pr = forced(40, 28, 18);
    pr.params.h_ch = f64::INFINITY;
    assert_eq!(pr.params.gamma_2(), 0.0);
    assert!(pr.params.validate().passed());
    let u0 = bump_in(&pr, DomainTag::EPlusRight, 0.01, 8.0, 0.5);
    for stepper in [OdeStepper::Euler, OdeStepper::Rk2, OdeStepper::Rk4] {
        let mut cfg = SolverConfig::new(0.5);
        cfg.ode_stepper = stepper;
        let res = run(&pr, &u0, &BoundaryState::default(), &cfg).unwrap();
        assert!(res.traces.q_i().iter().any(|&q| q != 0.0));
        assert!(res.traces.p_ch().iter().all(|&p| p.abs() <= 1e-14));
    }
}

#[test]
fn energy_is_quadratic_and_vanishes_at_rest() {
    let pr = closed(40, 28, 18);
    let g = BoundaryState::default();
    assert_eq!(
        physical_energy(&pr.params, &pr.layout, &FieldState::rest(&pr.layout), &g),
        0.0
    );
    let u1 = bump_in(&pr, DomainTag::EMinus, 0.01, -4.0, 1.0);
    let u2 = bump_in(&pr, DomainTag::EMinus, 0.02, -4.0, 1.0);
    let e1 = physical_energy(&pr.params, &pr.layout, &u1, &g);
    let e2 = physical_energy(&pr.params, &pr.layout, &u2, &g);
    assert!((e2 / e1 - 4.0).abs() < 1e-12);
}

#[test]
fn closed_flume_energy_does_not_grow() {
    let pr = closed(320, 224, 144);
    let u0 = bump_in(&pr, DomainTag::EMinus, 0.005, -4.0, 1.0);
    let res = run(&pr, &u0, &BoundaryState::default(), &SolverConfig::new(1.0)).unwrap();
    let e = &res.series.energy;
    for (k, w) in e.windows(2).enumerate() {
        let dt = res.series.t[k + 1] - res.series.t[k];
        assert!(
            w[1] <= w[0] * (1.0 + 1e-3 * dt),
            "energy grew at row {k}: {} -> {}",
            w[0],
            w[1]
        );
    }
    let mon = energy_monitor(&res, &pr).unwrap();
    assert_eq!(mon.t.len(), e.len());
    assert!(mon.symmetrizer[0] > 0.0);
}

#[test]
fn picard_on_rest_stops_after_one_iteration() {
    let pr = closed(40, 28, 18);
    let mut cfg = SolverConfig::new(0.1);
    cfg.picard = PicardMode::On {
        max_iter: 5,
        tol: 1e-12,
    };
    let out = picard_solve(
        &pr,
        &FieldState::rest(&pr.layout),
        &BoundaryState::default(),
        &cfg,
    )
    .unwrap();
    assert_eq!(out.iterations, 1);
    assert_eq!(out.differences, vec![0.0]);
}
