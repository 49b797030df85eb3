//! The whole pipeline runs in single precision.

use owc_core::diagnostics::mass_drift;
use owc_core::model::{BoundaryState, DomainLayout, DomainTag, FieldState, PhysicalParams};
use owc_core::solver::{run, Problem, SolverConfig};
use owc_core::swe::{lopatinskii, CellState, EigenScaling};

fn params() -> PhysicalParams<f32> {
    let p = PhysicalParams::reference();
    PhysicalParams {
        g: p.g as f32,
        rho: p.rho as f32,
        h_s: p.h_s as f32,
        h_0: p.h_0 as f32,
        zeta_w: p.zeta_w as f32,
        l_0: p.l_0 as f32,
        r: p.r as f32,
        l_1: p.l_1 as f32,
        gamma: p.gamma as f32,
        p_atm: p.p_atm as f32,
        h_ch: p.h_ch as f32,
        k: p.k as f32,
    }
}

#[test]
fn rest_and_small_wave_in_f32() {
    let p = params();
    assert!(p.validate().passed());
    let pr = Problem::new(p, DomainLayout::new(&p, 8.0f32, 40, 28, 18).unwrap());
    let rest = FieldState::rest(&pr.layout);
    let res = run(
        &pr,
        &rest,
        &BoundaryState::default(),
        &SolverConfig::new(0.2f32),
    )
    .unwrap();
    assert_eq!(res.final_field.domains, rest.domains);

    let u0 = FieldState::from_fn(&pr.layout, |t, x| {
        if t == DomainTag::EPlusRight {
            (0.01 * (-(x - 8.0) * (x - 8.0)).exp(), 0.0)
        } else {
            (0.0, 0.0)
        }
    });
    let res = run(
        &pr,
        &u0,
        &BoundaryState::default(),
        &SolverConfig::new(0.5f32),
    )
    .unwrap();
    assert!(res.final_field.all_finite() && res.final_g.is_finite());
    assert!(res.final_g.q_i != 0.0);
    assert!(mass_drift(&res, &pr.layout) < 1e-5);
}

#[test]
fn lopatinskii_in_f32() {
    let u = CellState::new(0.0f32, 0.0, 1.0);
    let (l, inv) = lopatinskii(&u, &u, 9.81, EigenScaling::SecondComponentOne).unwrap();
    assert_eq!(l.det(), -1.0);
    assert!(inv <= 2.0);
}
