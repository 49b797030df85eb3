mod common;

use common::{closed, G};
use owc_core::model::{BoundaryState, DomainTag, FieldState};
use owc_core::solver::{
    linearized_step, Forcing, Frozen, LeftBoundary, LinearBoundaryData, Problem, SolverConfig,
};

fn cfg() -> SolverConfig<f64> {
    SolverConfig::new(1.0)
}

#[test]
fn rest_stays_at_rest() {
    let pr = closed(40, 28, 18);
    let rest = FieldState::rest(&pr.layout);
    let fz = Frozen::from_state(&pr, &rest, &BoundaryState::default(), 0.0).unwrap();
    let out = linearized_step(
        1e-3,
        &fz,
        &rest,
        &LinearBoundaryData::default(),
        &pr,
        &cfg(),
    )
    .unwrap();
    assert_eq!(out.domains, rest.domains);
}

#[test]
fn right_going_pulse_travels_at_the_rest_speed() {
    let pr = closed(800, 28, 18);
    let h_s = pr.params.h_s;
    let c = (G * h_s).sqrt();
    let (x0, w) = (-5.0, 0.3);
    let u0 = FieldState::from_fn(&pr.layout, |t, x| {
        if t == DomainTag::EMinus {
            let z = 0.01 * (-((x - x0) / w).powi(2)).exp();
            // linear right-going characteristic: q = c zeta
            (z, c * z)
        } else {
            (0.0, 0.0)
        }
    });
    let rest = FieldState::rest(&pr.layout);
    let fz = Frozen::from_state(&pr, &rest, &BoundaryState::default(), 0.0).unwrap();
    let sub = pr.layout.domain(DomainTag::EMinus);
    let dx = sub.dx();
    let steps = 100;
    let dt = 0.1 / steps as f64;
    let mut u = u0;
    for _ in 0..steps {
        u = linearized_step(dt, &fz, &u, &LinearBoundaryData::default(), &pr, &cfg()).unwrap();
    }
    let z = &u.domain(DomainTag::EMinus).zeta;
    let j = (0..z.len()).max_by(|&a, &b| z[a].total_cmp(&z[b])).unwrap();
    let peak = sub.cell_center(j);
    let expected = x0 + c * 0.1;
    assert!(
        (peak - expected).abs() <= dx,
        "peak {peak}, characteristic {expected}, dx {dx}"
    );
}

#[test]
fn superposition_of_boundary_data() {
    let pr: Problem<f64> = closed(40, 28, 18).with_forcing(LeftBoundary::Open, Forcing::None);
    // frozen at a nontrivial state so the coefficients vary in space
    let frozen_field = FieldState::from_fn(&pr.layout, |_, x| {
        (0.02 * (0.7 * x).sin(), 0.01 * (0.3 * x).cos())
    });
    let fz = Frozen::from_state(&pr, &frozen_field, &BoundaryState::new(0.01, 0.0), 0.0).unwrap();
    let zero = FieldState::rest(&pr.layout);
    let v1 = LinearBoundaryData {
        q_i: 0.03,
        inflow_zeta: 0.0,
    };
    let v2 = LinearBoundaryData {
        q_i: -0.01,
        inflow_zeta: 0.02,
    };
    let v12 = LinearBoundaryData {
        q_i: v1.q_i + v2.q_i,
        inflow_zeta: v1.inflow_zeta + v2.inflow_zeta,
    };
    let dt = 2e-3;
    let s1 = linearized_step(dt, &fz, &zero, &v1, &pr, &cfg()).unwrap();
    let s2 = linearized_step(dt, &fz, &zero, &v2, &pr, &cfg()).unwrap();
    let s12 = linearized_step(dt, &fz, &zero, &v12, &pr, &cfg()).unwrap();
    let mut touched = 0.0f64;
    for d in 0..3 {
        for j in 0..pr.layout.domains[d].n {
            let (a, b, ab) = (&s1.domains[d], &s2.domains[d], &s12.domains[d]);
            assert!((a.zeta[j] + b.zeta[j] - ab.zeta[j]).abs() <= 1e-12);
            assert!((a.q[j] + b.q[j] - ab.q[j]).abs() <= 1e-12);
            touched = touched.max(ab.q[j].abs());
        }
    }
    assert!(touched > 0.0, "boundary data had no effect");

    // linearity in the state as well
    let u1 = FieldState::from_fn(&pr.layout, |_, x| (0.01 * (x).cos(), 0.0));
    let u2 = FieldState::from_fn(&pr.layout, |_, x| (0.0, 0.02 * (0.5 * x).sin()));
    let mut u12 = u1.clone();
    for d in 0..3 {
        for j in 0..pr.layout.domains[d].n {
            u12.domains[d].zeta[j] += u2.domains[d].zeta[j];
            u12.domains[d].q[j] += u2.domains[d].q[j];
        }
    }
    let none = LinearBoundaryData::default();
    let a = linearized_step(dt, &fz, &u1, &none, &pr, &cfg()).unwrap();
    let b = linearized_step(dt, &fz, &u2, &none, &pr, &cfg()).unwrap();
    let ab = linearized_step(dt, &fz, &u12, &none, &pr, &cfg()).unwrap();
    for d in 0..3 {
        for j in 0..pr.layout.domains[d].n {
            assert!(
                (a.domains[d].zeta[j] + b.domains[d].zeta[j] - ab.domains[d].zeta[j]).abs()
                    <= 1e-12
            );
            assert!((a.domains[d].q[j] + b.domains[d].q[j] - ab.domains[d].q[j]).abs() <= 1e-12);
        }
    }
}
