mod common;

use common::{params, G};
use owc_core::coupling::{
    average, inflow_closure, interior_pressure, jump, sidewall_closure, step_closure, theta,
    OdeInputs,
};
use owc_core::diagnostics::time_sobolev_norm;
use owc_core::model::BoundaryState;
use owc_core::swe::{eigen, flux, jacobian, riemann_invariants, symmetrizer, CellState};
use proptest::prelude::*;

/// Wet, subcritical states with Froude number below 0.8.
fn subcritical() -> impl Strategy<Value = CellState<f64>> {
    (
        prop_oneof![Just(1.0), Just(2.0)],
        -0.4f64..0.4,
        -0.8f64..0.8,
    )
        .prop_map(|(h_rest, z, fr)| {
            let h = h_rest + z;
            CellState::new(z, fr * h * (G * h).sqrt(), h_rest)
        })
}

/// Moderate states around one rest depth. Strong flow away from an interface
/// has no subcritical interface state, so the Froude number stays small.
fn at_rest_depth(h_rest: f64) -> impl Strategy<Value = CellState<f64>> {
    (-0.3f64..0.3, -0.3f64..0.3).prop_map(move |(z, fr)| {
        let h = h_rest + z;
        CellState::new(z, fr * h * (G * h).sqrt(), h_rest)
    })
}

fn mirror(u: &CellState<f64>) -> CellState<f64> {
    CellState::new(u.zeta, -u.q, u.h_rest)
}

proptest! {
    #[test]
    fn eigenpairs_hold(u in subcritical()) {
        let a = jacobian(&u, G).unwrap();
        let e = eigen(&u, G).unwrap();
        prop_assert!(e.lambda_plus > 0.0 && e.lambda_minus < 0.0);
        for (l, v) in [(e.lambda_plus, e.e_plus), (e.lambda_minus, e.e_minus)] {
            let av = a.mul_vec(&v);
            let res = ((av[0] - l * v[0]).powi(2) + (av[1] - l * v[1]).powi(2)).sqrt();
            prop_assert!(res <= 1e-12 * a.frobenius(), "residual {res}");
        }
    }

    #[test]
    fn symmetrizer_is_spd_and_symmetrizes(u in subcritical()) {
        let s = symmetrizer(&u, G).unwrap();
        let a = jacobian(&u, G).unwrap();
        prop_assert_eq!(s.0[0][1], s.0[1][0]);
        prop_assert!(s.0[0][0] > 0.0 && s.det() > 0.0);
        let h = u.depth();
        prop_assert!((s.det() - G * h).abs() <= 1e-12 * G * h);
        let sa = s * a;
        prop_assert!(sa.asymmetry() <= 1e-12 * s.frobenius() * a.frobenius());
    }

    #[test]
    fn flux_derivative_matches_jacobian(u in subcritical()) {
        let a = jacobian(&u, G).unwrap();
        let eps = 1e-7;
        for k in 0..2 {
            let shift = |s: f64| if k == 0 { u.with(u.zeta + s, u.q) } else { u.with(u.zeta, u.q + s) };
            let fp = flux(&shift(eps), G).unwrap();
            let fm = flux(&shift(-eps), G).unwrap();
            for i in 0..2 {
                let fd = (fp[i] - fm[i]) / (2.0 * eps);
                prop_assert!((fd - a.0[i][k]).abs() <= 1e-6 * a.frobenius().max(1.0), "d F{i}/d u{k}: {fd} vs {}", a.0[i][k]);
            }
        }
    }

    #[test]
    fn sidewall_ghosts_carry_q_i_and_keep_outgoing_invariants(
        l in at_rest_depth(1.0),
        r in at_rest_depth(1.0),
        q_i in -0.2f64..0.2,
    ) {
        let gs = BoundaryState::new(q_i, 0.0);
        let (gl, gr) = sidewall_closure(&l, &r, &gs, G).unwrap();
        prop_assert_eq!(gl.q, q_i);
        prop_assert_eq!(gr.q, q_i);
        let (rl, rgl) = (riemann_invariants(&l, G).unwrap().plus, riemann_invariants(&gl, G).unwrap().plus);
        let (rr, rgr) = (riemann_invariants(&r, G).unwrap().minus, riemann_invariants(&gr, G).unwrap().minus);
        prop_assert!((rl - rgl).abs() <= 1e-12 * rl.abs().max(1.0));
        prop_assert!((rr - rgr).abs() <= 1e-12 * rr.abs().max(1.0));

        // swapping sides with reversed discharges mirrors the ghosts
        let (ml, mr) = sidewall_closure(&mirror(&r), &mirror(&l), &BoundaryState::new(-q_i, 0.0), G).unwrap();
        prop_assert!((ml.zeta - gr.zeta).abs() <= 1e-12 && (ml.q + gr.q).abs() <= 1e-15);
        prop_assert!((mr.zeta - gl.zeta).abs() <= 1e-12 && (mr.q + gl.q).abs() <= 1e-15);
    }

    #[test]
    fn step_state_is_continuous_and_upwinded(l in at_rest_depth(2.0), r in at_rest_depth(1.0)) {
        let (sl, sr) = step_closure(&l, &r, G).unwrap();
        prop_assert_eq!((sl.zeta, sl.q), (sr.zeta, sr.q));
        prop_assert_eq!((sl.h_rest, sr.h_rest), (2.0, 1.0));
        let rp = riemann_invariants(&l, G).unwrap().plus;
        let rm = riemann_invariants(&r, G).unwrap().minus;
        prop_assert!((riemann_invariants(&sl, G).unwrap().plus - rp).abs() <= 1e-10);
        prop_assert!((riemann_invariants(&sr, G).unwrap().minus - rm).abs() <= 1e-10);
    }

    #[test]
    fn theta_is_linear_in_g(
        l in at_rest_depth(1.0),
        r in at_rest_depth(1.0),
        g1 in (-1.0f64..1.0, -500.0f64..500.0),
        g2 in (-1.0f64..1.0, -500.0f64..500.0),
        a in -2.0f64..2.0,
    ) {
        let p = params();
        let th = |q: f64, pc: f64| theta(&OdeInputs { left: l, right: r, g: BoundaryState::new(q, pc) }, &p).unwrap();
        let zero = th(0.0, 0.0);
        let t1 = th(g1.0, g1.1);
        let t2 = th(g2.0, g2.1);
        let tc = th(a * g1.0 + g2.0, a * g1.1 + g2.1);
        for k in 0..2 {
            // the trace jump is an offset independent of G
            let lin = a * (t1[k] - zero[k]) + (t2[k] - zero[k]) + zero[k];
            prop_assert!((tc[k] - lin).abs() <= 1e-9 * (1.0 + lin.abs()), "{k}: {} vs {lin}", tc[k]);
        }
    }

    #[test]
    fn interior_pressure_inverts_the_ode(l in at_rest_depth(1.0), r in at_rest_depth(1.0), q_i in -0.5f64..0.5, pc in -300.0f64..300.0) {
        let p = params();
        let gs = BoundaryState::new(q_i, pc);
        let d = theta(&OdeInputs { left: l, right: r, g: gs }, &p).unwrap();
        let prof = interior_pressure(&gs, d[0], &p);
        let bern = |u: &CellState<f64>| G * u.zeta + u.q * u.q / (2.0 * u.depth().powi(2));
        let rhs = p.rho * jump(bern(&l), bern(&r)) + pc;
        prop_assert!((prof.jump() - rhs).abs() <= 1e-12 * rhs.abs().max(1.0) * 1e2, "{} vs {rhs}", prof.jump());
    }

    #[test]
    fn inflow_discharge_grows_with_target(z1 in -0.3f64..0.3, dz in 1e-3f64..0.2) {
        let rm = riemann_invariants(&CellState::new(0.0, 0.0, 2.0), G).unwrap().minus;
        let a = inflow_closure(z1, rm, 2.0, G).unwrap();
        let b = inflow_closure(z1 + dz, rm, 2.0, G).unwrap();
        prop_assert!(b.q > a.q);
    }

    #[test]
    fn jump_and_average_algebra(a in -1e3f64..1e3, b in -1e3f64..1e3) {
        prop_assert_eq!(jump(a, b), -jump(b, a));
        prop_assert_eq!(average(a, b), average(b, a));
    }

    #[test]
    fn time_norms_are_homogeneous(vals in prop::collection::vec(-1.0f64..1.0, 8..40), s in -4.0f64..4.0, m in 0usize..3) {
        let t: Vec<f64> = (0..vals.len()).map(|k| 0.1 * k as f64).collect();
        let base = time_sobolev_norm(&t, std::slice::from_ref(&vals), m);
        let scaled = time_sobolev_norm(&t, &[vals.iter().map(|v| s * v).collect()], m);
        prop_assert!((scaled - s.abs() * base).abs() <= 1e-12 * (1.0 + base));
        if m > 0 {
            prop_assert!(time_sobolev_norm(&t, std::slice::from_ref(&vals), m - 1) <= base * (1.0 + 1e-12));
        }
    }
}
