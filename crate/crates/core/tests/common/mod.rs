#![allow(dead_code)]

use owc_core::model::{DomainLayout, DomainTag, FieldState, PhysicalParams};
use owc_core::solver::{Forcing, LeftBoundary, Problem};

pub const G: f64 = 9.81;

pub fn params() -> PhysicalParams<f64> {
    PhysicalParams::reference()
}

/// Closed flume: walls at both ends.
pub fn closed(n_minus: usize, n_pl: usize, n_pr: usize) -> Problem<f64> {
    let p = params();
    Problem::new(p, DomainLayout::new(&p, 8.0, n_minus, n_pl, n_pr).unwrap())
}

/// Open upstream end driven by a small sine.
pub fn forced(n_minus: usize, n_pl: usize, n_pr: usize) -> Problem<f64> {
    closed(n_minus, n_pl, n_pr).with_forcing(
        LeftBoundary::Open,
        Forcing::Sine {
            amplitude: 0.01,
            omega: 2.0,
        },
    )
}

pub fn gaussian(a: f64, c: f64, w: f64) -> impl Fn(f64) -> f64 {
    move |x| a * (-((x - c) / w).powi(2)).exp()
}

/// Elevation bump on one sub-domain, at rest elsewhere.
pub fn bump_in(pr: &Problem<f64>, tag: DomainTag, a: f64, c: f64, w: f64) -> FieldState<f64> {
    let f = gaussian(a, c, w);
    FieldState::from_fn(
        &pr.layout,
        |t, x| if t == tag { (f(x), 0.0) } else { (0.0, 0.0) },
    )
}
