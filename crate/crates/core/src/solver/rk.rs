//! Explicit Runge–Kutta steppers applied to the whole semi-discrete state.

use crate::error::Result;
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OdeStepper {
    Euler,
    /// Heun's method (two-stage SSP).
    #[default]
    Rk2,
    /// Classical fourth order.
    Rk4,
}

impl OdeStepper {
    pub fn as_str(self) -> &'static str {
        match self {
            OdeStepper::Euler => "euler",
            OdeStepper::Rk2 => "rk2",
            OdeStepper::Rk4 => "rk4",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "euler" => Some(OdeStepper::Euler),
            "rk2" => Some(OdeStepper::Rk2),
            "rk4" => Some(OdeStepper::Rk4),
            _ => None,
        }
    }

    pub fn stages(self) -> usize {
        match self {
            OdeStepper::Euler => 1,
            OdeStepper::Rk2 => 2,
            OdeStepper::Rk4 => 4,
        }
    }

    /// Butcher coefficients `(a, b, c)`; `a` is strictly lower triangular.
    pub fn tableau(self) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        match self {
            OdeStepper::Euler => (vec![vec![]], vec![1.0], vec![0.0]),
            OdeStepper::Rk2 => (vec![vec![], vec![1.0]], vec![0.5, 0.5], vec![0.0, 1.0]),
            OdeStepper::Rk4 => (
                vec![vec![], vec![0.5], vec![0.0, 0.5], vec![0.0, 0.0, 1.0]],
                vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
                vec![0.0, 0.5, 0.5, 1.0],
            ),
        }
    }
}

/// One explicit RK step. `f(stage, t, y)` returns the derivative; it sees every
/// stage value, so boundary closures are re-evaluated per stage.
pub fn rk_step<T: Real>(
    stepper: OdeStepper,
    t: T,
    dt: T,
    y: &[T],
    mut f: impl FnMut(usize, T, &[T]) -> Result<Vec<T>>,
) -> Result<Vec<T>> {
    let (a, b, c) = stepper.tableau();
    let mut ks: Vec<Vec<T>> = Vec::with_capacity(b.len());
    let mut stage = y.to_vec();
    for s in 0..b.len() {
        stage.copy_from_slice(y);
        for (j, &aij) in a[s].iter().enumerate() {
            if aij != 0.0 {
                let w = dt * T::lit(aij);
                for (yi, ki) in stage.iter_mut().zip(&ks[j]) {
                    *yi = *yi + w * *ki;
                }
            }
        }
        ks.push(f(s, t + T::lit(c[s]) * dt, &stage)?);
    }
    let mut out = y.to_vec();
    for (k, &bj) in ks.iter().zip(&b) {
        let w = dt * T::lit(bj);
        for (yi, ki) in out.iter_mut().zip(k) {
            *yi = *yi + w * *ki;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay_error(stepper: OdeStepper, n: usize) -> f64 {
        let dt = 1.0 / n as f64;
        let mut y = vec![1.0f64];
        let mut t = 0.0;
        for _ in 0..n {
            y = rk_step(stepper, t, dt, &y, |_, _, y| Ok(vec![-y[0]])).unwrap();
            t += dt;
        }
        (y[0] - (-1.0f64).exp()).abs()
    }

    #[test]
    fn observed_orders() {
        for (s, order) in [
            (OdeStepper::Euler, 1.0),
            (OdeStepper::Rk2, 2.0),
            (OdeStepper::Rk4, 4.0),
        ] {
            let e1 = decay_error(s, 40);
            let e2 = decay_error(s, 80);
            let p = (e1 / e2).log2();
            assert!((p - order).abs() < 0.15, "{s:?}: {p}");
        }
    }

    #[test]
    fn stage_times() {
        let mut seen = Vec::new();
        rk_step(OdeStepper::Rk4, 1.0, 0.5, &[0.0], |s, t, _| {
            seen.push((s, t));
            Ok(vec![0.0])
        })
        .unwrap();
        assert_eq!(seen, vec![(0, 1.0), (1, 1.25), (2, 1.25), (3, 1.5)]);
    }
}
