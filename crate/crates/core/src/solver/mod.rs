//! Time integration of the coupled system: finite volumes on the exterior,
//! characteristic closures at every interface, and `G` advanced with the
//! same Runge–Kutta stages. [`picard`] holds the iterative mode.

pub mod flux;
pub mod picard;
pub mod rhs;
pub mod rk;

use std::time::{Duration, Instant};

use crate::coupling::{self, CompatibilityReport, TraceRecord, TraceRow};
use crate::diagnostics;
use crate::error::{Error, Result};
use crate::model::{
    check_initial_data, validate_params, BoundaryState, DomainLayout, FieldState,
    InitialDataReport, PhysicalParams, Thresholds, ValidationReport,
};
use crate::real::Real;

pub use flux::Scheme;
pub use picard::{
    linearized_step, low_norm_distance, picard_solve, Frozen, LinearBoundaryData, PicardOutcome,
};
pub use rhs::{Faces, Packing};
pub use rk::OdeStepper;

/// Closure at the truncated upstream end `x = -L_ext`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LeftBoundary {
    /// Reflecting wall.
    Wall,
    /// Prescribed elevation with the outgoing invariant carried from inside.
    #[default]
    Open,
}

impl LeftBoundary {
    pub fn as_str(self) -> &'static str {
        match self {
            LeftBoundary::Wall => "wall",
            LeftBoundary::Open => "open",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "wall" => Some(LeftBoundary::Wall),
            "open" => Some(LeftBoundary::Open),
            _ => None,
        }
    }
}

/// Elevation prescribed at an open upstream end.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Forcing<T> {
    #[default]
    None,
    /// `zeta(t) = amplitude sin(omega t)`.
    Sine { amplitude: T, omega: T },
}

impl<T: Real> Forcing<T> {
    pub fn target(&self, t: T) -> T {
        match *self {
            Forcing::None => T::zero(),
            Forcing::Sine { amplitude, omega } => amplitude * (omega * t).sin(),
        }
    }
}

/// Everything that defines the continuous problem except initial data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Problem<T> {
    pub params: PhysicalParams<T>,
    pub layout: DomainLayout<T>,
    pub left: LeftBoundary,
    pub forcing: Forcing<T>,
}

impl<T: Real> Problem<T> {
    pub fn new(params: PhysicalParams<T>, layout: DomainLayout<T>) -> Self {
        Problem {
            params,
            layout,
            left: LeftBoundary::Wall,
            forcing: Forcing::None,
        }
    }

    pub fn with_forcing(mut self, left: LeftBoundary, forcing: Forcing<T>) -> Self {
        self.left = left;
        self.forcing = forcing;
        self
    }

    pub fn refined(&self, factor: usize) -> Self {
        Problem {
            layout: self.layout.refined(factor),
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum PicardMode<T> {
    #[default]
    Off,
    On {
        max_iter: usize,
        tol: T,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig<T> {
    pub cfl: T,
    pub t_end: T,
    pub scheme: Scheme,
    pub ode_stepper: OdeStepper,
    pub picard: PicardMode<T>,
    /// Traces and diagnostics are recorded every this many steps (and at the end).
    pub record_every: usize,
    /// Snapshots of the whole field every this many steps; 0 keeps only the first and last.
    pub snapshot_every: usize,
    /// Overrides the CFL-derived step; still checked against `cfl`.
    pub fixed_dt: Option<T>,
}

impl<T: Real> SolverConfig<T> {
    pub fn new(t_end: T) -> Self {
        SolverConfig {
            cfl: T::lit(0.5),
            t_end,
            scheme: Scheme::Rusanov,
            ode_stepper: OdeStepper::Rk2,
            picard: PicardMode::Off,
            record_every: 1,
            snapshot_every: 0,
            fixed_dt: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > T::zero() && self.cfl < T::one()) {
            return Err(Error::InvalidConfig(format!(
                "cfl = {} must lie in (0, 1)",
                self.cfl
            )));
        }
        if !(self.t_end > T::zero()) {
            return Err(Error::InvalidConfig(format!(
                "t_end = {} must be positive",
                self.t_end
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfig(
                "record_every must be at least 1".into(),
            ));
        }
        if let PicardMode::On { max_iter, tol } = self.picard {
            if max_iter == 0 || !(tol > T::zero()) {
                return Err(Error::InvalidConfig(
                    "picard needs max_iter >= 1 and tol > 0".into(),
                ));
            }
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt > T::zero()) {
                return Err(Error::InvalidConfig(format!(
                    "fixed_dt = {dt} must be positive"
                )));
            }
        }
        Ok(())
    }
}

/// Scalar diagnostics sampled at the recording cadence.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Series<T> {
    pub t: Vec<T>,
    /// `∫ zeta` over the exterior.
    pub volume: Vec<T>,
    pub chamber_mean_zeta: Vec<T>,
    /// `∫₀ᵗ q_i`, trapezoidal over every step.
    pub int_q_i: Vec<T>,
    pub energy: Vec<T>,
    /// `max|λ| dt / dx` of the step that ended at this sample.
    pub courant: Vec<T>,
    /// Energy flux entering through the upstream end.
    pub inflow_energy_flux: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct SimulationResult<T> {
    pub initial_field: FieldState<T>,
    pub initial_g: BoundaryState<T>,
    pub final_field: FieldState<T>,
    pub final_g: BoundaryState<T>,
    pub traces: TraceRecord<T>,
    pub series: Series<T>,
    pub snapshots: Vec<FieldState<T>>,
    pub steps: usize,
    pub max_courant: T,
    pub wall_clock: Duration,
}

/// Outcome of the checks required before a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Preflight<T> {
    pub params: ValidationReport,
    pub initial: InitialDataReport<T>,
    pub compatibility: CompatibilityReport<T>,
}

impl<T: Real> Preflight<T> {
    pub fn passed(&self) -> bool {
        self.params.passed() && self.initial.passed() && self.compatibility.passed()
    }
}

/// Parameter validation, initial-data thresholds and compatibility up to order 1.
pub fn preflight<T: Real>(
    problem: &Problem<T>,
    field: &FieldState<T>,
    g0: &BoundaryState<T>,
    thresholds: Thresholds<T>,
    compat_tol: T,
) -> Result<Preflight<T>> {
    let params = validate_params(&problem.params);
    let initial = check_initial_data(&problem.params, &problem.layout, field, thresholds)?;
    let compatibility = if initial.passed() {
        coupling::compatibility_check(&problem.layout, field, g0, 1, &problem.params, compat_tol)?
    } else {
        // derivatives of inadmissible data are meaningless; report order 0 only
        coupling::compatibility_check(&problem.layout, field, g0, 0, &problem.params, compat_tol)?
    };
    Ok(Preflight {
        params,
        initial,
        compatibility,
    })
}

/// Spectral radius of `∂Θ/∂G`, which bounds the step of the explicit ODE part.
pub fn ode_rate<T: Real>(p: &PhysicalParams<T>) -> T {
    let a = T::one() / (p.alpha() * p.rho);
    let (g1, g2) = (p.gamma_1(), p.gamma_2());
    let disc = g1 * g1 - T::lit(4.0) * a * g2;
    if disc < T::zero() {
        (a * g2).sqrt()
    } else {
        T::half() * (g1 + disc.sqrt())
    }
}

/// Largest stable step for the current state.
pub fn stable_dt<T: Real>(problem: &Problem<T>, cfl: T, pack: &Packing, y: &[T]) -> Result<T> {
    let s = rhs::max_speed_over_dx(problem, pack, y)?;
    let rate = ode_rate(&problem.params);
    let mut dt = cfl / s;
    if rate > T::zero() {
        dt = dt.min(cfl / rate);
    }
    Ok(dt)
}

fn courant<T: Real>(problem: &Problem<T>, pack: &Packing, y: &[T], dt: T) -> Result<T> {
    Ok(rhs::max_speed_over_dx(problem, pack, y)? * dt)
}

/// One step of size `dt`. Fails with [`Error::CflViolation`] if `dt` exceeds the CFL limit.
pub fn step<T: Real>(
    dt: T,
    field: &FieldState<T>,
    g: &BoundaryState<T>,
    problem: &Problem<T>,
    cfg: &SolverConfig<T>,
) -> Result<(FieldState<T>, BoundaryState<T>)> {
    field.check_dims(&problem.layout)?;
    let pack = Packing::new(&problem.layout);
    let y = pack.pack(field, g);
    let c = courant(problem, &pack, &y, dt)?;
    if c > cfg.cfl * (T::one() + T::lit(1e-12)) {
        return Err(Error::CflViolation {
            courant: c.to_f64_lossy(),
            limit: cfg.cfl.to_f64_lossy(),
        });
    }
    let t = field.t;
    let y1 = rk::rk_step(cfg.ode_stepper, t, dt, &y, |_, ts, ys| {
        rhs::rhs(problem, cfg.scheme, &pack, ts, ys).map(|r| r.0)
    })?;
    rhs::check_state(problem, &pack, t + dt, &y1)?;
    Ok(pack.unpack(&y1, t + dt))
}

fn trace_row<T: Real>(t: T, faces: &Faces<T>, g: [T; 2]) -> TraceRow<T> {
    TraceRow {
        t,
        step_l: faces.step.0.as_array(),
        step_r: faces.step.1.as_array(),
        left_wall: faces.left_wall.as_array(),
        right_wall: faces.right_wall.as_array(),
        end_wall: faces.end_wall.as_array(),
        g,
    }
}

/// Integrates to `t_end` or stops at the first violated assumption.
///
/// The admissibility checks of [`preflight`] are the caller's responsibility.
pub fn run<T: Real>(
    problem: &Problem<T>,
    field: &FieldState<T>,
    g0: &BoundaryState<T>,
    cfg: &SolverConfig<T>,
) -> Result<SimulationResult<T>> {
    run_with_dump(problem, field, g0, cfg).map_err(|a| a.error)
}

/// A failed run together with the last accepted state.
#[derive(Clone, Debug)]
pub struct Aborted<T> {
    pub error: Error,
    pub field: FieldState<T>,
    pub g: BoundaryState<T>,
}

/// [`run`], but a failure carries the state of the last accepted step.
#[allow(clippy::result_large_err)]
pub fn run_with_dump<T: Real>(
    problem: &Problem<T>,
    field: &FieldState<T>,
    g0: &BoundaryState<T>,
    cfg: &SolverConfig<T>,
) -> std::result::Result<SimulationResult<T>, Aborted<T>> {
    let mut last = (field.clone(), *g0);
    run_tracked(problem, field, g0, cfg, &mut last).map_err(|error| Aborted {
        error,
        field: last.0,
        g: last.1,
    })
}

fn run_tracked<T: Real>(
    problem: &Problem<T>,
    field: &FieldState<T>,
    g0: &BoundaryState<T>,
    cfg: &SolverConfig<T>,
    last: &mut (FieldState<T>, BoundaryState<T>),
) -> Result<SimulationResult<T>> {
    cfg.validate()?;
    field.check_dims(&problem.layout)?;
    let started = Instant::now();
    let pack = Packing::new(&problem.layout);
    let mut y = pack.pack(field, g0);
    let mut t = T::zero();
    rhs::check_state(problem, &pack, t, &y)?;

    let mut traces = TraceRecord::default();
    let mut series = Series::default();
    let (init_field, init_g) = pack.unpack(&y, t);
    let mut snapshots = vec![init_field.clone()];
    let mut int_q_i = T::zero();
    let mut max_courant = T::zero();
    let mut last_courant = T::zero();
    let mut steps = 0usize;

    let record =
        |series: &mut Series<T>, y: &[T], t: T, int_q_i: T, courant: T, faces: &Faces<T>| {
            let (f, g) = pack.unpack(y, t);
            series.t.push(t);
            series.volume.push(f.total_volume(&problem.layout));
            series.chamber_mean_zeta.push(f.chamber_mean_zeta());
            series.int_q_i.push(int_q_i);
            series.energy.push(diagnostics::physical_energy(
                &problem.params,
                &problem.layout,
                &f,
                &g,
            ));
            series.courant.push(courant);
            series
                .inflow_energy_flux
                .push(diagnostics::energy_flux(&faces.inflow, problem.params.g));
        };

    let eps = cfg.t_end * T::lit(1e-12);
    while t < cfg.t_end - eps {
        let mut dt = match cfg.fixed_dt {
            Some(dt) => dt,
            None => stable_dt(problem, cfg.cfl, &pack, &y)?,
        };
        if t + dt > cfg.t_end - eps {
            dt = cfg.t_end - t;
        }
        let c = courant(problem, &pack, &y, dt)?;
        if c > cfg.cfl * (T::one() + T::lit(1e-12)) {
            return Err(Error::CflViolation {
                courant: c.to_f64_lossy(),
                limit: cfg.cfl.to_f64_lossy(),
            });
        }
        let recording = steps.is_multiple_of(cfg.record_every);
        let y_prev = y.clone();
        let y_new = rk::rk_step(cfg.ode_stepper, t, dt, &y, |s, ts, ys| {
            let (dy, faces) = rhs::rhs(problem, cfg.scheme, &pack, ts, ys)?;
            if s == 0 && recording {
                traces.push(trace_row(ts, &faces, pack.g(ys)));
                record(&mut series, ys, ts, int_q_i, last_courant, &faces);
            }
            Ok(dy)
        })?;
        rhs::check_state(problem, &pack, t + dt, &y_new)?;
        let gi = pack.g_index();
        int_q_i = int_q_i + T::half() * dt * (y_prev[gi] + y_new[gi]);
        y = y_new;
        t = t + dt;
        steps += 1;
        *last = pack.unpack(&y, t);
        last_courant = c;
        max_courant = max_courant.max(c);
        if cfg.snapshot_every > 0 && steps.is_multiple_of(cfg.snapshot_every) {
            snapshots.push(pack.unpack(&y, t).0);
        }
    }
    let (_, faces) = rhs::rhs(problem, cfg.scheme, &pack, t, &y)?;
    traces.push(trace_row(t, &faces, pack.g(&y)));
    record(&mut series, &y, t, int_q_i, last_courant, &faces);
    let (final_field, final_g) = pack.unpack(&y, t);
    if snapshots.last().map(|s| s.t) != Some(t) {
        snapshots.push(final_field.clone());
    }
    Ok(SimulationResult {
        initial_field: init_field,
        initial_g: init_g,
        final_field,
        final_g,
        traces,
        series,
        snapshots,
        steps,
        max_courant,
        wall_clock: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DomainTag;

    fn problem() -> Problem<f64> {
        let p = PhysicalParams::reference();
        let layout = DomainLayout::new(&p, 8.0, 40, 28, 18).unwrap();
        Problem::new(p, layout)
    }

    #[test]
    fn rest_is_preserved_bitwise() {
        let pr = problem().with_forcing(LeftBoundary::Open, Forcing::None);
        let f = FieldState::rest(&pr.layout);
        let g = BoundaryState::default();
        let mut cfg = SolverConfig::new(0.5);
        cfg.ode_stepper = OdeStepper::Rk4;
        let res = run(&pr, &f, &g, &cfg).unwrap();
        assert_eq!(res.final_field.domains, f.domains);
        assert_eq!((res.final_g.q_i, res.final_g.p_ch), (0.0, 0.0));
    }

    #[test]
    fn euler_step_matches_hand_update() {
        let pr = problem();
        let mut f = FieldState::rest(&pr.layout);
        for z in f.domain_mut(DomainTag::EPlusRight).zeta.iter_mut() {
            *z = 0.1;
        }
        let mut cfg = SolverConfig::new(1.0);
        cfg.ode_stepper = OdeStepper::Euler;
        let dt = 1e-3;
        let (_, g1) = step(dt, &f, &BoundaryState::default(), &pr, &cfg).unwrap();
        assert!((g1.q_i - (-0.4905 * dt)).abs() < 1e-15);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let pr = problem();
        let f = FieldState::rest(&pr.layout);
        let cfg = SolverConfig::new(1.0);
        let r = step(10.0, &f, &BoundaryState::default(), &pr, &cfg);
        assert!(matches!(r, Err(Error::CflViolation { .. })));
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::new(1.0);
        assert!(cfg.validate().is_ok());
        cfg.cfl = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = SolverConfig::new(-1.0);
        assert!(cfg.validate().is_err());
        cfg.t_end = 1.0;
        cfg.picard = PicardMode::On {
            max_iter: 0,
            tol: 1e-8,
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn names_round_trip() {
        for s in [OdeStepper::Euler, OdeStepper::Rk2, OdeStepper::Rk4] {
            assert_eq!(OdeStepper::parse(s.as_str()), Some(s));
        }
        for b in [LeftBoundary::Wall, LeftBoundary::Open] {
            assert_eq!(LeftBoundary::parse(b.as_str()), Some(b));
        }
    }
}
