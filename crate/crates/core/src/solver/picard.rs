//! Picard iteration with frozen coefficients.
//!
//! Iterate `n + 1` solves the linear scheme obtained by freezing, at every
//! step and stage, the Roe matrices and the secant gradients of the Riemann
//! invariants at iterate `n`, while `G` integrates `Θ` evaluated on iterate
//! `n`. Every frozen quantity is an exact secant of the nonlinear one, so a
//! fixed point of the iteration is the solution of the direct scheme.

use std::time::Instant;

use crate::coupling::{self, OdeInputs, TraceRecord, TraceRow};
use crate::diagnostics;
use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::model::{BoundaryState, FieldState};
use crate::real::Real;
use crate::swe::{self, CellState};

use super::flux::{fluctuation_split, Scheme};
use super::rhs::{self, locate, Faces, Packing, Recon};
use super::{rk, LeftBoundary, PicardMode, Problem, Series, SimulationResult, SolverConfig};

/// Coefficient field and face states the linear operator is frozen at.
#[derive(Clone, Debug, PartialEq)]
pub struct Frozen<T> {
    pub field: FieldState<T>,
    pub faces: Faces<T>,
}

impl<T: Real> Frozen<T> {
    /// Freezes at a state, with face states from the nonlinear closures.
    pub fn from_state(
        problem: &Problem<T>,
        field: &FieldState<T>,
        g: &BoundaryState<T>,
        t: T,
    ) -> Result<Self> {
        field.check_dims(&problem.layout)?;
        let pack = Packing::new(&problem.layout);
        let y = pack.pack(field, g);
        let faces = nonlinear_faces(problem, &pack, t, &y)?;
        Ok(Frozen {
            field: field.clone(),
            faces,
        })
    }
}

fn nonlinear_faces<T: Real>(
    problem: &Problem<T>,
    pack: &Packing,
    t: T,
    y: &[T],
) -> Result<Faces<T>> {
    let recon = [0, 1, 2].map(|d| {
        Recon::new(
            Scheme::Rusanov,
            pack.zeta(y, d),
            pack.q(y, d),
            problem.layout.domains[d].h_rest,
        )
    });
    let gv = pack.g(y);
    rhs::closures(
        problem,
        &recon,
        &BoundaryState {
            t,
            q_i: gv[0],
            p_ch: gv[1],
        },
        t,
    )
}

/// Boundary data of the linear problem: `q_i` enters through `V = (0, q_i)`,
/// `inflow_zeta` is the elevation imposed at an open upstream end.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct LinearBoundaryData<T> {
    pub q_i: T,
    pub inflow_zeta: T,
}

/// Exact secant gradient of `R_sigma = q/h + sigma 2 sqrt(g h)` between `a` and `b`:
/// `R(a) - R(b) = ℓ · (a - b)`.
fn invariant_secant<T: Real>(a: &CellState<T>, b: &CellState<T>, sigma: T, g: T) -> Result<[T; 2]> {
    let (ha, hb) = (a.wet_depth()?, b.wet_depth()?);
    Ok([
        -a.q / (ha * hb) + sigma * T::two() * g.sqrt() / (ha.sqrt() + hb.sqrt()),
        T::one() / hb,
    ])
}

fn dot<T: Real>(a: [T; 2], b: [T; 2]) -> T {
    a[0] * b[0] + a[1] * b[1]
}

fn sub<T: Real>(a: [T; 2], b: [T; 2]) -> [T; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// Field part of the linear operator frozen at `(fy, ff)`, evaluated at `y`.
/// Returns the derivative (with a zero `G` part) and the linear face states.
#[allow(clippy::too_many_arguments)]
fn linear_field_rhs<T: Real>(
    problem: &Problem<T>,
    scheme: Scheme,
    pack: &Packing,
    fy: &[T],
    ff: &Faces<T>,
    t: T,
    y: &[T],
    bc: LinearBoundaryData<T>,
) -> Result<(Vec<T>, Faces<T>)> {
    if scheme.reconstructs() {
        return Err(Error::Unsupported(
            "the Picard mode has no frozen-coefficient form of the limited reconstruction; use rusanov or hll".into(),
        ));
    }
    let p = &problem.params;
    let g = p.g;
    let layout = &problem.layout;
    let cell = |yy: &[T], d: usize, j: usize| {
        CellState::new(
            pack.zeta(yy, d)[j],
            pack.q(yy, d)[j],
            layout.domains[d].h_rest,
        )
    };
    let last = |d: usize| layout.domains[d].n - 1;
    let at = |e: Error, x: T| locate(e, t, x);

    // linearized closures
    let x_left = -layout.l_ext;
    let (a0, v0) = (cell(fy, 0, 0), cell(y, 0, 0));
    let inflow = match problem.left {
        LeftBoundary::Open => {
            let l = invariant_secant(&ff.inflow, &a0, -T::one(), g).map_err(|e| at(e, x_left))?;
            let z = bc.inflow_zeta;
            CellState::new(z, v0.q - l[0] * (z - v0.zeta) / l[1], a0.h_rest)
        }
        LeftBoundary::Wall => v0.with(v0.zeta, T::zero()),
    };
    let (al, vl) = (cell(fy, 0, last(0)), cell(y, 0, last(0)));
    let (ar, vr) = (cell(fy, 1, 0), cell(y, 1, 0));
    let lp = invariant_secant(&ff.step.0, &al, T::one(), g).map_err(|e| at(e, T::zero()))?;
    let lm = invariant_secant(&ff.step.1, &ar, -T::one(), g).map_err(|e| at(e, T::zero()))?;
    let star = Mat2::new(lp[0], lp[1], lm[0], lm[1])
        .solve([dot(lp, vl.as_array()), dot(lm, vr.as_array())])
        .ok_or_else(|| at(Error::Singular { det: 0.0 }, T::zero()))?;
    let step = (
        CellState::new(star[0], star[1], al.h_rest),
        CellState::new(star[0], star[1], ar.h_rest),
    );
    let (aw, vw) = (cell(fy, 1, last(1)), cell(y, 1, last(1)));
    let lw =
        invariant_secant(&ff.left_wall, &aw, T::one(), g).map_err(|e| at(e, p.x_left_wall()))?;
    let left_wall = CellState::new(vw.zeta - lw[1] * (bc.q_i - vw.q) / lw[0], bc.q_i, aw.h_rest);
    let (ae, ve) = (cell(fy, 2, 0), cell(y, 2, 0));
    let le =
        invariant_secant(&ff.right_wall, &ae, -T::one(), g).map_err(|e| at(e, p.x_right_wall()))?;
    let right_wall = CellState::new(ve.zeta - le[1] * (bc.q_i - ve.q) / le[0], bc.q_i, ae.h_rest);
    let vend = cell(y, 2, last(2));
    let faces = Faces {
        inflow,
        step,
        left_wall,
        right_wall,
        end_wall: vend.with(vend.zeta, T::zero()),
    };

    let mut dy = vec![T::zero(); pack.len];
    let mut add = |d: usize, j: usize, v: [T; 2], dx: T| {
        let off = pack.offset[d];
        let n = pack.n[d];
        dy[off + j] = dy[off + j] - v[0] / dx;
        dy[off + n + j] = dy[off + n + j] - v[1] / dx;
    };
    for (d, sub_d) in layout.domains.iter().enumerate() {
        let dx = sub_d.dx();
        for j in 0..sub_d.n - 1 {
            let x = sub_d.x_start + T::from_usize_lossy(j + 1) * dx;
            let (m, pl) = fluctuation_split(scheme, &cell(fy, d, j), &cell(fy, d, j + 1), g)
                .map_err(|e| at(e, x))?;
            let delta = sub(cell(y, d, j + 1).as_array(), cell(y, d, j).as_array());
            add(d, j, m.mul_vec(&delta), dx);
            add(d, j + 1, pl.mul_vec(&delta), dx);
        }
    }
    let dxs = layout.domains.map(|s| s.dx());
    let roe =
        |a: &CellState<T>, b: &CellState<T>, x: T| swe::roe_matrix(a, b, g).map_err(|e| at(e, x));
    // upstream end
    match problem.left {
        LeftBoundary::Open => {
            let r = roe(&a0, &ff.inflow, x_left)?;
            add(
                0,
                0,
                r.mul_vec(&sub(v0.as_array(), inflow.as_array())),
                dxs[0],
            );
        }
        LeftBoundary::Wall => {
            let ghost = coupling::wall_closure(&a0);
            let (_, pl) = fluctuation_split(scheme, &ghost, &a0, g).map_err(|e| at(e, x_left))?;
            let vg = coupling::wall_closure(&v0);
            add(0, 0, pl.mul_vec(&sub(v0.as_array(), vg.as_array())), dxs[0]);
        }
    }
    // step
    let r = roe(&ff.step.0, &al, T::zero())?;
    add(
        0,
        last(0),
        r.mul_vec(&sub(step.0.as_array(), vl.as_array())),
        dxs[0],
    );
    let r = roe(&ar, &ff.step.1, T::zero())?;
    add(
        1,
        0,
        r.mul_vec(&sub(vr.as_array(), step.1.as_array())),
        dxs[1],
    );
    // side walls
    let r = roe(&ff.left_wall, &aw, p.x_left_wall())?;
    add(
        1,
        last(1),
        r.mul_vec(&sub(left_wall.as_array(), vw.as_array())),
        dxs[1],
    );
    let r = roe(&ae, &ff.right_wall, p.x_right_wall())?;
    add(
        2,
        0,
        r.mul_vec(&sub(ve.as_array(), right_wall.as_array())),
        dxs[2],
    );
    // end wall
    let aend = cell(fy, 2, last(2));
    let (m, _) = fluctuation_split(scheme, &aend, &coupling::wall_closure(&aend), g)
        .map_err(|e| at(e, p.l_1))?;
    let vg = coupling::wall_closure(&vend);
    add(
        2,
        last(2),
        m.mul_vec(&sub(vg.as_array(), vend.as_array())),
        dxs[2],
    );
    Ok((dy, faces))
}

/// One step of `∂_t u + A(u_frozen) ∂_x u = 0` with boundary data `v_data`,
/// using the configured scheme and stepper with coefficients frozen over the step.
pub fn linearized_step<T: Real>(
    dt: T,
    frozen: &Frozen<T>,
    state: &FieldState<T>,
    v_data: &LinearBoundaryData<T>,
    problem: &Problem<T>,
    cfg: &SolverConfig<T>,
) -> Result<FieldState<T>> {
    state.check_dims(&problem.layout)?;
    let pack = Packing::new(&problem.layout);
    let zero = BoundaryState::default();
    let fy = pack.pack(&frozen.field, &zero);
    let y = pack.pack(state, &zero);
    let y1 = rk::rk_step(cfg.ode_stepper, state.t, dt, &y, |_, ts, ys| {
        linear_field_rhs(
            problem,
            cfg.scheme,
            &pack,
            &fy,
            &frozen.faces,
            ts,
            ys,
            *v_data,
        )
        .map(|r| r.0)
    })?;
    Ok(pack.unpack(&y1, state.t + dt).0)
}

/// Frozen data of one Runge–Kutta stage.
#[derive(Clone, Debug)]
struct Stage<T> {
    y: Vec<T>,
    faces: Faces<T>,
}

/// Frozen stages and step-end states of one iterate.
type Sweep<T> = (Vec<Vec<Stage<T>>>, Vec<Vec<T>>);

/// Result of the iteration.
#[derive(Clone, Debug)]
pub struct PicardOutcome<T> {
    pub result: SimulationResult<T>,
    /// Low-norm distance between successive iterates.
    pub differences: Vec<f64>,
    /// `differences[n + 1] / differences[n]`.
    pub ratios: Vec<f64>,
    pub iterations: usize,
    pub dt: T,
    /// Step-end states of the last iterate, `t = 0, dt, ..., t_end`.
    pub states: Vec<FieldState<T>>,
    pub g: Vec<BoundaryState<T>>,
}

/// Nondimensional low-norm distance between two trajectories on the same time grid:
/// max over time of the spatial L² difference of `u`, plus the L²-in-time difference of `G`.
///
/// Scales: `h_0` for lengths and elevations, `h_0 sqrt(g h_0)` for discharges,
/// `ρ g h_0` for pressure, `h_0 / sqrt(g h_0)` for time.
pub fn low_norm_distance<T: Real>(
    problem: &Problem<T>,
    dt: T,
    a: (&[FieldState<T>], &[BoundaryState<T>]),
    b: (&[FieldState<T>], &[BoundaryState<T>]),
) -> f64 {
    let p = &problem.params;
    let h0 = p.h_0.to_f64_lossy();
    let c0 = p.c_0().to_f64_lossy();
    let qs = h0 * c0;
    let ps = (p.rho * p.g * p.h_0).to_f64_lossy();
    let mut space = 0.0f64;
    for (fa, fb) in a.0.iter().zip(b.0) {
        let mut s = 0.0;
        for (d, sub_d) in problem.layout.domains.iter().enumerate() {
            let w = sub_d.dx().to_f64_lossy() / h0;
            let (da, db) = (&fa.domains[d], &fb.domains[d]);
            for j in 0..sub_d.n {
                let dz = (da.zeta[j] - db.zeta[j]).to_f64_lossy() / h0;
                let dq = (da.q[j] - db.q[j]).to_f64_lossy() / qs;
                s += w * (dz * dz + dq * dq);
            }
        }
        space = space.max(s.sqrt());
    }
    let wt = dt.to_f64_lossy() * c0 / h0;
    let mut time = 0.0;
    for (ga, gb) in a.1.iter().zip(b.1).skip(1) {
        let dq = (ga.q_i - gb.q_i).to_f64_lossy() / qs;
        let dp = (ga.p_ch - gb.p_ch).to_f64_lossy() / ps;
        time += wt * (dq * dq + dp * dp);
    }
    space + time.sqrt()
}

/// Runs the Picard iteration to the tolerance of `cfg.picard` on a fixed time grid
/// (`cfg.fixed_dt`, or 0.8 of the CFL step of the initial state).
pub fn picard_solve<T: Real>(
    problem: &Problem<T>,
    field: &FieldState<T>,
    g0: &BoundaryState<T>,
    cfg: &SolverConfig<T>,
) -> Result<PicardOutcome<T>> {
    cfg.validate()?;
    let (max_iter, tol) = match cfg.picard {
        PicardMode::On { max_iter, tol } => (max_iter, tol.to_f64_lossy()),
        PicardMode::Off => {
            return Err(Error::InvalidConfig(
                "picard_solve needs picard = on(...)".into(),
            ))
        }
    };
    field.check_dims(&problem.layout)?;
    let started = Instant::now();
    let pack = Packing::new(&problem.layout);
    let y0 = pack.pack(field, g0);
    rhs::check_state(problem, &pack, T::zero(), &y0)?;
    let dt_guess = match cfg.fixed_dt {
        Some(dt) => dt,
        None => T::lit(0.8) * super::stable_dt(problem, cfg.cfl, &pack, &y0)?,
    };
    let steps = (cfg.t_end / dt_guess).ceil().to_usize().unwrap_or(1).max(1);
    let dt = cfg.t_end / T::from_usize_lossy(steps);
    let stages = cfg.ode_stepper.stages();

    let faces0 = nonlinear_faces(problem, &pack, T::zero(), &y0)?;
    let mut frozen: Vec<Vec<Stage<T>>> = vec![
        vec![
            Stage {
                y: y0.clone(),
                faces: faces0,
            };
            stages
        ];
        steps
    ];
    let mut ends: Vec<Vec<T>> = vec![y0.clone(); steps + 1];
    let unpack_all = |ends: &[Vec<T>]| -> (Vec<FieldState<T>>, Vec<BoundaryState<T>>) {
        ends.iter()
            .enumerate()
            .map(|(k, y)| pack.unpack(y, dt * T::from_usize_lossy(k)))
            .unzip()
    };

    let mut differences = Vec::new();
    let mut ratios = Vec::new();
    for iter in 0..max_iter {
        let sweep = || -> Result<Sweep<T>> {
            let mut next_frozen: Vec<Vec<Stage<T>>> = Vec::with_capacity(steps);
            let mut next_ends = Vec::with_capacity(steps + 1);
            next_ends.push(y0.clone());
            let mut y = y0.clone();
            for (k, frozen_k) in frozen.iter().enumerate() {
                let t = dt * T::from_usize_lossy(k);
                let mut rec: Vec<Stage<T>> = Vec::with_capacity(stages);
                y = rk::rk_step(cfg.ode_stepper, t, dt, &y, |s, ts, ys| {
                    let fz = &frozen_k[s];
                    let gi = pack.g_index();
                    let bc = LinearBoundaryData {
                        q_i: ys[gi],
                        inflow_zeta: problem.forcing.target(ts),
                    };
                    let (mut dy, faces) =
                        linear_field_rhs(problem, cfg.scheme, &pack, &fz.y, &fz.faces, ts, ys, bc)?;
                    let gz = pack.g(&fz.y);
                    let dg = coupling::theta(
                        &OdeInputs {
                            left: fz.faces.left_wall,
                            right: fz.faces.right_wall,
                            g: BoundaryState {
                                t: ts,
                                q_i: gz[0],
                                p_ch: gz[1],
                            },
                        },
                        &problem.params,
                    )
                    .map_err(|e| locate(e, ts, problem.params.l_0))?;
                    dy[gi] = dg[0];
                    dy[gi + 1] = dg[1];
                    rec.push(Stage {
                        y: ys.to_vec(),
                        faces,
                    });
                    Ok(dy)
                })?;
                rhs::check_state(problem, &pack, t + dt, &y)?;
                next_frozen.push(rec);
                next_ends.push(y.clone());
            }
            Ok((next_frozen, next_ends))
        };
        let (next_frozen, next_ends) = match sweep() {
            Ok(v) => v,
            // a later iterate leaving the admissible set means the iteration diverged
            Err(e) if iter > 0 && e.is_runtime() => {
                return Err(Error::NoConvergence {
                    iterations: iter,
                    ratios,
                    reason: format!("iterate {} left the admissible set: {e}", iter + 1),
                })
            }
            Err(e) => return Err(e),
        };
        let (fa, ga) = unpack_all(&ends);
        let (fb, gb) = unpack_all(&next_ends);
        let diff = low_norm_distance(problem, dt, (&fa, &ga), (&fb, &gb));
        if let Some(&prev) = differences.last() {
            let prev: f64 = prev;
            ratios.push(if prev > 0.0 { diff / prev } else { 0.0 });
        }
        differences.push(diff);
        frozen = next_frozen;
        ends = next_ends;
        if diff <= tol {
            let (states, g) = unpack_all(&ends);
            let result = assemble_result(problem, &pack, &frozen, &states, &g, dt, started)?;
            return Ok(PicardOutcome {
                result,
                differences,
                ratios,
                iterations: iter + 1,
                dt,
                states,
                g,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        ratios,
        reason: format!("tolerance {tol:e} not reached"),
    })
}

fn assemble_result<T: Real>(
    problem: &Problem<T>,
    pack: &Packing,
    frozen: &[Vec<Stage<T>>],
    states: &[FieldState<T>],
    g: &[BoundaryState<T>],
    dt: T,
    started: Instant,
) -> Result<SimulationResult<T>> {
    let mut traces = TraceRecord::default();
    let mut series = Series::default();
    let mut int_q_i = T::zero();
    let last = states.len() - 1;
    for (k, (f, gk)) in states.iter().zip(g).enumerate() {
        let faces = if k < last {
            frozen[k][0].faces
        } else {
            nonlinear_faces(problem, pack, f.t, &pack.pack(f, gk))?
        };
        if k > 0 {
            int_q_i = int_q_i + T::half() * dt * (g[k - 1].q_i + gk.q_i);
        }
        traces.push(TraceRow {
            t: f.t,
            step_l: faces.step.0.as_array(),
            step_r: faces.step.1.as_array(),
            left_wall: faces.left_wall.as_array(),
            right_wall: faces.right_wall.as_array(),
            end_wall: faces.end_wall.as_array(),
            g: gk.as_array(),
        });
        series.t.push(f.t);
        series.volume.push(f.total_volume(&problem.layout));
        series.chamber_mean_zeta.push(f.chamber_mean_zeta());
        series.int_q_i.push(int_q_i);
        series.energy.push(diagnostics::physical_energy(
            &problem.params,
            &problem.layout,
            f,
            gk,
        ));
        series.courant.push(T::zero());
        series
            .inflow_energy_flux
            .push(diagnostics::energy_flux(&faces.inflow, problem.params.g));
    }
    Ok(SimulationResult {
        initial_field: states[0].clone(),
        initial_g: g[0],
        final_field: states[last].clone(),
        final_g: g[last],
        traces,
        series,
        snapshots: vec![states[0].clone(), states[last].clone()],
        steps: last,
        max_courant: T::zero(),
        wall_clock: started.elapsed(),
    })
}
