//! Boundary and transmission relations: the step, the two structure side-walls
//! with the boundary ODE for `G = (q_i, P_ch)`, the chamber end wall, the
//! truncated inflow end, the interior pressure profile, and the compatibility
//! conditions on initial data.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::model::{BoundaryState, DomainLayout, DomainTag, FieldState, PhysicalParams};
use crate::real::Real;
use crate::swe::{self, jacobian, CellState};

/// `f_right - f_left`.
pub fn jump<T: Real>(f_left: T, f_right: T) -> T {
    f_right - f_left
}

pub fn average<T: Real>(f_left: T, f_right: T) -> T {
    T::half() * (f_left + f_right)
}

/// Inputs of the boundary ODE: wall traces and the current `G`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeInputs<T> {
    /// Trace at `l_0 - r` from the left exterior.
    pub left: CellState<T>,
    /// Trace at `l_0 + r` from the chamber side.
    pub right: CellState<T>,
    pub g: BoundaryState<T>,
}

/// Bernoulli head `g zeta + q² / (2 h²)` at a trace.
fn head<T: Real>(u: &CellState<T>, g: T) -> Result<T> {
    let h = u.wet_depth()?;
    Ok(g * u.zeta + u.q * u.q / (T::two() * h * h))
}

/// `Θ(G, traces)`:
/// `dq_i/dt = -(1/α) ⟦g zeta + q²/(2h²)⟧ - P_ch/(α ρ)`,
/// `dP_ch/dt = -γ₁ P_ch + γ₂ q_i`.
pub fn theta<T: Real>(inputs: &OdeInputs<T>, p: &PhysicalParams<T>) -> Result<[T; 2]> {
    let hl = head(&inputs.left, p.g)?;
    let hr = head(&inputs.right, p.g)?;
    let alpha = p.alpha();
    let dq = -jump(hl, hr) / alpha - inputs.g.p_ch / (alpha * p.rho);
    let dp = -p.gamma_1() * inputs.g.p_ch + p.gamma_2() * inputs.g.q_i;
    Ok([dq, dp])
}

/// `∂Θ/∂G` with traces held fixed; constant in `G`.
pub fn theta_jacobian<T: Real>(p: &PhysicalParams<T>) -> Mat2<T> {
    Mat2::new(
        T::zero(),
        -T::one() / (p.alpha() * p.rho),
        p.gamma_2(),
        -p.gamma_1(),
    )
}

/// `V(G) = (0, q_i)`: right-hand side of `M u = V(G)` at the side-walls.
pub fn boundary_data_v<T: Real>(g: &BoundaryState<T>) -> [T; 2] {
    [T::zero(), g.q_i]
}

/// Jacobian of `V`: `[[0, 0], [1, 0]]`.
pub fn boundary_data_jacobian<T: Real>() -> Mat2<T> {
    Mat2::new(T::zero(), T::zero(), T::one(), T::zero())
}

/// Continuity residual `(zeta_r - zeta_l, q_r - q_l)` at the step.
pub fn step_transmission<T: Real>(left_trace: &CellState<T>, right_trace: &CellState<T>) -> [T; 2] {
    [
        jump(left_trace.zeta, right_trace.zeta),
        jump(left_trace.q, right_trace.q),
    ]
}

/// Mirror ghost for the solid wall at `l_1`.
pub fn wall_closure<T: Real>(inner: &CellState<T>) -> CellState<T> {
    inner.with(inner.zeta, -inner.q)
}

/// Ghost state at the truncated upstream end: `zeta = target`, with the
/// leftgoing invariant `R_- = q/h - 2 sqrt(g h)` taken from the interior.
pub fn inflow_closure<T: Real>(
    target_zeta: T,
    outgoing_invariant: T,
    h_rest: T,
    g: T,
) -> Result<CellState<T>> {
    let h = h_rest + target_zeta;
    if !(h > T::zero()) {
        return Err(Error::DryState {
            depth: h.to_f64_lossy(),
        });
    }
    let q = h * (outgoing_invariant + T::two() * (g * h).sqrt());
    let ghost = CellState::new(target_zeta, q, h_rest);
    let margin = ghost.subcritical_margin(g)?;
    if !(margin > T::zero()) {
        return Err(Error::SupercriticalInflow {
            margin: margin.to_f64_lossy(),
        });
    }
    Ok(ghost)
}

/// Root of a monotone scalar function on `[lo, hi]` by Newton steps safeguarded
/// with bisection. `f` returns the value and derivative. Returns `guess` untouched
/// when it is already an exact root.
pub(crate) fn solve_monotone<T: Real>(
    f: impl Fn(T) -> (T, T),
    mut lo: T,
    mut hi: T,
    guess: T,
    tol: T,
    what: &'static str,
) -> Result<T> {
    if guess > lo && guess < hi && f(guess).0 == T::zero() {
        return Ok(guess);
    }
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if flo == T::zero() {
        return Ok(lo);
    }
    if fhi == T::zero() {
        return Ok(hi);
    }
    if !(flo * fhi < T::zero()) {
        return Err(Error::NoSolution { what });
    }
    let increasing = fhi > T::zero();
    let mut x = if guess > lo && guess < hi {
        guess
    } else {
        T::half() * (lo + hi)
    };
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if fx == T::zero() {
            return Ok(x);
        }
        if (fx > T::zero()) == increasing {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx != T::zero() && newton > lo && newton < hi {
            newton
        } else {
            T::half() * (lo + hi)
        };
        if (next - x).abs() <= tol || hi - lo <= tol {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

fn depth_bracket<T: Real>(h_ref: T) -> (T, T, T) {
    (
        T::lit(1e-6) * h_ref,
        T::lit(10.0) * h_ref,
        T::lit(1e-12) * h_ref,
    )
}

/// Depth `h` on the subcritical branch with `q/h + sigma 2 sqrt(g h) = invariant`.
fn depth_from_invariant<T: Real>(
    q: T,
    invariant: T,
    sigma: T,
    h_guess: T,
    h_ref: T,
    g: T,
    what: &'static str,
) -> Result<T> {
    let (mut lo, hi, tol) = depth_bracket(h_ref);
    // below the critical depth the invariant turns back; stay above it
    let h_crit = (q * q / g).cbrt();
    if h_crit * (T::one() + T::lit(1e-9)) > lo {
        lo = h_crit * (T::one() + T::lit(1e-9));
    }
    if lo >= hi {
        return Err(Error::NoSolution { what });
    }
    let f = |h: T| {
        let s = (g * h).sqrt();
        (
            q / h + sigma * T::two() * s - invariant,
            -q / (h * h) + sigma * (g / h).sqrt(),
        )
    };
    solve_monotone(f, lo, hi, h_guess, tol, what)
}

/// Face states at the two side-walls. Both carry `q = q_i`; the left face keeps
/// `R_+` of the left inner state, the right face keeps `R_-` of the right inner state.
pub fn sidewall_closure<T: Real>(
    left_inner: &CellState<T>,
    right_inner: &CellState<T>,
    g_state: &BoundaryState<T>,
    g: T,
) -> Result<(CellState<T>, CellState<T>)> {
    left_inner.check_subcritical(g)?;
    right_inner.check_subcritical(g)?;
    let q_i = g_state.q_i;
    let rl = swe::riemann_invariants(left_inner, g)?.plus;
    let rr = swe::riemann_invariants(right_inner, g)?.minus;
    let hl = depth_from_invariant(
        q_i,
        rl,
        T::one(),
        left_inner.depth(),
        left_inner.h_rest,
        g,
        "left side-wall",
    )?;
    let hr = depth_from_invariant(
        q_i,
        rr,
        -T::one(),
        right_inner.depth(),
        right_inner.h_rest,
        g,
        "right side-wall",
    )?;
    Ok((
        CellState::new(hl - left_inner.h_rest, q_i, left_inner.h_rest),
        CellState::new(hr - right_inner.h_rest, q_i, right_inner.h_rest),
    ))
}

/// Single-valued interface state `(zeta*, q*)` at the step: `R_+` from the deep
/// side and `R_-` from the shallow side, with continuity of `zeta` and `q`.
/// Returns the state as seen from each side (same `zeta`, `q`; own `h_rest`).
pub fn step_closure<T: Real>(
    left_inner: &CellState<T>,
    right_inner: &CellState<T>,
    g: T,
) -> Result<(CellState<T>, CellState<T>)> {
    let rp = swe::riemann_invariants(left_inner, g)?.plus;
    let rm = swe::riemann_invariants(right_inner, g)?.minus;
    let (hs, h0) = (left_inner.h_rest, right_inner.h_rest);
    let href = hs.min(h0);
    let (hlo, hhi, tol) = depth_bracket(href);
    let f = |z: T| {
        let hl = hs + z;
        let hr = h0 + z;
        let cl = (g * hl).sqrt();
        let qs = hl * (rp - T::two() * cl);
        let dqs = rp - T::lit(3.0) * cl;
        let val = qs / hr - T::two() * (g * hr).sqrt() - rm;
        let der = (dqs * hr - qs) / (hr * hr) - (g / hr).sqrt();
        (val, der)
    };
    let lo = hlo - href;
    let hi = hhi - href;
    let guess = average(left_inner.zeta, right_inner.zeta);
    let z = solve_monotone(f, lo, hi, guess, tol, "step")?;
    let q = (hs + z) * (rp - T::two() * (g * (hs + z)).sqrt());
    Ok((CellState::new(z, q, hs), CellState::new(z, q, h0)))
}

/// Interior pressure under the structure, linear in `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteriorPressure<T> {
    pub p_left: T,
    pub p_right: T,
    pub slope: T,
}

impl<T: Real> InteriorPressure<T> {
    pub fn jump(&self) -> T {
        self.p_right - self.p_left
    }
}

/// `∂_x P = -(ρ/h_w) dq_i/dt`, anchored at `P(l_0 - r) = P_atm`.
pub fn interior_pressure<T: Real>(
    _g: &BoundaryState<T>,
    dq_i_dt: T,
    p: &PhysicalParams<T>,
) -> InteriorPressure<T> {
    let slope = -(p.rho / p.h_w()) * dq_i_dt;
    InteriorPressure {
        p_left: p.p_atm,
        p_right: p.p_atm + slope * T::two() * p.r,
        slope,
    }
}

/// Point value at a face from the three nearest cell averages, nearest first.
pub fn face_value<T: Real>(a1: T, a2: T, a3: T) -> T {
    (T::lit(11.0) * a1 - T::lit(7.0) * a2 + T::two() * a3) / T::lit(6.0)
}

/// Derivative at a face with respect to the distance from it.
pub fn face_derivative<T: Real>(a1: T, a2: T, a3: T, dx: T) -> T {
    (-T::two() * a1 + T::lit(3.0) * a2 - a3) / dx
}

/// Wall traces and their `x`-derivatives from cell averages.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WallTraces<T> {
    pub left: CellState<T>,
    pub right: CellState<T>,
    pub dx_left: [T; 2],
    pub dx_right: [T; 2],
}

pub fn wall_traces<T: Real>(layout: &DomainLayout<T>, u: &FieldState<T>) -> Result<WallTraces<T>> {
    u.check_dims(layout)?;
    let dl = layout.domain(DomainTag::EPlusLeft);
    let dr = layout.domain(DomainTag::EPlusRight);
    let fl = u.domain(DomainTag::EPlusLeft);
    let fr = u.domain(DomainTag::EPlusRight);
    let n = dl.n;
    let pick_l = |v: &[T]| (v[n - 1], v[n - 2], v[n - 3]);
    let pick_r = |v: &[T]| (v[0], v[1], v[2]);
    let val = |(a, b, c): (T, T, T)| face_value(a, b, c);
    let der = |(a, b, c): (T, T, T), dx: T| face_derivative(a, b, c, dx);
    Ok(WallTraces {
        left: CellState::new(val(pick_l(&fl.zeta)), val(pick_l(&fl.q)), dl.h_rest),
        right: CellState::new(val(pick_r(&fr.zeta)), val(pick_r(&fr.q)), dr.h_rest),
        // distance from the left wall grows towards -x
        dx_left: [
            -der(pick_l(&fl.zeta), dl.dx()),
            -der(pick_l(&fl.q), dl.dx()),
        ],
        dx_right: [der(pick_r(&fr.zeta), dr.dx()), der(pick_r(&fr.q), dr.dx())],
    })
}

/// Residuals of the compatibility conditions at the side-walls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompatibilityReport<T> {
    /// `M u₀|wall - V(G₀)`.
    pub r0: [T; 2],
    /// `M u₁|wall - D_V G₁`, present when order 1 was requested.
    pub r1: Option<[T; 2]>,
    pub tol: T,
}

impl<T: Real> CompatibilityReport<T> {
    pub fn r0_norm(&self) -> T {
        crate::linalg::norm(&self.r0)
    }

    pub fn r1_norm(&self) -> Option<T> {
        self.r1.map(|r| crate::linalg::norm(&r))
    }

    pub fn passed(&self) -> bool {
        self.r0_norm() <= self.tol && self.r1_norm().is_none_or(|n| n <= self.tol)
    }
}

pub const DEFAULT_COMPATIBILITY_TOL: f64 = 1e-6;

fn m_times<T: Real>(left: [T; 2], right: [T; 2]) -> [T; 2] {
    swe::boundary_matrix::<T>().mul_vec(&[left[0], left[1], right[0], right[1]])
}

/// Checks compatibility of initial data with the side-wall conditions up to `order` (0 or 1).
pub fn compatibility_check<T: Real>(
    layout: &DomainLayout<T>,
    u0: &FieldState<T>,
    g0: &BoundaryState<T>,
    order: u8,
    p: &PhysicalParams<T>,
    tol: T,
) -> Result<CompatibilityReport<T>> {
    let tr = wall_traces(layout, u0)?;
    let v = boundary_data_v(g0);
    let m0 = m_times(tr.left.as_array(), tr.right.as_array());
    let r0 = [m0[0] - v[0], m0[1] - v[1]];
    let r1 = if order >= 1 {
        let u1 = |u: &CellState<T>, d: [T; 2]| -> Result<[T; 2]> {
            let a = jacobian(u, p.g)?;
            let v = a.mul_vec(&d);
            Ok([-v[0], -v[1]])
        };
        let ul = u1(&tr.left, tr.dx_left)?;
        let ur = u1(&tr.right, tr.dx_right)?;
        let g1 = theta(
            &OdeInputs {
                left: tr.left,
                right: tr.right,
                g: *g0,
            },
            p,
        )?;
        let dv = boundary_data_jacobian::<T>().mul_vec(&g1);
        let m1 = m_times(ul, ur);
        Some([m1[0] - dv[0], m1[1] - dv[1]])
    } else {
        None
    };
    Ok(CompatibilityReport { r0, r1, tol })
}

/// Time series of interface traces and of `G`, one row per recorded step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceRecord<T> {
    pub t: Vec<T>,
    /// `(zeta, q)` at `x = 0` seen from the deep side.
    pub step_l: Vec<[T; 2]>,
    /// `(zeta, q)` at `x = 0` seen from the shallow side.
    pub step_r: Vec<[T; 2]>,
    pub left_wall: Vec<[T; 2]>,
    pub right_wall: Vec<[T; 2]>,
    pub end_wall: Vec<[T; 2]>,
    pub g: Vec<[T; 2]>,
}

/// One row of a [`TraceRecord`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow<T> {
    pub t: T,
    pub step_l: [T; 2],
    pub step_r: [T; 2],
    pub left_wall: [T; 2],
    pub right_wall: [T; 2],
    pub end_wall: [T; 2],
    pub g: [T; 2],
}

pub const TRACE_COLUMNS: [&str; 11] = [
    "t",
    "zeta_step_l",
    "q_step_l",
    "zeta_step_r",
    "q_step_r",
    "zeta_lw",
    "q_lw",
    "zeta_rw",
    "q_rw",
    "q_i",
    "P_ch",
];

impl<T: Real> TraceRecord<T> {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Appends a row; time stamps must not decrease.
    pub fn push(&mut self, row: TraceRow<T>) {
        debug_assert!(self.t.last().is_none_or(|&last| row.t >= last));
        self.t.push(row.t);
        self.step_l.push(row.step_l);
        self.step_r.push(row.step_r);
        self.left_wall.push(row.left_wall);
        self.right_wall.push(row.right_wall);
        self.end_wall.push(row.end_wall);
        self.g.push(row.g);
    }

    pub fn q_i(&self) -> Vec<T> {
        self.g.iter().map(|g| g[0]).collect()
    }

    pub fn p_ch(&self) -> Vec<T> {
        self.g.iter().map(|g| g[1]).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", TRACE_COLUMNS.join(","))?;
        for i in 0..self.len() {
            let vals = [
                self.t[i],
                self.step_l[i][0],
                self.step_l[i][1],
                self.step_r[i][0],
                self.step_r[i][1],
                self.left_wall[i][0],
                self.left_wall[i][1],
                self.right_wall[i][0],
                self.right_wall[i][1],
                self.g[i][0],
                self.g[i][1],
            ];
            let row: Vec<String> = vals.iter().map(|v| format!("{:.16e}", v)).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}
