//! Semi-discrete operator of the coupled system: cell updates on the three
//! exterior pieces plus `dG/dt`, with all interface closures evaluated on the
//! stage state.

use crate::coupling::{self, OdeInputs};
use crate::error::{Error, Result};
use crate::model::{BoundaryState, DomainField, DomainLayout, DomainTag, FieldState};
use crate::real::Real;
use crate::swe::{self, CellState};

use super::flux::{muscl_faces, numerical_flux, Scheme};
use super::{LeftBoundary, Problem};

/// Index map between [`FieldState`] + `G` and one flat vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Packing {
    pub offset: [usize; 3],
    pub n: [usize; 3],
    pub len: usize,
}

impl Packing {
    pub fn new<T: Real>(layout: &DomainLayout<T>) -> Self {
        let n = layout.domains.map(|d| d.n);
        let mut offset = [0; 3];
        let mut at = 0;
        for d in 0..3 {
            offset[d] = at;
            at += 2 * n[d];
        }
        Packing {
            offset,
            n,
            len: at + 2,
        }
    }

    pub fn zeta<'a, T>(&self, y: &'a [T], d: usize) -> &'a [T] {
        &y[self.offset[d]..self.offset[d] + self.n[d]]
    }

    pub fn q<'a, T>(&self, y: &'a [T], d: usize) -> &'a [T] {
        &y[self.offset[d] + self.n[d]..self.offset[d] + 2 * self.n[d]]
    }

    pub fn g_index(&self) -> usize {
        self.len - 2
    }

    pub fn g<T: Real>(&self, y: &[T]) -> [T; 2] {
        [y[self.len - 2], y[self.len - 1]]
    }

    pub fn pack<T: Real>(&self, field: &FieldState<T>, g: &BoundaryState<T>) -> Vec<T> {
        let mut y = Vec::with_capacity(self.len);
        for f in &field.domains {
            y.extend_from_slice(&f.zeta);
            y.extend_from_slice(&f.q);
        }
        y.push(g.q_i);
        y.push(g.p_ch);
        y
    }

    pub fn unpack<T: Real>(&self, y: &[T], t: T) -> (FieldState<T>, BoundaryState<T>) {
        let domains = [0, 1, 2].map(|d| DomainField {
            zeta: self.zeta(y, d).to_vec(),
            q: self.q(y, d).to_vec(),
        });
        let g = self.g(y);
        (
            FieldState { t, domains },
            BoundaryState {
                t,
                q_i: g[0],
                p_ch: g[1],
            },
        )
    }
}

/// Face states produced by the closures at one stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Faces<T> {
    /// Boundary state at `x = -L_ext` (ghost for the open end, inner trace for the wall).
    pub inflow: CellState<T>,
    /// Step state seen from the deep and from the shallow side.
    pub step: (CellState<T>, CellState<T>),
    pub left_wall: CellState<T>,
    pub right_wall: CellState<T>,
    /// Inner trace at `l_1` with the wall value `q = 0`.
    pub end_wall: CellState<T>,
}

/// Attaches time and position to an error raised inside the operator.
pub(crate) fn locate<T: Real>(e: Error, t: T, x: T) -> Error {
    match e {
        Error::AssumptionViolated { .. } => e,
        other => Error::AssumptionViolated {
            t: t.to_f64_lossy(),
            x: x.to_f64_lossy(),
            reason: other.to_string(),
        },
    }
}

/// Values entering the face closures and interior fluxes of one sub-domain.
pub(crate) struct Recon<T> {
    pub z_lo: Vec<T>,
    pub z_hi: Vec<T>,
    pub q_lo: Vec<T>,
    pub q_hi: Vec<T>,
    pub h_rest: T,
}

impl<T: Real> Recon<T> {
    pub fn new(scheme: Scheme, z: &[T], q: &[T], h_rest: T) -> Self {
        if scheme.reconstructs() {
            let (z_lo, z_hi) = muscl_faces(z);
            let (q_lo, q_hi) = muscl_faces(q);
            Recon {
                z_lo,
                z_hi,
                q_lo,
                q_hi,
                h_rest,
            }
        } else {
            Recon {
                z_lo: z.to_vec(),
                z_hi: z.to_vec(),
                q_lo: q.to_vec(),
                q_hi: q.to_vec(),
                h_rest,
            }
        }
    }

    pub fn first(&self) -> CellState<T> {
        CellState::new(self.z_lo[0], self.q_lo[0], self.h_rest)
    }

    pub fn last(&self) -> CellState<T> {
        let n = self.z_hi.len() - 1;
        CellState::new(self.z_hi[n], self.q_hi[n], self.h_rest)
    }

    pub fn hi(&self, j: usize) -> CellState<T> {
        CellState::new(self.z_hi[j], self.q_hi[j], self.h_rest)
    }

    pub fn lo(&self, j: usize) -> CellState<T> {
        CellState::new(self.z_lo[j], self.q_lo[j], self.h_rest)
    }
}

/// Evaluates the nonlinear closures on the boundary-side values of each piece.
pub(crate) fn closures<T: Real>(
    problem: &Problem<T>,
    recon: &[Recon<T>; 3],
    g_state: &BoundaryState<T>,
    t: T,
) -> Result<Faces<T>> {
    let p = &problem.params;
    let g = p.g;
    let x_left = -problem.layout.l_ext;
    let inner0 = recon[0].first();
    let inflow = match problem.left {
        LeftBoundary::Open => {
            let rm = swe::riemann_invariants(&inner0, g)
                .map_err(|e| locate(e, t, x_left))?
                .minus;
            coupling::inflow_closure(problem.forcing.target(t), rm, inner0.h_rest, g)
                .map_err(|e| locate(e, t, x_left))?
        }
        LeftBoundary::Wall => inner0.with(inner0.zeta, T::zero()),
    };
    let step = coupling::step_closure(&recon[0].last(), &recon[1].first(), g)
        .map_err(|e| locate(e, t, T::zero()))?;
    let (left_wall, right_wall) =
        coupling::sidewall_closure(&recon[1].last(), &recon[2].first(), g_state, g)
            .map_err(|e| locate(e, t, p.l_0))?;
    let end = recon[2].last();
    Ok(Faces {
        inflow,
        step,
        left_wall,
        right_wall,
        end_wall: end.with(end.zeta, T::zero()),
    })
}

/// `dy/dt` of the packed state, with the closure face states of this stage.
pub fn rhs<T: Real>(
    problem: &Problem<T>,
    scheme: Scheme,
    pack: &Packing,
    t: T,
    y: &[T],
) -> Result<(Vec<T>, Faces<T>)> {
    let p = &problem.params;
    let g = p.g;
    let layout = &problem.layout;
    let recon = [0, 1, 2].map(|d| {
        Recon::new(
            scheme,
            pack.zeta(y, d),
            pack.q(y, d),
            layout.domains[d].h_rest,
        )
    });
    let gv = pack.g(y);
    let g_state = BoundaryState {
        t,
        q_i: gv[0],
        p_ch: gv[1],
    };
    let faces = closures(problem, &recon, &g_state, t)?;

    let f_of = |u: &CellState<T>, x: T| swe::flux(u, g).map_err(|e| locate(e, t, x));
    let left_flux = match problem.left {
        LeftBoundary::Open => f_of(&faces.inflow, -layout.l_ext)?,
        LeftBoundary::Wall => {
            let inner = recon[0].first();
            numerical_flux(scheme, &coupling::wall_closure(&inner), &inner, g)
                .map_err(|e| locate(e, t, -layout.l_ext))?
        }
    };
    let end_flux = {
        let inner = recon[2].last();
        numerical_flux(scheme, &inner, &coupling::wall_closure(&inner), g)
            .map_err(|e| locate(e, t, p.l_1))?
    };
    let bounds = [
        (left_flux, f_of(&faces.step.0, T::zero())?),
        (
            f_of(&faces.step.1, T::zero())?,
            f_of(&faces.left_wall, p.x_left_wall())?,
        ),
        (f_of(&faces.right_wall, p.x_right_wall())?, end_flux),
    ];

    let mut dy = vec![T::zero(); pack.len];
    for d in 0..3 {
        let sub = &layout.domains[d];
        let n = sub.n;
        let dx = sub.dx();
        let mut fluxes = Vec::with_capacity(n + 1);
        fluxes.push(bounds[d].0);
        for j in 1..n {
            let x = sub.x_start + T::from_usize_lossy(j) * dx;
            fluxes.push(
                numerical_flux(scheme, &recon[d].hi(j - 1), &recon[d].lo(j), g)
                    .map_err(|e| locate(e, t, x))?,
            );
        }
        fluxes.push(bounds[d].1);
        let off = pack.offset[d];
        for j in 0..n {
            dy[off + j] = -(fluxes[j + 1][0] - fluxes[j][0]) / dx;
            dy[off + n + j] = -(fluxes[j + 1][1] - fluxes[j][1]) / dx;
        }
    }
    let dg = coupling::theta(
        &OdeInputs {
            left: faces.left_wall,
            right: faces.right_wall,
            g: g_state,
        },
        p,
    )
    .map_err(|e| locate(e, t, p.l_0))?;
    let gi = pack.g_index();
    dy[gi] = dg[0];
    dy[gi + 1] = dg[1];
    Ok((dy, faces))
}

/// Fails with a located [`Error::AssumptionViolated`] unless every cell is wet,
/// subcritical and finite and `G` is finite.
pub fn check_state<T: Real>(problem: &Problem<T>, pack: &Packing, t: T, y: &[T]) -> Result<()> {
    let g = problem.params.g;
    for (d, sub) in problem.layout.domains.iter().enumerate() {
        let (z, q) = (pack.zeta(y, d), pack.q(y, d));
        for j in 0..sub.n {
            let h = sub.h_rest + z[j];
            let x = sub.cell_center(j);
            let fail = |reason: String| Error::AssumptionViolated {
                t: t.to_f64_lossy(),
                x: x.to_f64_lossy(),
                reason,
            };
            if !(h > T::zero()) {
                return Err(fail(format!(
                    "depth {h:e} is not positive in {}",
                    tag_name(sub.tag)
                )));
            }
            let margin = g * h - q[j] * q[j] / (h * h);
            if !(margin > T::zero()) {
                return Err(fail(format!(
                    "critical flow in {}: g h - q^2/h^2 = {margin:e}",
                    tag_name(sub.tag)
                )));
            }
        }
    }
    let gv = pack.g(y);
    if !(gv[0].is_finite() && gv[1].is_finite()) {
        return Err(Error::AssumptionViolated {
            t: t.to_f64_lossy(),
            x: problem.params.l_0.to_f64_lossy(),
            reason: "non-finite boundary state".into(),
        });
    }
    Ok(())
}

fn tag_name(tag: DomainTag) -> &'static str {
    tag.as_str()
}

/// Largest `max|λ| / dx` over the exterior cells.
pub fn max_speed_over_dx<T: Real>(problem: &Problem<T>, pack: &Packing, y: &[T]) -> Result<T> {
    let g = problem.params.g;
    let mut worst = T::zero();
    for (d, sub) in problem.layout.domains.iter().enumerate() {
        let (z, q) = (pack.zeta(y, d), pack.q(y, d));
        let dx = sub.dx();
        for j in 0..sub.n {
            let s = swe::max_wave_speed(&CellState::new(z[j], q[j], sub.h_rest), g)?;
            worst = worst.max(s / dx);
        }
    }
    Ok(worst)
}
