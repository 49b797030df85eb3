//! Physical constants, device geometry, the domain decomposition and the
//! standing checks on parameters and initial data.
//!
//! The fluid occupies `(-L_ext, l_1)`. The structure covers the interior
//! `(l_0 - r, l_0 + r)` where no PDE is solved; the three exterior pieces are
//!
//! ```text
//!   E_minus = (-L_ext, 0)      rest depth h_s
//!   E_plus_l = (0, l_0 - r)    rest depth h_0
//!   E_plus_r = (l_0 + r, l_1)  rest depth h_0, covered by the air chamber
//! ```

use std::fmt;

use crate::error::{Error, Result};
use crate::real::Real;

/// Device and fluid constants. All SI.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalParams<T> {
    pub g: T,
    pub rho: T,
    /// Rest depth before the step.
    pub h_s: T,
    /// Rest depth after the step.
    pub h_0: T,
    /// Elevation of the flat structure bottom (negative: below the rest surface).
    pub zeta_w: T,
    pub l_0: T,
    pub r: T,
    pub l_1: T,
    /// Polytropic index of the chamber air.
    pub gamma: T,
    pub p_atm: T,
    /// Height of the chamber air column. `+inf` models a chamber at constant pressure.
    pub h_ch: T,
    /// Turbine resistance. Only the combination `gamma * p_atm / (h_ch * K)` is used, in 1/s.
    pub k: T,
}

impl<T: Real> PhysicalParams<T> {
    /// Water-column height under the structure, `h_0 + zeta_w`.
    pub fn h_w(&self) -> T {
        self.h_0 + self.zeta_w
    }

    pub fn step_size(&self) -> T {
        self.h_s - self.h_0
    }

    /// Length of the chamber `E_plus_r`.
    pub fn chamber_len(&self) -> T {
        self.l_1 - (self.l_0 + self.r)
    }

    /// Inertia coefficient of the water under the structure, `2r / h_w`.
    pub fn alpha(&self) -> T {
        T::two() * self.r / self.h_w()
    }

    /// Relaxation rate of the chamber pressure.
    pub fn gamma_1(&self) -> T {
        self.gamma * self.p_atm / (self.h_ch * self.k)
    }

    /// Pressure rise per unit interior discharge.
    pub fn gamma_2(&self) -> T {
        self.gamma * self.p_atm / (self.h_ch * self.chamber_len())
    }

    /// Left wall of the structure.
    pub fn x_left_wall(&self) -> T {
        self.l_0 - self.r
    }

    /// Right wall of the structure.
    pub fn x_right_wall(&self) -> T {
        self.l_0 + self.r
    }

    /// Wave speed at rest after the step.
    pub fn c_0(&self) -> T {
        (self.g * self.h_0).sqrt()
    }

    pub fn validate(&self) -> ValidationReport {
        validate_params(self)
    }
}

impl PhysicalParams<f64> {
    /// Flume-scale device used by the examples and tests.
    pub fn reference() -> Self {
        PhysicalParams {
            g: 9.81,
            rho: 1000.0,
            h_s: 2.0,
            h_0: 1.0,
            zeta_w: -0.5,
            l_0: 6.0,
            r: 0.5,
            l_1: 10.0,
            gamma: 1.4,
            p_atm: 101_325.0,
            h_ch: 2.0,
            k: 50_000.0,
        }
    }
}

/// One violated invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    /// Config key (or invariant name) at fault.
    pub key: &'static str,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn require(&mut self, ok: bool, key: &'static str, message: impl Into<String>) {
        if !ok {
            self.violations.push(Violation {
                key,
                message: message.into(),
            });
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return write!(f, "PASS");
        }
        for v in &self.violations {
            writeln!(f, "FAIL {}: {}", v.key, v.message)?;
        }
        Ok(())
    }
}

/// Lists every violated parameter invariant; the report is empty iff all hold.
pub fn validate_params<T: Real>(p: &PhysicalParams<T>) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let zero = T::zero();
    // h_ch = +inf is the constant-pressure limit: gamma_1 = gamma_2 = 0
    let all = [
        p.g, p.rho, p.h_s, p.h_0, p.zeta_w, p.l_0, p.r, p.l_1, p.gamma, p.p_atm, p.k,
    ];
    rep.require(
        all.iter().all(|x| x.is_finite()) && !p.h_ch.is_nan(),
        "params",
        "all parameters except h_ch must be finite",
    );
    rep.require(p.g > zero, "g", "g > 0");
    rep.require(p.rho > zero, "rho", "rho > 0");
    rep.require(p.h_0 > zero, "h_0", "h_0 > 0");
    rep.require(
        p.step_size() > zero,
        "h_s",
        format!(
            "s>0: step size s = h_s - h_0 = {} must be positive",
            p.step_size()
        ),
    );
    rep.require(
        p.h_w() > zero,
        "zeta_w",
        format!("h_w = h_0 + zeta_w = {} must be positive", p.h_w()),
    );
    rep.require(
        p.h_w() < p.h_0,
        "zeta_w",
        "structure must be partially immersed (zeta_w < 0)",
    );
    rep.require(p.r > zero, "r", "r > 0");
    rep.require(p.l_0 - p.r > zero, "l_0", "0 < l_0 - r");
    rep.require(p.l_0 + p.r < p.l_1, "l_1", "l_0 + r < l_1");
    rep.require(p.gamma > T::one(), "gamma", "gamma > 1");
    rep.require(p.k > zero, "K", "K > 0");
    rep.require(p.h_ch > zero, "h_ch", "h_ch > 0");
    rep.require(p.p_atm > zero, "P_atm", "P_atm > 0");
    rep
}

/// Which exterior sub-domain a cell belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DomainTag {
    EMinus,
    EPlusLeft,
    EPlusRight,
}

impl DomainTag {
    pub const ALL: [DomainTag; 3] = [
        DomainTag::EMinus,
        DomainTag::EPlusLeft,
        DomainTag::EPlusRight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DomainTag::EMinus => "E_minus",
            DomainTag::EPlusLeft => "E_plus_l",
            DomainTag::EPlusRight => "E_plus_r",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// A uniformly meshed exterior interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Subdomain<T> {
    pub tag: DomainTag,
    pub x_start: T,
    pub x_end: T,
    pub n: usize,
    pub h_rest: T,
}

impl<T: Real> Subdomain<T> {
    pub fn dx(&self) -> T {
        (self.x_end - self.x_start) / T::from_usize_lossy(self.n)
    }

    pub fn length(&self) -> T {
        self.x_end - self.x_start
    }

    pub fn cell_center(&self, j: usize) -> T {
        self.x_start + (T::from_usize_lossy(j) + T::half()) * self.dx()
    }

    pub fn centers(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.n).map(|j| self.cell_center(j))
    }
}

pub const MIN_CELLS: usize = 4;

/// Domain decomposition with interfaces exactly at `0`, `l_0 ± r`, `l_1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainLayout<T> {
    /// Truncation length of the half-line before the step.
    pub l_ext: T,
    pub domains: [Subdomain<T>; 3],
}

impl<T: Real> DomainLayout<T> {
    pub fn new(
        p: &PhysicalParams<T>,
        l_ext: T,
        n_minus: usize,
        n_pl: usize,
        n_pr: usize,
    ) -> Result<Self> {
        if !(l_ext > T::zero()) {
            return Err(Error::InvalidConfig(format!(
                "L_ext = {l_ext} must be positive"
            )));
        }
        for (key, n) in [("n_minus", n_minus), ("n_pl", n_pl), ("n_pr", n_pr)] {
            if n < MIN_CELLS {
                return Err(Error::InvalidConfig(format!(
                    "{key} = {n} must be at least {MIN_CELLS}"
                )));
            }
        }
        if !(p.x_left_wall() > T::zero() && p.x_right_wall() < p.l_1) {
            return Err(Error::InvalidConfig(
                "domain ordering 0 < l_0 - r < l_0 + r < l_1 violated".into(),
            ));
        }
        Ok(DomainLayout {
            l_ext,
            domains: [
                Subdomain {
                    tag: DomainTag::EMinus,
                    x_start: -l_ext,
                    x_end: T::zero(),
                    n: n_minus,
                    h_rest: p.h_s,
                },
                Subdomain {
                    tag: DomainTag::EPlusLeft,
                    x_start: T::zero(),
                    x_end: p.x_left_wall(),
                    n: n_pl,
                    h_rest: p.h_0,
                },
                Subdomain {
                    tag: DomainTag::EPlusRight,
                    x_start: p.x_right_wall(),
                    x_end: p.l_1,
                    n: n_pr,
                    h_rest: p.h_0,
                },
            ],
        })
    }

    pub fn domain(&self, tag: DomainTag) -> &Subdomain<T> {
        &self.domains[tag.index()]
    }

    pub fn total_cells(&self) -> usize {
        self.domains.iter().map(|d| d.n).sum()
    }

    pub fn min_dx(&self) -> T {
        self.domains
            .iter()
            .map(|d| d.dx())
            .fold(T::infinity(), T::min)
    }

    /// Same geometry with every cell count multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        let mut out = *self;
        for d in out.domains.iter_mut() {
            d.n *= factor;
        }
        out
    }
}

/// Cell averages on one sub-domain.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DomainField<T> {
    pub zeta: Vec<T>,
    pub q: Vec<T>,
}

impl<T: Real> DomainField<T> {
    pub fn zeros(n: usize) -> Self {
        DomainField {
            zeta: vec![T::zero(); n],
            q: vec![T::zero(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }
}

/// Cell-averaged `(zeta, q)` on all exterior sub-domains at one time level.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FieldState<T> {
    pub t: T,
    pub domains: [DomainField<T>; 3],
}

impl<T: Real> FieldState<T> {
    pub fn rest(layout: &DomainLayout<T>) -> Self {
        FieldState {
            t: T::zero(),
            domains: layout.domains.map(|d| DomainField::zeros(d.n)),
        }
    }

    /// Fills every cell from point values at cell centers.
    pub fn from_fn(layout: &DomainLayout<T>, mut f: impl FnMut(DomainTag, T) -> (T, T)) -> Self {
        let mut out = Self::rest(layout);
        for (d, field) in layout.domains.iter().zip(out.domains.iter_mut()) {
            for (j, x) in d.centers().enumerate() {
                let (z, q) = f(d.tag, x);
                field.zeta[j] = z;
                field.q[j] = q;
            }
        }
        out
    }

    pub fn domain(&self, tag: DomainTag) -> &DomainField<T> {
        &self.domains[tag.index()]
    }

    pub fn domain_mut(&mut self, tag: DomainTag) -> &mut DomainField<T> {
        &mut self.domains[tag.index()]
    }

    pub fn check_dims(&self, layout: &DomainLayout<T>) -> Result<()> {
        for (d, f) in layout.domains.iter().zip(&self.domains) {
            for (what, len) in [("zeta", f.zeta.len()), ("q", f.q.len())] {
                if len != d.n {
                    return Err(Error::DimensionMismatch {
                        what,
                        expected: d.n,
                        got: len,
                    });
                }
            }
        }
        Ok(())
    }

    /// `∫ zeta dx` over the exterior.
    pub fn total_volume(&self, layout: &DomainLayout<T>) -> T {
        layout
            .domains
            .iter()
            .zip(&self.domains)
            .map(|(d, f)| f.zeta.iter().copied().sum::<T>() * d.dx())
            .sum()
    }

    /// Mean surface elevation inside the chamber.
    pub fn chamber_mean_zeta(&self) -> T {
        let f = self.domain(DomainTag::EPlusRight);
        f.zeta.iter().copied().sum::<T>() / T::from_usize_lossy(f.len())
    }

    pub fn all_finite(&self) -> bool {
        self.domains
            .iter()
            .all(|f| f.zeta.iter().chain(&f.q).all(|v| v.is_finite()))
    }
}

/// `G = (q_i, P_ch)`: discharge under the structure and chamber pressure variation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BoundaryState<T> {
    pub t: T,
    pub q_i: T,
    pub p_ch: T,
}

impl<T: Real> BoundaryState<T> {
    pub fn new(q_i: T, p_ch: T) -> Self {
        BoundaryState {
            t: T::zero(),
            q_i,
            p_ch,
        }
    }

    pub fn as_array(&self) -> [T; 2] {
        [self.q_i, self.p_ch]
    }

    pub fn is_finite(&self) -> bool {
        self.q_i.is_finite() && self.p_ch.is_finite()
    }
}

/// Lower bounds demanded of initial data: depth and subcriticality margin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds<T> {
    pub c_0: T,
    pub c_1: T,
}

impl<T: Real> Thresholds<T> {
    /// `c_0 = 1e-3 h_0`, `c_1 = 1e-3 g h_0`.
    pub fn default_for(p: &PhysicalParams<T>) -> Self {
        let m = T::lit(1e-3);
        Thresholds {
            c_0: m * p.h_0,
            c_1: m * p.g * p.h_0,
        }
    }
}

/// Attained minima of the depth and of `g h - q²/h²`, with their locations.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialDataReport<T> {
    pub c_0: T,
    pub c_0_at: (DomainTag, usize),
    pub c_1: T,
    pub c_1_at: (DomainTag, usize),
    pub thresholds: Thresholds<T>,
}

impl<T: Real> InitialDataReport<T> {
    pub fn depth_ok(&self) -> bool {
        self.c_0 >= self.thresholds.c_0
    }

    pub fn subcritical_ok(&self) -> bool {
        self.c_1 >= self.thresholds.c_1
    }

    pub fn passed(&self) -> bool {
        self.depth_ok() && self.subcritical_ok()
    }
}

/// Verifies `h >= c_0` and `g h - q²/h² >= c_1` cell-wise and returns the attained minima.
pub fn check_initial_data<T: Real>(
    p: &PhysicalParams<T>,
    layout: &DomainLayout<T>,
    u0: &FieldState<T>,
    thresholds: Thresholds<T>,
) -> Result<InitialDataReport<T>> {
    u0.check_dims(layout)?;
    let mut rep = InitialDataReport {
        c_0: T::infinity(),
        c_0_at: (DomainTag::EMinus, 0),
        c_1: T::infinity(),
        c_1_at: (DomainTag::EMinus, 0),
        thresholds,
    };
    for (d, f) in layout.domains.iter().zip(&u0.domains) {
        for j in 0..d.n {
            let h = d.h_rest + f.zeta[j];
            // NaN compares false and would otherwise slip through
            let h_cmp = if h.is_nan() { T::neg_infinity() } else { h };
            if h_cmp < rep.c_0 {
                rep.c_0 = h_cmp;
                rep.c_0_at = (d.tag, j);
            }
            let margin = p.g * h - f.q[j] * f.q[j] / (h * h);
            let margin = if margin.is_nan() || h <= T::zero() {
                T::neg_infinity()
            } else {
                margin
            };
            if margin < rep.c_1 {
                rep.c_1 = margin;
                rep.c_1_at = (d.tag, j);
            }
        }
    }
    Ok(rep)
}
