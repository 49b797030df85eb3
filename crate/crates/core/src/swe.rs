//! Pointwise algebra of the 1d shallow water system in `(zeta, q)` variables:
//! flux, Jacobian, eigenstructure, Riemann invariants, and the 4×4 boundary
//! reformulation used to check the Kreiss–Lopatinskii structure at the
//! structure side-walls.
//!
//! In the 4×4 form the left exterior is reflected (`x -> -x`) onto the
//! half-line, so `u = (u⁻, u⁺)` with `A4 = diag(-A(u⁻), A(u⁺))` and the
//! boundary matrix `M = [[0,-1,0,1],[0,1/2,0,1/2]]` encodes `⟦q⟧` and `⟨q⟩`.

use crate::error::{Error, Result};
use crate::linalg::{Mat, Mat2, Mat4};
use crate::real::Real;

/// Point state `(zeta, q)` over a flat bottom at rest depth `h_rest`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellState<T> {
    pub zeta: T,
    pub q: T,
    pub h_rest: T,
}

impl<T: Real> CellState<T> {
    pub fn new(zeta: T, q: T, h_rest: T) -> Self {
        CellState { zeta, q, h_rest }
    }

    pub fn rest(h_rest: T) -> Self {
        CellState::new(T::zero(), T::zero(), h_rest)
    }

    pub fn depth(&self) -> T {
        self.h_rest + self.zeta
    }

    pub fn wet_depth(&self) -> Result<T> {
        let h = self.depth();
        if h > T::zero() {
            Ok(h)
        } else {
            Err(Error::DryState {
                depth: h.to_f64_lossy(),
            })
        }
    }

    pub fn velocity(&self) -> Result<T> {
        Ok(self.q / self.wet_depth()?)
    }

    /// `g h - q²/h²`; positive iff subcritical.
    pub fn subcritical_margin(&self, g: T) -> Result<T> {
        let h = self.wet_depth()?;
        let u = self.q / h;
        Ok(g * h - u * u)
    }

    pub fn check_subcritical(&self, g: T) -> Result<T> {
        let m = self.subcritical_margin(g)?;
        if m > T::zero() {
            Ok(m)
        } else {
            Err(Error::CriticalFlow {
                margin: m.to_f64_lossy(),
            })
        }
    }

    pub fn as_array(&self) -> [T; 2] {
        [self.zeta, self.q]
    }

    pub fn with(&self, zeta: T, q: T) -> Self {
        CellState::new(zeta, q, self.h_rest)
    }
}

/// Conservative flux `(q, q²/h + g(h² - h_rest²)/2)`.
///
/// The rest offset makes `F(rest) = 0` exactly.
pub fn flux<T: Real>(u: &CellState<T>, g: T) -> Result<[T; 2]> {
    let h = u.wet_depth()?;
    // h² - h_rest² = zeta (h + h_rest), exact at rest
    let pressure = T::half() * g * u.zeta * (h + u.h_rest);
    Ok([u.q, u.q * u.q / h + pressure])
}

/// `A(U) = [[0, 1], [g h - q²/h², 2q/h]]`.
pub fn jacobian<T: Real>(u: &CellState<T>, g: T) -> Result<Mat2<T>> {
    let h = u.wet_depth()?;
    let v = u.q / h;
    Ok(Mat2::new(T::zero(), T::one(), g * h - v * v, T::two() * v))
}

/// Roe-averaged Jacobian: `F(a) - F(b) = roe_matrix(a, b) (a - b)` exactly.
/// Both states must share `h_rest`.
pub fn roe_matrix<T: Real>(a: &CellState<T>, b: &CellState<T>, g: T) -> Result<Mat2<T>> {
    let ha = a.wet_depth()?;
    let hb = b.wet_depth()?;
    let (sa, sb) = (ha.sqrt(), hb.sqrt());
    let u = (a.q / sa + b.q / sb) / (sa + sb);
    let h_bar = T::half() * (ha + hb);
    Ok(Mat2::new(
        T::zero(),
        T::one(),
        g * h_bar - u * u,
        T::two() * u,
    ))
}

/// Characteristic speeds and unit right eigenvectors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eigen<T> {
    /// `q/h + sqrt(g h)`.
    pub lambda_plus: T,
    /// `q/h - sqrt(g h)`.
    pub lambda_minus: T,
    pub e_plus: [T; 2],
    pub e_minus: [T; 2],
}

impl<T: Real> Eigen<T> {
    pub fn max_speed(&self) -> T {
        self.lambda_plus.abs().max(self.lambda_minus.abs())
    }
}

fn unit_eigvec<T: Real>(lambda: T) -> [T; 2] {
    let n = (T::one() + lambda * lambda).sqrt();
    [T::one() / n, lambda / n]
}

pub fn eigen<T: Real>(u: &CellState<T>, g: T) -> Result<Eigen<T>> {
    u.check_subcritical(g)?;
    let h = u.depth();
    let v = u.q / h;
    let c = (g * h).sqrt();
    let (lp, lm) = (v + c, v - c);
    Ok(Eigen {
        lambda_plus: lp,
        lambda_minus: lm,
        e_plus: unit_eigvec(lp),
        e_minus: unit_eigvec(lm),
    })
}

/// Largest characteristic speed without the subcriticality requirement.
pub fn max_wave_speed<T: Real>(u: &CellState<T>, g: T) -> Result<T> {
    let h = u.wet_depth()?;
    Ok((u.q / h).abs() + (g * h).sqrt())
}

/// Riemann invariants `R± = q/h ± 2 sqrt(g h)` and their rest-offset variants
/// `R̃± = R± ∓ 2 sqrt(g h_rest)` which vanish at rest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiemannInvariants<T> {
    pub plus: T,
    pub minus: T,
    pub plus_offset: T,
    pub minus_offset: T,
}

pub fn riemann_invariants<T: Real>(u: &CellState<T>, g: T) -> Result<RiemannInvariants<T>> {
    let h = u.wet_depth()?;
    let v = u.q / h;
    let c2 = T::two() * (g * h).sqrt();
    let c2_rest = T::two() * (g * u.h_rest).sqrt();
    Ok(RiemannInvariants {
        plus: v + c2,
        minus: v - c2,
        plus_offset: v + (c2 - c2_rest),
        minus_offset: v - (c2 - c2_rest),
    })
}

/// `M = [[0, -1, 0, 1], [0, 1/2, 0, 1/2]]`: rows give `⟦q⟧` and `⟨q⟩`.
pub fn boundary_matrix<T: Real>() -> Mat<T, 2, 4> {
    let (z, o, h) = (T::zero(), T::one(), T::half());
    Mat([[z, -o, z, o], [z, h, z, h]])
}

/// `diag(-A(u⁻), A(u⁺))`.
pub fn system_matrix_4<T: Real>(
    u_minus: &CellState<T>,
    u_plus: &CellState<T>,
    g: T,
) -> Result<Mat4<T>> {
    let am = jacobian(u_minus, g)?.scale(-T::one());
    let ap = jacobian(u_plus, g)?;
    Ok(block_diag(&am, &ap))
}

pub fn block_diag<T: Real>(a: &Mat2<T>, b: &Mat2<T>) -> Mat4<T> {
    let mut m = Mat4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            m.0[i][j] = a.0[i][j];
            m.0[i + 2][j + 2] = b.0[i][j];
        }
    }
    m
}

/// How the eigenvectors entering the Lopatinskii matrix are normalised.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EigenScaling {
    /// Second component equal to one; yields `L = [[-1, 1], [1/2, 1/2]]` for every trace.
    #[default]
    SecondComponentOne,
    UnitLength,
}

fn scaled_eigvec<T: Real>(lambda: T, scaling: EigenScaling) -> [T; 2] {
    match scaling {
        EigenScaling::SecondComponentOne => [T::one() / lambda, T::one()],
        EigenScaling::UnitLength => unit_eigvec(lambda),
    }
}

/// Lopatinskii matrix `L = M E` with `E` holding `e_-(u⁻)` (eigenvalue `q/h - sqrt(gh)`)
/// and `e_+(u⁺)` (eigenvalue `q/h + sqrt(gh)`) in the block pattern of the 4×4 problem.
/// Returns `L` and `‖L⁻¹‖₂`.
pub fn lopatinskii<T: Real>(
    u_minus_trace: &CellState<T>,
    u_plus_trace: &CellState<T>,
    g: T,
    scaling: EigenScaling,
) -> Result<(Mat2<T>, T)> {
    let em = eigen(u_minus_trace, g)?;
    let ep = eigen(u_plus_trace, g)?;
    let a = scaled_eigvec(em.lambda_minus, scaling);
    let b = scaled_eigvec(ep.lambda_plus, scaling);
    let mut e = Mat::<T, 4, 2>::zeros();
    e.0[0][0] = a[0];
    e.0[1][0] = a[1];
    e.0[2][1] = b[0];
    e.0[3][1] = b[1];
    let l = boundary_matrix::<T>() * e;
    let det = l.det();
    if !(det.abs() >= T::lit(1e-12)) {
        return Err(Error::Singular {
            det: det.to_f64_lossy(),
        });
    }
    let inv = l.inverse().ok_or(Error::Singular {
        det: det.to_f64_lossy(),
    })?;
    Ok((l, inv.spectral_norm()))
}

/// Friedrichs symmetrizer `S = [[g h + q²/h², -q/h], [-q/h, 1]]`, `S A` symmetric.
pub fn symmetrizer<T: Real>(u: &CellState<T>, g: T) -> Result<Mat2<T>> {
    u.check_subcritical(g)?;
    let h = u.depth();
    let v = u.q / h;
    Ok(Mat2::new(g * h + v * v, -v, -v, T::one()))
}

/// `diag(S(u⁻), S(u⁺))`; symmetrizes `A4` but is not dissipative on `ker M` at rest.
pub fn friedrichs_symmetrizer_4<T: Real>(
    u_minus: &CellState<T>,
    u_plus: &CellState<T>,
    g: T,
) -> Result<Mat4<T>> {
    Ok(block_diag(
        &symmetrizer(u_minus, g)?,
        &symmetrizer(u_plus, g)?,
    ))
}

/// Characteristic Kreiss symmetrizer `S = R⁻ᵀ D R⁻¹` for the boundary traces.
///
/// `R` holds the eigenvectors of `A4`; outgoing modes get weight 1, incoming
/// modes a weight small enough that `vᵀ S A4 v < 0` on `ker M`, which the
/// invertibility of the Lopatinskii matrix makes possible.
pub fn kreiss_symmetrizer<T: Real>(
    u_minus: &CellState<T>,
    u_plus: &CellState<T>,
    g: T,
) -> Result<Mat4<T>> {
    let em = eigen(u_minus, g)?;
    let ep = eigen(u_plus, g)?;
    // columns of R, grouped [incoming_minus, outgoing_minus, incoming_plus, outgoing_plus];
    // for -A(u⁻) the eigenvalue lambda_minus flips to the positive (incoming) speed
    let vecs = [em.e_minus, em.e_plus, ep.e_plus, ep.e_minus];
    let speeds = [
        -em.lambda_minus,
        -em.lambda_plus,
        ep.lambda_plus,
        ep.lambda_minus,
    ];
    let r = Mat4::from_fn(|i, j| {
        let block = j / 2;
        if i / 2 == block {
            vecs[j][i % 2]
        } else {
            T::zero()
        }
    });
    let r_inv = {
        let rm = Mat2::new(vecs[0][0], vecs[1][0], vecs[0][1], vecs[1][1])
            .inverse()
            .ok_or(Error::Singular { det: 0.0 })?;
        let rp = Mat2::new(vecs[2][0], vecs[3][0], vecs[2][1], vecs[3][1])
            .inverse()
            .ok_or(Error::Singular { det: 0.0 })?;
        block_diag(&rm, &rp)
    };
    let m = boundary_matrix::<T>();
    let mr = m * r;
    let m_in = Mat2::new(mr.0[0][0], mr.0[0][2], mr.0[1][0], mr.0[1][2]);
    let m_out = Mat2::new(mr.0[0][1], mr.0[0][3], mr.0[1][1], mr.0[1][3]);
    let k = m_in.inverse().ok_or(Error::Singular {
        det: m_in.det().to_f64_lossy(),
    })? * m_out;
    let out_min = speeds[1].abs().min(speeds[3].abs());
    let in_max = speeds[0].max(speeds[2]);
    let kn = k.spectral_norm();
    let eps = if kn > T::zero() {
        (T::half() * out_min / (in_max * kn * kn)).min(T::one())
    } else {
        T::one()
    };
    let weights = [eps, T::one(), eps, T::one()];
    let d = Mat4::from_fn(|i, j| if i == j { weights[i] } else { T::zero() });
    let _ = r;
    Ok(r_inv.transpose() * d * r_inv)
}

/// Certified constants of `vᵀ (S A4) v <= -c₂ |v|² + C₂ |M v|²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dissipativity<T> {
    pub c_2: T,
    pub big_c_2: T,
    /// `min_{v ∈ ker M} -vᵀ S A4 v / |v|²`.
    pub kernel_min: T,
}

/// Certifies maximal dissipativity of the boundary condition for a given
/// symmetrizer. `c₂` is half the kernel minimum; `C₂` is the smallest value
/// (to bisection accuracy) making `S A4 + c₂ I - C₂ MᵀM` negative semidefinite.
pub fn boundary_dissipativity<T: Real>(
    s4: &Mat4<T>,
    a4: &Mat4<T>,
    m: &Mat<T, 2, 4>,
) -> Result<Dissipativity<T>> {
    let q = *s4 * *a4;
    let q = Mat4::from_fn(|i, j| T::half() * (q.0[i][j] + q.0[j][i]));
    let basis = kernel_basis(m)?;
    let mut b = Mat2::zeros();
    for (a, ka) in basis.iter().enumerate() {
        for (c, kc) in basis.iter().enumerate() {
            let qk = q.mul_vec(kc);
            b.0[a][c] = -ka
                .iter()
                .zip(&qk)
                .fold(T::zero(), |acc, (&x, &y)| acc + x * y);
        }
    }
    let kernel_min = b.symmetric_eigenvalues_closed()[0];
    if !(kernel_min > T::zero()) {
        return Err(Error::NotDissipative {
            kernel_min: kernel_min.to_f64_lossy(),
        });
    }
    let c_2 = T::half() * kernel_min;
    let mtm = m.transpose() * *m;
    let top = |big_c: T| -> T {
        let t = q + Mat4::identity().scale(c_2) - mtm.scale(big_c);
        t.symmetric_eigenvalues()[3]
    };
    let mut hi = q.max_abs().max(c_2).max(T::min_positive_value());
    let mut tries = 0;
    while top(hi) > T::zero() {
        hi = hi * T::two();
        tries += 1;
        if tries > 200 {
            return Err(Error::NotDissipative {
                kernel_min: kernel_min.to_f64_lossy(),
            });
        }
    }
    let mut lo = T::zero();
    for _ in 0..80 {
        let mid = T::half() * (lo + hi);
        if top(mid) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Dissipativity {
        c_2,
        big_c_2: hi,
        kernel_min,
    })
}

/// Orthonormal basis of `ker M` for a full-rank 2×4 matrix.
fn kernel_basis<T: Real>(m: &Mat<T, 2, 4>) -> Result<[[T; 4]; 2]> {
    let mmt = *m * m.transpose();
    let inv = mmt.inverse().ok_or(Error::Singular {
        det: mmt.det().to_f64_lossy(),
    })?;
    let proj = Mat4::identity() - m.transpose() * inv * *m;
    let mut basis: Vec<[T; 4]> = Vec::with_capacity(2);
    let tol = T::lit(1e-8);
    for j in 0..4 {
        let mut v = [proj.0[0][j], proj.0[1][j], proj.0[2][j], proj.0[3][j]];
        for b in &basis {
            let dot = v.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y);
            for k in 0..4 {
                v[k] = v[k] - dot * b[k];
            }
        }
        let n = crate::linalg::norm(&v);
        if n > tol {
            basis.push(v.map(|x| x / n));
        }
        if basis.len() == 2 {
            return Ok([basis[0], basis[1]]);
        }
    }
    Err(Error::Singular { det: 0.0 })
}

/// Bundle of the boundary-problem matrices at one pair of traces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemMatrices<T> {
    pub a_minus: Mat2<T>,
    pub a_plus: Mat2<T>,
    pub a4: Mat4<T>,
    pub m: Mat<T, 2, 4>,
    pub l: Mat2<T>,
    pub l_inv_norm: T,
}

impl<T: Real> SystemMatrices<T> {
    pub fn at(u_minus: &CellState<T>, u_plus: &CellState<T>, g: T) -> Result<Self> {
        let (l, l_inv_norm) = lopatinskii(u_minus, u_plus, g, EigenScaling::SecondComponentOne)?;
        Ok(SystemMatrices {
            a_minus: jacobian(u_minus, g)?,
            a_plus: jacobian(u_plus, g)?,
            a4: system_matrix_4(u_minus, u_plus, g)?,
            m: boundary_matrix(),
            l,
            l_inv_norm,
        })
    }
}
