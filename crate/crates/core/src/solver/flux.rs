//! Numerical fluxes, their fluctuation splittings, and MUSCL reconstruction.

use crate::error::Result;
use crate::linalg::Mat2;
use crate::real::{minmod, Real};
use crate::swe::{self, CellState};

/// Finite-volume flux family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Local Lax–Friedrichs.
    #[default]
    Rusanov,
    /// HLL with Davis wave-speed estimates.
    Hll,
    /// Minmod-limited linear reconstruction with the Rusanov flux.
    MusclRusanov,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Rusanov => "rusanov",
            Scheme::Hll => "hll",
            Scheme::MusclRusanov => "muscl_rusanov",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rusanov" => Some(Scheme::Rusanov),
            "hll" => Some(Scheme::Hll),
            "muscl_rusanov" => Some(Scheme::MusclRusanov),
            _ => None,
        }
    }

    pub fn reconstructs(self) -> bool {
        matches!(self, Scheme::MusclRusanov)
    }
}

fn davis_speeds<T: Real>(a: &CellState<T>, b: &CellState<T>, g: T) -> Result<(T, T)> {
    let (ha, hb) = (a.wet_depth()?, b.wet_depth()?);
    let (ua, ub) = (a.q / ha, b.q / hb);
    let (ca, cb) = ((g * ha).sqrt(), (g * hb).sqrt());
    Ok(((ua - ca).min(ub - cb), (ua + ca).max(ub + cb)))
}

fn rusanov_speed<T: Real>(a: &CellState<T>, b: &CellState<T>, g: T) -> Result<T> {
    Ok(swe::max_wave_speed(a, g)?.max(swe::max_wave_speed(b, g)?))
}

/// Numerical flux between a left state `a` and a right state `b` sharing `h_rest`.
pub fn numerical_flux<T: Real>(
    scheme: Scheme,
    a: &CellState<T>,
    b: &CellState<T>,
    g: T,
) -> Result<[T; 2]> {
    let fa = swe::flux(a, g)?;
    let fb = swe::flux(b, g)?;
    let d = [b.zeta - a.zeta, b.q - a.q];
    match scheme {
        Scheme::Rusanov | Scheme::MusclRusanov => {
            let s = rusanov_speed(a, b, g)?;
            Ok([
                T::half() * (fa[0] + fb[0]) - T::half() * s * d[0],
                T::half() * (fa[1] + fb[1]) - T::half() * s * d[1],
            ])
        }
        Scheme::Hll => {
            let (sl, sr) = davis_speeds(a, b, g)?;
            if sl >= T::zero() {
                return Ok(fa);
            }
            if sr <= T::zero() {
                return Ok(fb);
            }
            let w = T::one() / (sr - sl);
            Ok([
                (sr * fa[0] - sl * fb[0] + sl * sr * d[0]) * w,
                (sr * fa[1] - sl * fb[1] + sl * sr * d[1]) * w,
            ])
        }
    }
}

/// `(A⁻, A⁺)` with `F̂(a, b) = F(a) + A⁻ (b - a) = F(b) - A⁺ (b - a)`, built on
/// the Roe matrix of the pair. Frozen at `(a, b)`, these define the linear
/// scheme whose fixed point is the nonlinear one.
pub fn fluctuation_split<T: Real>(
    scheme: Scheme,
    a: &CellState<T>,
    b: &CellState<T>,
    g: T,
) -> Result<(Mat2<T>, Mat2<T>)> {
    let roe = swe::roe_matrix(a, b, g)?;
    let minus = match scheme {
        Scheme::Rusanov | Scheme::MusclRusanov => {
            let s = rusanov_speed(a, b, g)?;
            (roe - Mat2::identity().scale(s)).scale(T::half())
        }
        Scheme::Hll => {
            let (sl, sr) = davis_speeds(a, b, g)?;
            if sl >= T::zero() {
                Mat2::zeros()
            } else if sr <= T::zero() {
                roe
            } else {
                (Mat2::identity().scale(sr) - roe).scale(sl / (sr - sl))
            }
        }
    };
    Ok((minus, roe - minus))
}

/// Limited face values `(u_j^-, u_j^+)` of one field on a sub-domain.
/// Boundary cells use the limited one-sided pair of differences.
pub fn muscl_faces<T: Real>(v: &[T]) -> (Vec<T>, Vec<T>) {
    let n = v.len();
    let mut lo = vec![T::zero(); n];
    let mut hi = vec![T::zero(); n];
    for j in 0..n {
        let slope = if n < 3 {
            T::zero()
        } else if j == 0 {
            minmod(v[1] - v[0], v[2] - v[1])
        } else if j == n - 1 {
            minmod(v[j] - v[j - 1], v[j - 1] - v[j - 2])
        } else {
            minmod(v[j] - v[j - 1], v[j + 1] - v[j])
        };
        lo[j] = v[j] - T::half() * slope;
        hi[j] = v[j] + T::half() * slope;
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    const G: f64 = 9.81;

    fn st(z: f64, q: f64) -> CellState<f64> {
        CellState::new(z, q, 1.0)
    }

    #[test]
    fn consistency() {
        let u = st(0.07, -0.3);
        for s in [Scheme::Rusanov, Scheme::Hll] {
            let f = numerical_flux(s, &u, &u, G).unwrap();
            let exact = swe::flux(&u, G).unwrap();
            for k in 0..2 {
                assert!((f[k] - exact[k]).abs() <= 1e-15 * exact[k].abs().max(1.0));
            }
        }
    }

    #[test]
    fn mirrored_pair_has_zero_mass_flux() {
        let u = st(0.1, 0.5);
        let ghost = crate::coupling::wall_closure(&u);
        for s in [Scheme::Rusanov, Scheme::Hll] {
            assert_eq!(numerical_flux(s, &u, &ghost, G).unwrap()[0], 0.0);
        }
    }

    #[test]
    fn fluctuations_reproduce_flux() {
        let (a, b) = (st(0.05, 0.3), st(-0.04, -0.1));
        for s in [Scheme::Rusanov, Scheme::Hll] {
            let f = numerical_flux(s, &a, &b, G).unwrap();
            let (m, p) = fluctuation_split(s, &a, &b, G).unwrap();
            let d = [b.zeta - a.zeta, b.q - a.q];
            let fa = swe::flux(&a, G).unwrap();
            let fb = swe::flux(&b, G).unwrap();
            let lm = m.mul_vec(&d);
            let lp = p.mul_vec(&d);
            for k in 0..2 {
                assert!((fa[k] + lm[k] - f[k]).abs() < 1e-13);
                assert!((fb[k] - lp[k] - f[k]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn muscl_limits_extrema() {
        let v = [0.0, 1.0, 3.0, 2.0, 2.0];
        let (lo, hi) = muscl_faces(&v);
        assert_eq!((lo[2], hi[2]), (3.0, 3.0));
        assert_eq!((lo[1], hi[1]), (0.5, 1.5));
        // linear data is reproduced exactly, boundary cells included
        let lin: Vec<f64> = (0..6).map(|j| 2.0 * j as f64).collect();
        let (lo, hi) = muscl_faces(&lin);
        assert_eq!((lo[0], hi[0]), (-1.0, 1.0));
        assert_eq!((lo[5], hi[5]), (9.0, 11.0));
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in [Scheme::Rusanov, Scheme::Hll, Scheme::MusclRusanov] {
            assert_eq!(Scheme::parse(s.as_str()), Some(s));
        }
        assert_eq!(Scheme::parse("roe"), None);
    }
}
