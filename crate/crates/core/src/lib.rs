//! Simulation and structural verification of a coupled shallow-water /
//! chamber-pressure model of an oscillating water column.
//!
//! The fluid solves the 1d nonlinear shallow water equations on three
//! exterior intervals separated by a bottom step and a fixed, partially
//! immersed structure. Under the structure the discharge `q_i` is uniform in
//! space; it and the chamber pressure variation `P_ch` obey a boundary ODE
//! driven by the wall traces. The crate integrates this PDE–ODE system and
//! checks the algebraic hypotheses behind its well-posedness.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix `f64`.

// NaN must fail every `!(x > 0)` style guard, and the small dense kernels read best with indices
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod coupling;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod real;
pub mod solver;
pub mod swe;

pub use error::{Error, Result};
pub use real::Real;

pub type Params = model::PhysicalParams<f64>;
pub type Layout = model::DomainLayout<f64>;
pub type Field = model::FieldState<f64>;
pub type Boundary = model::BoundaryState<f64>;
pub type Cell = swe::CellState<f64>;
pub type Traces = coupling::TraceRecord<f64>;
pub type Config = solver::SolverConfig<f64>;
pub type Sim = solver::Problem<f64>;
pub type RunResult = solver::SimulationResult<f64>;
