//! Numerical laboratory for the degenerate parabolic logistic equation
//!
//! ```text
//! ∂ₜu − Δu = au − b(x)uᵖ   in Ω × (0, ∞),   u = 0 on ∂Ω,
//! ```
//!
//! with `b ≥ 0` vanishing on a subregion `Ω₀`, and for its large-`p` limit,
//! the parabolic obstacle problem with `u ≤ 1` on `Ω∖Ω₀`.
//!
//! Modules, bottom up:
//!
//! - [`mesh`]: grids, grid functions, the Dirichlet Laplacian, norms,
//!   sampling of `b` and `Ω₀`.
//! - [`spectral`]: principal eigenpairs on `Ω` and `Ω₀`.
//! - [`logistic`]: Strang splitting with an exact reaction flow.
//! - [`obstacle`]: implicit Euler with projected SOR for the obstacle flow,
//!   stationary limits and coincidence sets.
//! - [`experiments`]: convergence studies in `p` and `t`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod logistic;
pub mod mesh;
pub mod obstacle;
pub mod series;
pub mod spectral;

pub use error::{Error, Result};
pub use exec::Exec;
pub use mesh::{AxisBox, BKind, DomainSpec, Field, Grid, Mask, NormKind};
pub use series::{Observables, StopReason, StopRule, TimeSeries};
