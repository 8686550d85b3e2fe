//! Brownian motion and positive harmonic functions on treebolic space HT(q, p).
//!
//! * [`geometry`]: the tree, treebolic points, the HT metric and reference density.
//! * [`simulate`]: Monte Carlo simulation of the diffusion, embedded chains and exit laws.
//! * [`kernels`]: closed-form harmonic objects (tree walk, Martin and Poisson kernels).
//! * [`fdsolver`]: finite-difference Dirichlet solver on unions of strips.
//! * [`stats`]: the hypothesis tests used to compare Monte Carlo output with exact values.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the common double-precision instantiation.

pub mod error;
pub mod fdsolver;
pub mod geometry;
pub mod kernels;
pub mod scalar;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ParamsF64 = geometry::Params<f64>;
pub type ParamsF32 = geometry::Params<f32>;
pub type HtPointF64 = geometry::HtPoint<f64>;
pub type HtPointF32 = geometry::HtPoint<f32>;
pub type TreePointF64 = geometry::TreePoint<f64>;
pub type SimulatorF64 = simulate::Simulator<f64>;
pub type SimConfigF64 = simulate::SimConfig<f64>;
pub type StripDomainF64 = simulate::StripDomain<f64>;
pub type StripGridF64 = fdsolver::StripGrid<f64>;
pub type BoundaryParamF64 = kernels::BoundaryParam<f64>;
