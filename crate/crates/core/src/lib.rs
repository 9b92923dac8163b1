//! Numerical toolkit for divergence-free vector fields in three dimensions and
//! their Hamiltonian structure: symplectic return maps, invariant area forms
//! on integral levels, rotation numbers on invariant tori, and the suspension
//! of an area-preserving surface map to a four-dimensional Hamiltonian model.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`.

// NaN must fail every threshold check, hence `!(x < tol)`; matrix code
// indexes by row and column.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod fields;
pub mod flow;
pub mod forms;
pub mod level_measure;
pub mod linalg;
pub mod poincare;
pub mod scalar;
pub mod suspension;
pub mod torus;

pub use error::{Error, Result};
pub use scalar::Real;

pub type IntegratorConfig = flow::IntegratorConfig<f64>;
pub type FlowResult = flow::FlowResult<f64>;
pub type CatalogEntry = fields::CatalogEntry<f64>;
pub type TwoForm3 = forms::TwoForm<f64, 3>;
pub type TwoForm4 = forms::TwoForm<f64, 4>;
pub type Section = poincare::Section<f64>;
pub type ReturnData = poincare::ReturnData<f64>;
pub type PeriodicOrbit = poincare::PeriodicOrbit<f64>;
pub type System = poincare::System<f64>;
pub type LevelSurface = level_measure::LevelSurface<f64>;
pub type RotationEstimate = torus::RotationEstimate<f64>;
