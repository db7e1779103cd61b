//! Differentiable coarsening of unstructured 2-D simulation grids.
//!
//! A grid is a cloud of Voronoi sites with per-site permeability. The
//! pipeline tessellates the sites ([`geometry`]), runs an explicit
//! finite-volume simulation on the resulting cells ([`fvm`]), and measures
//! the pressure at a few fixed sites. Coarsening ([`coarsen`]) pools a fine
//! cloud into fewer sites ([`pooling`]) and then moves those sites by
//! gradient descent so the coarse grid reproduces the fine grid's
//! measurements. Gradients come from a reverse-mode tape ([`autodiff`]).
//!
//! Every numeric type is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.
//!
//! ```
//! use diffcoarsen::{scenarios, coarsen, CoarsenConfig};
//!
//! let s = scenarios::wave_scenario::<f64>(0).unwrap();
//! let sim = diffcoarsen::SimConfig { steps: 20, ..s.sim.clone() };
//! let config = CoarsenConfig { epochs: 1, ..s.coarsen.clone() };
//! let report = coarsen::optimize(&s.cloud, &sim, &config).unwrap();
//! assert!(report.final_rmse <= report.initial_rmse);
//! ```

pub mod autodiff;
pub mod coarsen;
pub mod fvm;
pub mod geometry;
pub mod pooling;
pub mod scalar;
pub mod scenarios;

pub use scalar::Scalar;

pub type Tape = autodiff::Tape<f64>;
pub type Var<'t> = autodiff::Var<'t, f64>;
pub type Boundary = geometry::Boundary<f64>;
pub type SiteCloud = geometry::SiteCloud<f64>;
pub type SimConfig = fvm::SimConfig<f64>;
pub type PressureSeries = fvm::PressureSeries<f64>;
pub type CoarsenConfig = coarsen::CoarsenConfig<f64>;
pub type CoarsenReport = coarsen::CoarsenReport<f64>;
pub type Scenario = scenarios::Scenario<f64>;
