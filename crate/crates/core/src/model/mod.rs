//! Problem definitions: grids, linear-Gaussian systems, polynomially
//! perturbed scalar models and nonlinear models with their first-order
//! small-noise linearization.

mod config;
mod grid;
mod linear_gaussian;
mod nonlinear;
mod perturbed;
pub mod poly;

pub use config::{GridSection, ModelFile, ModelSection, RunSection};
pub use grid::TimeGrid;
pub(crate) use linear_gaussian::min_eigenvalue;
pub use linear_gaussian::{LinearGaussianModel, Violation, SIGMA_EIGEN_FLOOR};
pub use nonlinear::{linearize_first_order, Linearization, NonlinearModel, ScalarFn};
pub use perturbed::PerturbedLinearModel;
pub use poly::PolySpec;
