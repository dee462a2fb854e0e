//! Exact linear-Gaussian conditional laws on a time grid: Riccati solvers,
//! the Kalman-Bucy filter, fixed-interval and fixed-point smoothers, the
//! conditional cross-covariance kernel and the conditional path sampler.
//!
//! Everything is discretised consistently on one grid: the smoothers and the
//! kernel are the exact smoothing counterparts of the Euler-Maruyama filter,
//! so the fixed-interval and fixed-point smoothers and the sampler mean agree
//! to rounding error.

mod filter;
mod kernel;
mod riccati;
mod sampler;
mod smoother;

pub use filter::{
    centered_increments, innovations, kalman_bucy, kalman_bucy_scalar, prior_mean, FilterPath,
};
pub use kernel::{
    cov_kernel, cov_kernel_from_phi, filter_cross_cov, initial_xi_cov, CovKernel, KERNEL_NODE_CAP,
};
pub use riccati::{solve_gamma, solve_phi, RiccatiBackward, RiccatiForward};
pub use sampler::{sample_conditional_path, ConditionalSampler};
pub use smoother::{fixed_point_smoother, rts_smooth, FixedPointPath, SmootherState};

/// Default initial-covariance regularization for operations that invert `gamma`.
pub const DEFAULT_REGULARIZATION: f64 = 1e-8;
