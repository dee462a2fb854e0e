//! Continuous-time stochastic filtering.
//!
//! The crate covers two layers:
//!
//! * an exact linear-Gaussian engine ([`linear`]): Riccati solvers, the
//!   Kalman-Bucy filter, fixed-interval (RTS) and fixed-point smoothers, the
//!   conditional cross-covariance kernel of the hidden path, and a sampler for
//!   the conditional law of the whole path given the observations;
//! * a small-noise asymptotic expansion filter ([`expansion`]) for
//!   observation models `dY = (cX + eps g(X)) dt + sigma dW` with polynomial
//!   `g`, built from Gaussian moment algebra and an automatically derived
//!   closed system of stochastic differential equations.
//!
//! [`sde`] simulates signal/observation paths and [`bench`] runs the
//! Monte-Carlo error study on top of everything else.

pub mod bench;
pub mod error;
pub mod expansion;
pub mod io;
pub mod linear;
pub mod model;
pub mod sde;

pub use error::{Error, Result};
pub use model::{
    LinearGaussianModel, ModelFile, NonlinearModel, PerturbedLinearModel, PolySpec, TimeGrid,
};
pub use nalgebra;
pub use sde::{NoiseSeed, PathPair};

/// Version of this crate.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
