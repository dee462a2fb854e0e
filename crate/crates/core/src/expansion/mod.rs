//! Small-noise asymptotic expansion filter.
//!
//! For `dY = (c X + eps g(X)) dt + sigma dW` with polynomial `g`, the
//! conditional mean is expanded as `N = n0 + n1 eps + .. + nk eps^k`. Each
//! coefficient is a ratio of Gaussian expectations under the linear model;
//! their Wick expansions are iterated integrals ([`ATerm`]) whose time
//! derivatives close into a finite system of SDEs ([`TermSystem`]) that is
//! integrated along the observed path.

mod aterm;
mod closure;
mod coef;
mod combine;
mod filter;
mod integrate;
mod jterms;
mod oracle;
mod wick;

pub use aterm::{ATerm, TermPolynomial};
pub use closure::{derive_closure, TermSystem};
pub use coef::{Coef, Mono};
pub use combine::{clip, clip_path, combine, series, ExpansionResult};
pub use filter::AsymptoticFilter;
pub use integrate::{integrate_closure, CompiledSystem, Readout, TermValues};
pub use jterms::{build_j_terms, JTerms};
pub use oracle::{quadrature_oracle, ORACLE_NODE_CAP};
pub use wick::{wick_moment, wick_moment_capped, DEFAULT_WICK_DEGREE_CAP};

/// Size limits of the symbolic machinery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionLimits {
    pub max_order: usize,
    pub term_cap: usize,
    pub wick_degree_cap: usize,
}

impl Default for ExpansionLimits {
    fn default() -> Self {
        Self {
            max_order: 2,
            term_cap: 500,
            wick_degree_cap: DEFAULT_WICK_DEGREE_CAP,
        }
    }
}
