use std::fmt;

use nalgebra::{DMatrix, DVector};

use super::TimeGrid;
use crate::error::{Error, Result};

/// Lower bound required of the smallest eigenvalue of `sigma sigma^T`.
pub const SIGMA_EIGEN_FLOOR: f64 = 1e-10;

/// Time-varying linear-Gaussian system
///
/// ```text
/// dX = a(t) X dt + b(t) dV,   X_0 ~ N(x0_mean, x0_cov)
/// dY = c(t) X dt + sigma(t) dW
/// ```
///
/// Coefficients are sampled once at construction on the half-step lattice
/// of the grid (every node and every midpoint) so that every solver sees
/// identical values.
#[derive(Debug, Clone)]
pub struct LinearGaussianModel {
    grid: TimeGrid,
    a: Vec<DMatrix<f64>>,
    b: Vec<DMatrix<f64>>,
    c: Vec<DMatrix<f64>>,
    sigma: Vec<DMatrix<f64>>,
    x0_mean: DVector<f64>,
    x0_cov: DMatrix<f64>,
}

/// One failed check reported by [`LinearGaussianModel::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: &'static str,
    pub node: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Some(n) => write!(f, "{} at node {}: {}", self.kind, n, self.detail),
            None => write!(f, "{}: {}", self.kind, self.detail),
        }
    }
}

/// Coefficient products the solvers need at each half-node.
#[derive(Debug, Clone)]
pub(crate) struct Derived {
    /// `b b^T`
    pub bbt: Vec<DMatrix<f64>>,
    /// `c^T (sigma sigma^T)^{-1}`
    pub ct_rinv: Vec<DMatrix<f64>>,
    /// `c^T (sigma sigma^T)^{-1} c`
    pub info: Vec<DMatrix<f64>>,
}

impl LinearGaussianModel {
    /// Samples the coefficient functions on the half-step lattice of `grid`.
    pub fn from_fn<A, B, C, S>(
        grid: TimeGrid,
        x0_mean: DVector<f64>,
        x0_cov: DMatrix<f64>,
        a: A,
        b: B,
        c: C,
        sigma: S,
    ) -> Result<Self>
    where
        A: Fn(f64) -> DMatrix<f64>,
        B: Fn(f64) -> DMatrix<f64>,
        C: Fn(f64) -> DMatrix<f64>,
        S: Fn(f64) -> DMatrix<f64>,
    {
        let half = 2 * grid.n_steps() + 1;
        let sample = |f: &dyn Fn(f64) -> DMatrix<f64>| -> Vec<DMatrix<f64>> {
            (0..half).map(|k| f(grid.half_time(k))).collect()
        };
        Self::from_samples(
            grid,
            x0_mean,
            x0_cov,
            sample(&a),
            sample(&b),
            sample(&c),
            sample(&sigma),
        )
    }

    pub fn constant(
        grid: TimeGrid,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        sigma: DMatrix<f64>,
        x0_mean: DVector<f64>,
        x0_cov: DMatrix<f64>,
    ) -> Result<Self> {
        Self::from_fn(
            grid,
            x0_mean,
            x0_cov,
            |_| a.clone(),
            |_| b.clone(),
            |_| c.clone(),
            |_| sigma.clone(),
        )
    }

    /// Scalar model with constant coefficients.
    pub fn scalar(
        grid: TimeGrid,
        a: f64,
        b: f64,
        c: f64,
        sigma: f64,
        x0_mean: f64,
        x0_var: f64,
    ) -> Result<Self> {
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        Self::constant(
            grid,
            m(a),
            m(b),
            m(c),
            m(sigma),
            DVector::from_element(1, x0_mean),
            m(x0_var),
        )
    }

    /// Builds a model from coefficient samples on the half-step lattice
    /// (`2 * n_steps + 1` entries each).
    pub fn from_samples(
        grid: TimeGrid,
        x0_mean: DVector<f64>,
        x0_cov: DMatrix<f64>,
        a: Vec<DMatrix<f64>>,
        b: Vec<DMatrix<f64>>,
        c: Vec<DMatrix<f64>>,
        sigma: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let half = 2 * grid.n_steps() + 1;
        for (name, v) in [("a", &a), ("b", &b), ("c", &c), ("sigma", &sigma)] {
            if v.len() != half {
                return Err(Error::Contract(format!(
                    "coefficient `{name}` has {} samples, expected {half}",
                    v.len()
                )));
            }
        }
        let d1 = x0_mean.len();
        if d1 == 0 {
            return Err(Error::Contract("state dimension must be positive".into()));
        }
        let (m1, d2, m2) = (b[0].ncols(), c[0].nrows(), sigma[0].ncols());
        let shape_ok = |m: &DMatrix<f64>, r: usize, k: usize| m.nrows() == r && m.ncols() == k;
        if !shape_ok(&x0_cov, d1, d1) {
            return Err(Error::Contract("x0_cov must be d1 x d1".into()));
        }
        for k in 0..half {
            if !(shape_ok(&a[k], d1, d1)
                && shape_ok(&b[k], d1, m1)
                && shape_ok(&c[k], d2, d1)
                && shape_ok(&sigma[k], d2, m2))
            {
                return Err(Error::Contract(format!(
                    "inconsistent coefficient shapes at half-node {k}"
                )));
            }
        }
        Ok(Self {
            grid,
            a,
            b,
            c,
            sigma,
            x0_mean,
            x0_cov,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim_x(&self) -> usize {
        self.x0_mean.len()
    }

    pub fn dim_y(&self) -> usize {
        self.c[0].nrows()
    }

    pub fn noise_dim_x(&self) -> usize {
        self.b[0].ncols()
    }

    pub fn noise_dim_y(&self) -> usize {
        self.sigma[0].ncols()
    }

    /// `a` at half-node `k` (node `i` is half-node `2i`).
    pub fn a_half(&self, k: usize) -> &DMatrix<f64> {
        &self.a[k]
    }

    pub fn b_half(&self, k: usize) -> &DMatrix<f64> {
        &self.b[k]
    }

    pub fn c_half(&self, k: usize) -> &DMatrix<f64> {
        &self.c[k]
    }

    pub fn sigma_half(&self, k: usize) -> &DMatrix<f64> {
        &self.sigma[k]
    }

    pub fn a(&self, node: usize) -> &DMatrix<f64> {
        &self.a[2 * node]
    }

    pub fn b(&self, node: usize) -> &DMatrix<f64> {
        &self.b[2 * node]
    }

    pub fn c(&self, node: usize) -> &DMatrix<f64> {
        &self.c[2 * node]
    }

    pub fn sigma(&self, node: usize) -> &DMatrix<f64> {
        &self.sigma[2 * node]
    }

    pub fn x0_mean(&self) -> &DVector<f64> {
        &self.x0_mean
    }

    pub fn x0_cov(&self) -> &DMatrix<f64> {
        &self.x0_cov
    }

    /// Same coefficients, initial covariance replaced by `x0_cov + eps * I`.
    pub fn regularized(&self, eps: f64) -> Self {
        let mut m = self.clone();
        let n = m.dim_x();
        m.x0_cov += DMatrix::identity(n, n) * eps;
        m
    }

    /// Grid-node checks of the standing assumptions; empty when all pass.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
        for i in 0..self.grid.len() {
            for (name, m) in [
                ("a", self.a(i)),
                ("b", self.b(i)),
                ("c", self.c(i)),
                ("sigma", self.sigma(i)),
            ] {
                if !finite(m) {
                    out.push(Violation {
                        kind: "non-finite coefficient",
                        node: Some(i),
                        detail: format!("`{name}` has non-finite entries"),
                    });
                }
            }
            let s = self.sigma(i);
            let sst = s * s.transpose();
            if finite(&sst) {
                let lmin = min_eigenvalue(&sst);
                if !(lmin > SIGMA_EIGEN_FLOOR) {
                    out.push(Violation {
                        kind: "sigma lower bound",
                        node: Some(i),
                        detail: format!(
                            "smallest eigenvalue of sigma sigma^T is {lmin:e} <= {SIGMA_EIGEN_FLOOR:e}"
                        ),
                    });
                }
            }
        }
        if !finite(&self.x0_cov) || self.x0_mean.iter().any(|v| !v.is_finite()) {
            out.push(Violation {
                kind: "non-finite initial law",
                node: None,
                detail: "x0_mean or x0_cov has non-finite entries".into(),
            });
        } else {
            let p = &self.x0_cov;
            let scale = p.amax().max(1.0);
            if (p - p.transpose()).amax() > 1e-12 * scale {
                out.push(Violation {
                    kind: "x0_cov not symmetric",
                    node: None,
                    detail: "x0_cov differs from its transpose".into(),
                });
            }
            let lmin = min_eigenvalue(&(0.5 * (p + p.transpose())));
            if lmin < -1e-12 * scale {
                out.push(Violation {
                    kind: "x0_cov not PSD",
                    node: None,
                    detail: format!("smallest eigenvalue {lmin:e}"),
                });
            }
        }
        out
    }

    /// Fails with a config error listing every violation.
    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            return Ok(());
        }
        let msg: Vec<String> = v.iter().take(5).map(|v| v.to_string()).collect();
        Err(Error::Config(format!(
            "model validation failed ({} violations): {}",
            v.len(),
            msg.join("; ")
        )))
    }

    pub(crate) fn derived(&self) -> Result<Derived> {
        self.ensure_valid()?;
        let half = self.a.len();
        let mut bbt = Vec::with_capacity(half);
        let mut ct_rinv = Vec::with_capacity(half);
        let mut info = Vec::with_capacity(half);
        for k in 0..half {
            let b = &self.b[k];
            let c = &self.c[k];
            let s = &self.sigma[k];
            let rinv = (s * s.transpose()).try_inverse().ok_or(Error::Numerical {
                module: "model",
                node: k / 2,
                detail: "sigma sigma^T not invertible".into(),
            })?;
            let cr = c.transpose() * rinv;
            info.push(&cr * c);
            ct_rinv.push(cr);
            bbt.push(b * b.transpose());
        }
        Ok(Derived { bbt, ct_rinv, info })
    }
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::new(0.0, 0.01, 100).unwrap()
    }

    #[test]
    fn paper_scalar_model_is_valid() {
        let m = LinearGaussianModel::scalar(grid(), -0.4, 0.5, 1.0, 0.3, 0.0, 0.0).unwrap();
        assert!(m.validate().is_empty());
    }

    #[test]
    fn zero_sigma_flagged() {
        let m = LinearGaussianModel::scalar(grid(), -0.4, 0.5, 1.0, 0.0, 0.0, 0.0).unwrap();
        let v = m.validate();
        assert!(!v.is_empty());
        assert!(v.iter().all(|v| v.kind == "sigma lower bound"));
        assert_eq!(v.len(), grid().len());
    }

    #[test]
    fn negative_x0_cov_flagged() {
        let m = LinearGaussianModel::scalar(grid(), -0.4, 0.5, 1.0, 0.3, 0.0, -0.1).unwrap();
        let v = m.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, "x0_cov not PSD");
    }

    #[test]
    fn time_varying_samples_on_half_lattice() {
        let g = TimeGrid::new(0.0, 0.5, 2).unwrap();
        let m = LinearGaussianModel::from_fn(
            g,
            DVector::zeros(1),
            DMatrix::zeros(1, 1),
            |t| DMatrix::from_element(1, 1, t),
            |_| DMatrix::from_element(1, 1, 1.0),
            |_| DMatrix::from_element(1, 1, 1.0),
            |_| DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        assert_eq!(m.a_half(1)[(0, 0)], 0.25);
        assert_eq!(m.a(2)[(0, 0)], 1.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let r = LinearGaussianModel::constant(
            grid(),
            DMatrix::zeros(2, 2),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 2),
            DMatrix::identity(1, 1),
            DVector::zeros(2),
            DMatrix::zeros(2, 2),
        );
        assert!(r.is_err());
    }
}
