use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{LinearGaussianModel, TimeGrid};
use crate::error::{Error, Result};

type Func = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A smooth scalar function with its first two derivatives.
#[derive(Clone)]
pub struct ScalarFn {
    f: Func,
    df: Func,
    d2f: Func,
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarFn")
    }
}

impl ScalarFn {
    pub fn new(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            f: Arc::new(f),
            df: Arc::new(df),
            d2f: Arc::new(d2f),
        }
    }

    /// `k0 + k1 x`.
    pub fn affine(k0: f64, k1: f64) -> Self {
        Self::new(move |x| k0 + k1 * x, move |_| k1, |_| 0.0)
    }

    pub fn constant(k: f64) -> Self {
        Self::affine(k, 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn d1(&self, x: f64) -> f64 {
        (self.df)(x)
    }

    pub fn d2(&self, x: f64) -> f64 {
        (self.d2f)(x)
    }

    /// Central-difference check of both derivative evaluators.
    pub fn check_derivatives(&self, name: &str, points: &[f64], rel_tol: f64) -> Result<()> {
        let h = 1e-4;
        for &x in points {
            let fd1 = (self.eval(x + h) - self.eval(x - h)) / (2.0 * h);
            let fd2 = (self.d1(x + h) - self.d1(x - h)) / (2.0 * h);
            for (order, fd, an) in [(1, fd1, self.d1(x)), (2, fd2, self.d2(x))] {
                if (fd - an).abs() > rel_tol * an.abs().max(1.0) {
                    return Err(Error::Config(format!(
                        "`{name}` derivative {order} inconsistent at x={x}: analytic {an}, finite difference {fd}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Scalar nonlinear model `dX = alpha(X) dt + eps beta(X) dV`, `X_0 = 0`,
/// `dY = h(X) dt + sigma dW`.
#[derive(Debug, Clone)]
pub struct NonlinearModel {
    pub alpha: ScalarFn,
    pub beta: ScalarFn,
    pub h: ScalarFn,
    pub epsilon: f64,
    pub sigma: f64,
}

const CHECK_POINTS: [f64; 7] = [-2.0, -1.0, -0.5, 0.0, 0.3, 1.0, 2.0];

impl NonlinearModel {
    pub fn new(
        alpha: ScalarFn,
        beta: ScalarFn,
        h: ScalarFn,
        epsilon: f64,
        sigma: f64,
    ) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::Config("key `sigma`: must be > 0".into()));
        }
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::Config("key `epsilon`: must lie in [0, 1)".into()));
        }
        alpha.check_derivatives("alpha", &CHECK_POINTS, 1e-5)?;
        beta.check_derivatives("beta", &CHECK_POINTS, 1e-5)?;
        h.check_derivatives("h", &CHECK_POINTS, 1e-5)?;
        Ok(Self {
            alpha,
            beta,
            h,
            epsilon,
            sigma,
        })
    }
}

/// First-order small-noise reformulation of a [`NonlinearModel`].
#[derive(Debug, Clone)]
pub struct Linearization {
    /// Deterministic path `X0` at grid nodes.
    pub x0_path: Vec<f64>,
    /// `h(X0_t)` at grid nodes, the observation drift offset.
    pub h_offset: Vec<f64>,
    /// Model of the first-order fluctuation: `a(t) = alpha'(X0)`,
    /// `b(t) = beta(X0)`, `c(t) = h'(X0)`, noise level `sigma`.
    pub model: LinearGaussianModel,
}

fn rk4_step(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let k1 = f(x);
    let k2 = f(x + 0.5 * h * k1);
    let k3 = f(x + 0.5 * h * k2);
    let k4 = f(x + h * k3);
    x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// RK4 solution of `dX0 = alpha(X0) dt`, `X0(0) = 0`, sampled on the half-step
/// lattice (`2 n + 1` values).
fn deterministic_half_path(alpha: &ScalarFn, grid: &TimeGrid) -> Result<Vec<f64>> {
    let h = 0.5 * grid.dt();
    let n = 2 * grid.n_steps();
    let f = |x: f64| alpha.eval(x);
    let mut out = Vec::with_capacity(n + 1);
    let mut x = 0.0;
    out.push(x);
    for k in 0..n {
        x = rk4_step(&f, x, h);
        if !x.is_finite() {
            return Err(Error::Integration {
                module: "model",
                node: (k + 2) / 2,
                detail: "deterministic path X0 is not finite".into(),
            });
        }
        out.push(x);
    }
    Ok(out)
}

/// Linearizes a nonlinear model around its noiseless path.
pub fn linearize_first_order(model: &NonlinearModel, grid: &TimeGrid) -> Result<Linearization> {
    let half = deterministic_half_path(&model.alpha, grid)?;
    let m = |v: f64| DMatrix::from_element(1, 1, v);
    let a = half.iter().map(|&x| m(model.alpha.d1(x))).collect();
    let b = half.iter().map(|&x| m(model.beta.eval(x))).collect();
    let c = half.iter().map(|&x| m(model.h.d1(x))).collect();
    let sigma = vec![m(model.sigma); half.len()];
    let lin = LinearGaussianModel::from_samples(
        *grid,
        DVector::zeros(1),
        DMatrix::zeros(1, 1),
        a,
        b,
        c,
        sigma,
    )?;
    let x0_path: Vec<f64> = half.iter().step_by(2).cloned().collect();
    let h_offset = x0_path.iter().map(|&x| model.h.eval(x)).collect();
    Ok(Linearization {
        x0_path,
        h_offset,
        model: lin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(dt: f64) -> TimeGrid {
        TimeGrid::on_interval(2.0, dt).unwrap()
    }

    #[test]
    fn linear_model_is_its_own_linearization() {
        let nl = NonlinearModel::new(
            ScalarFn::affine(0.0, -0.4),
            ScalarFn::constant(0.5),
            ScalarFn::affine(0.0, 1.0),
            0.2,
            0.3,
        )
        .unwrap();
        let lin = linearize_first_order(&nl, &grid(0.01)).unwrap();
        assert!(lin.x0_path.iter().all(|&x| x == 0.0));
        for i in 0..lin.x0_path.len() {
            assert_eq!(lin.model.a(i)[(0, 0)], -0.4);
            assert_eq!(lin.model.b(i)[(0, 0)], 0.5);
            assert_eq!(lin.model.c(i)[(0, 0)], 1.0);
        }
    }

    #[test]
    fn relaxation_to_one() {
        let nl = NonlinearModel::new(
            ScalarFn::affine(1.0, -1.0),
            ScalarFn::constant(1.0),
            ScalarFn::affine(0.0, 1.0),
            0.1,
            1.0,
        )
        .unwrap();
        let g = grid(0.01);
        let lin = linearize_first_order(&nl, &g).unwrap();
        for (i, x) in lin.x0_path.iter().enumerate() {
            let t = g.time(i);
            assert!((x - (1.0 - (-t).exp())).abs() < 1e-10);
            assert_eq!(lin.model.a(i)[(0, 0)], -1.0);
        }
    }

    #[test]
    fn cubic_drift_fixed_point() {
        let nl = NonlinearModel::new(
            ScalarFn::new(|x| -x * x * x, |x| -3.0 * x * x, |x| -6.0 * x),
            ScalarFn::constant(1.0),
            ScalarFn::affine(0.0, 1.0),
            0.1,
            1.0,
        )
        .unwrap();
        let lin = linearize_first_order(&nl, &grid(0.05)).unwrap();
        assert!(lin.x0_path.iter().all(|&x| x == 0.0));
        assert!((0..lin.x0_path.len()).all(|i| lin.model.a(i)[(0, 0)] == 0.0));
    }

    #[test]
    fn fourth_order_convergence() {
        // logistic drift: X0' = 1 + X0 - X0^2 has smooth nonlinear dynamics
        let alpha = ScalarFn::new(|x| 1.0 + x - x * x, |x| 1.0 - 2.0 * x, |_| -2.0);
        let nl = NonlinearModel::new(
            alpha,
            ScalarFn::constant(1.0),
            ScalarFn::affine(0.0, 1.0),
            0.1,
            1.0,
        )
        .unwrap();
        let end = |dt: f64| {
            *linearize_first_order(&nl, &grid(dt))
                .unwrap()
                .x0_path
                .last()
                .unwrap()
        };
        let (e1, e2) = (end(0.1) - end(0.0125), end(0.05) - end(0.0125));
        let ratio = e1.abs() / e2.abs();
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn blow_up_names_node() {
        let nl = NonlinearModel::new(
            ScalarFn::new(|x| 1.0 + x * x, |x| 2.0 * x, |_| 2.0),
            ScalarFn::constant(1.0),
            ScalarFn::affine(0.0, 1.0),
            0.1,
            1.0,
        )
        .unwrap();
        // tan(t) escapes at pi/2
        let err =
            linearize_first_order(&nl, &TimeGrid::on_interval(3.0, 0.01).unwrap()).unwrap_err();
        assert!(
            matches!(err, Error::Integration { node, .. } if node > 150 && node < 200),
            "{err}"
        );
    }

    #[test]
    fn inconsistent_derivative_rejected() {
        let bad = ScalarFn::new(|x| x * x, |x| x, |_| 2.0);
        assert!(bad.check_derivatives("h", &CHECK_POINTS, 1e-5).is_err());
    }
}
