use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{min_eigenvalue, LinearGaussianModel, TimeGrid};

/// Filtering error covariance `gamma(t)` at every grid node.
#[derive(Debug, Clone)]
pub struct RiccatiForward {
    pub grid: TimeGrid,
    pub gamma: Vec<DMatrix<f64>>,
    /// One-step transitions of `dPhi/dt = (a - gamma c^T (sigma sigma^T)^{-1} c) Phi`
    /// from node `k` to `k + 1`, integrated jointly with `gamma`.
    pub propagators: Vec<DMatrix<f64>>,
}

impl RiccatiForward {
    /// Scalar view; panics unless the state is one-dimensional.
    pub fn scalar(&self) -> Vec<f64> {
        assert_eq!(
            self.gamma[0].nrows(),
            1,
            "scalar view of a matrix Riccati solution"
        );
        self.gamma.iter().map(|g| g[(0, 0)]).collect()
    }
}

/// Backward solution `phi(s; t)` for `s = 0..=t`.
#[derive(Debug, Clone)]
pub struct RiccatiBackward {
    pub grid: TimeGrid,
    pub horizon: usize,
    pub phi: Vec<DMatrix<f64>>,
    /// `phi` at step midpoints by cubic Hermite interpolation.
    pub phi_mid: Vec<DMatrix<f64>>,
}

fn rk4<F>(y: &DMatrix<f64>, h: f64, f: F) -> DMatrix<f64>
where
    F: Fn(usize, &DMatrix<f64>) -> DMatrix<f64>,
{
    // Stage index: 0 = start, 1 = midpoint, 2 = end.
    let k1 = f(0, y);
    let k2 = f(1, &(y + &k1 * (0.5 * h)));
    let k3 = f(1, &(y + &k2 * (0.5 * h)));
    let k4 = f(2, &(y + &k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn check_sign(m: &DMatrix<f64>, sign: f64, node: usize, what: &str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            module: "linear",
            node,
            detail: format!("{what} is not finite"),
        });
    }
    let scale = m.amax().max(1.0);
    let lmin = min_eigenvalue(&(m * sign));
    if lmin < -1e-10 * scale {
        let kind = if sign > 0.0 { "PSD" } else { "NSD" };
        return Err(Error::Numerical {
            module: "linear",
            node,
            detail: format!("{what} lost {kind} (eigenvalue {:e})", sign * lmin),
        });
    }
    Ok(())
}

/// RK4 solution of
/// `gamma' = -gamma c^T (sigma sigma^T)^{-1} c gamma + a gamma + gamma a^T + b b^T`,
/// `gamma(0) = x0_cov`.
pub fn solve_gamma(model: &LinearGaussianModel) -> Result<RiccatiForward> {
    let d = model.derived()?;
    let grid = *model.grid();
    let dt = grid.dt();
    let n = model.dim_x();
    let mut gamma = Vec::with_capacity(grid.len());
    let mut propagators = Vec::with_capacity(grid.n_steps());
    let mut g = symmetrize(model.x0_cov().clone());
    check_sign(&g, 1.0, 0, "gamma")?;
    gamma.push(g.clone());
    for i in 0..grid.n_steps() {
        let fg = |k: usize, y: &DMatrix<f64>| {
            let a = model.a_half(k);
            -(y * &d.info[k] * y) + a * y + y * a.transpose() + &d.bbt[k]
        };
        let fp =
            |k: usize, y: &DMatrix<f64>, p: &DMatrix<f64>| (model.a_half(k) - y * &d.info[k]) * p;
        let (k0, h) = (2 * i, 0.5 * dt);
        let p0 = DMatrix::identity(n, n);
        let g1 = fg(k0, &g);
        let p1 = fp(k0, &g, &p0);
        let (gs, ps) = (&g + &g1 * h, &p0 + &p1 * h);
        let g2 = fg(k0 + 1, &gs);
        let p2 = fp(k0 + 1, &gs, &ps);
        let (gs, ps) = (&g + &g2 * h, &p0 + &p2 * h);
        let g3 = fg(k0 + 1, &gs);
        let p3 = fp(k0 + 1, &gs, &ps);
        let (gs, ps) = (&g + &g3 * dt, &p0 + &p3 * dt);
        let g4 = fg(k0 + 2, &gs);
        let p4 = fp(k0 + 2, &gs, &ps);
        g = symmetrize(&g + (g1 + g2 * 2.0 + g3 * 2.0 + g4) * (dt / 6.0));
        propagators.push(p0 + (p1 + p2 * 2.0 + p3 * 2.0 + p4) * (dt / 6.0));
        check_sign(&g, 1.0, i + 1, "gamma")?;
        gamma.push(g.clone());
    }
    Ok(RiccatiForward {
        grid,
        gamma,
        propagators,
    })
}

/// Backward RK4 solution of
/// `phi' = -phi b b^T phi - a^T phi - phi a + c^T (sigma sigma^T)^{-1} c`,
/// `phi(t; t) = 0`, on nodes `0..=horizon`.
pub fn solve_phi(model: &LinearGaussianModel, horizon: usize) -> Result<RiccatiBackward> {
    let grid = *model.grid();
    if horizon > grid.n_steps() {
        return Err(Error::Contract(format!(
            "horizon node {horizon} beyond grid end {}",
            grid.n_steps()
        )));
    }
    let d = model.derived()?;
    let n = model.dim_x();
    let dt = grid.dt();
    let rhs = |k: usize, y: &DMatrix<f64>| {
        let a = model.a_half(k);
        -(y * &d.bbt[k] * y) - a.transpose() * y - y * a + &d.info[k]
    };
    let mut phi = vec![DMatrix::zeros(n, n); horizon + 1];
    let mut p = DMatrix::zeros(n, n);
    for i in (0..horizon).rev() {
        // Stages run from node i+1 back to node i.
        p = symmetrize(rk4(&p, -dt, |stage, y| rhs(2 * i + 2 - stage, y)));
        check_sign(&p, -1.0, i, "phi")?;
        phi[i] = p.clone();
    }
    let phi_mid = (0..horizon)
        .map(|i| {
            let (l, r) = (&phi[i], &phi[i + 1]);
            let (dl, dr) = (rhs(2 * i, l), rhs(2 * i + 2, r));
            symmetrize((l + r) * 0.5 + (dl - dr) * (dt / 8.0))
        })
        .collect();
    Ok(RiccatiBackward {
        grid,
        horizon,
        phi,
        phi_mid,
    })
}
