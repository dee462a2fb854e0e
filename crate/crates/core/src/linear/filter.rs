use nalgebra::{DMatrix, DVector};

use super::RiccatiForward;
use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::model::{LinearGaussianModel, TimeGrid};

/// Filtered mean `mu_{t;t}` and covariance `gamma(t)` at every node.
#[derive(Debug, Clone)]
pub struct FilterPath {
    pub grid: TimeGrid,
    pub mu: Vec<DVector<f64>>,
    pub gamma: RiccatiForward,
}

impl FilterPath {
    pub fn mu_scalar(&self) -> Vec<f64> {
        self.mu.iter().map(|m| m[0]).collect()
    }

    pub fn to_csv(&self) -> CsvTable {
        let d = self.mu[0].len();
        let mut header = vec!["t".to_string()];
        if d == 1 {
            header.extend(["mu".to_string(), "gamma".to_string()]);
        } else {
            header.extend((0..d).map(|j| format!("mu{j}")));
            for j in 0..d {
                header.extend((0..d).map(|k| format!("gamma{j}{k}")));
            }
        }
        let mut t = CsvTable::new(&header);
        for (i, (m, g)) in self.mu.iter().zip(&self.gamma.gamma).enumerate() {
            let mut row = vec![self.grid.time(i)];
            row.extend(m.iter());
            row.extend(g.transpose().iter());
            t.push(&row);
        }
        t
    }
}

pub(crate) fn check_obs(model: &LinearGaussianModel, y: &[f64]) -> Result<()> {
    let want = model.grid().len() * model.dim_y();
    if y.len() != want {
        return Err(Error::Contract(format!(
            "observation path has {} values, grid needs {want}",
            y.len()
        )));
    }
    Ok(())
}

pub(crate) fn dy(model: &LinearGaussianModel, y: &[f64], k: usize) -> DVector<f64> {
    let d = model.dim_y();
    DVector::from_fn(d, |j, _| y[(k + 1) * d + j] - y[k * d + j])
}

/// Euler solution of `dm = a m dt`, `m_0 = x0_mean`: the prior mean `E[X_t]`.
pub fn prior_mean(model: &LinearGaussianModel) -> Vec<DVector<f64>> {
    let dt = model.grid().dt();
    let mut m = model.x0_mean().clone();
    let mut out = Vec::with_capacity(model.grid().len());
    out.push(m.clone());
    for k in 0..model.grid().n_steps() {
        m = &m + model.a(k) * &m * dt;
        out.push(m.clone());
    }
    out
}

/// Euler-Maruyama Kalman-Bucy filter
/// `dmu = a mu dt + gamma c^T (sigma sigma^T)^{-1} (dY - c mu dt)`.
/// `y` holds the observation path node-major.
pub fn kalman_bucy(
    model: &LinearGaussianModel,
    gamma: &RiccatiForward,
    y: &[f64],
) -> Result<FilterPath> {
    check_obs(model, y)?;
    if gamma.grid != *model.grid() {
        return Err(Error::Contract(
            "Riccati solution is on another grid".into(),
        ));
    }
    let d = model.derived()?;
    let grid = *model.grid();
    let dt = grid.dt();
    let mut mu = Vec::with_capacity(grid.len());
    let mut m = model.x0_mean().clone();
    mu.push(m.clone());
    for k in 0..grid.n_steps() {
        let innov = dy(model, y, k) - model.c(k) * &m * dt;
        let gain = &gamma.gamma[k] * &d.ct_rinv[2 * k];
        m = &m + model.a(k) * &m * dt + gain * innov;
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                module: "linear",
                node: k + 1,
                detail: "filter mean is not finite".into(),
            });
        }
        mu.push(m.clone());
    }
    Ok(FilterPath {
        grid,
        mu,
        gamma: gamma.clone(),
    })
}

/// Scalar constant-coefficient Kalman-Bucy filter on observation increments.
pub fn kalman_bucy_scalar(
    a: f64,
    c: f64,
    sigma: f64,
    dt: f64,
    gamma: &[f64],
    mu0: f64,
    dy: &[f64],
) -> Vec<f64> {
    let k = c / (sigma * sigma);
    let mut out = Vec::with_capacity(dy.len() + 1);
    let mut m = mu0;
    out.push(m);
    for (i, &d) in dy.iter().enumerate() {
        m += a * m * dt + gamma[i] * k * (d - c * m * dt);
        out.push(m);
    }
    out
}

/// Weighted innovations `e_k = c^T (sigma sigma^T)^{-1} (dY_k - c mu_k dt)`.
pub fn innovations(
    model: &LinearGaussianModel,
    filter: &FilterPath,
    y: &[f64],
) -> Result<Vec<DVector<f64>>> {
    check_obs(model, y)?;
    let d = model.derived()?;
    let dt = model.grid().dt();
    Ok((0..model.grid().n_steps())
        .map(|k| &d.ct_rinv[2 * k] * (dy(model, y, k) - model.c(k) * &filter.mu[k] * dt))
        .collect())
}

/// Prior-centred weighted increments
/// `h_k = c^T (sigma sigma^T)^{-1} (dY_k - c E[X_k] dt)`.
pub fn centered_increments(
    model: &LinearGaussianModel,
    prior: &[DVector<f64>],
    y: &[f64],
) -> Result<Vec<DVector<f64>>> {
    check_obs(model, y)?;
    let d = model.derived()?;
    let dt = model.grid().dt();
    Ok((0..model.grid().n_steps())
        .map(|k| &d.ct_rinv[2 * k] * (dy(model, y, k) - model.c(k) * &prior[k] * dt))
        .collect())
}

/// Closed-loop transition `F_k = I + (a_k - gamma_k c^T (sigma sigma^T)^{-1} c) dt`.
pub(crate) fn closed_loop(
    model: &LinearGaussianModel,
    gamma: &RiccatiForward,
) -> Result<Vec<DMatrix<f64>>> {
    let d = model.derived()?;
    let n = model.dim_x();
    let dt = model.grid().dt();
    Ok((0..model.grid().n_steps())
        .map(|k| DMatrix::identity(n, n) + (model.a(k) - &gamma.gamma[k] * &d.info[2 * k]) * dt)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::super::solve_gamma;
    use super::*;
    use crate::sde::{simulate_linear, NoiseSeed};

    fn grid() -> TimeGrid {
        TimeGrid::on_interval(5.0, 0.01).unwrap()
    }

    #[test]
    fn no_observation_keeps_zero_mean() {
        let g = grid();
        let m = LinearGaussianModel::scalar(g, -0.4, 0.5, 0.0, 0.3, 0.0, 0.2).unwrap();
        let p = simulate_linear(&m, &g, NoiseSeed::new(1, 0)).unwrap();
        let f = kalman_bucy(&m, &solve_gamma(&m).unwrap(), &p.y).unwrap();
        assert!(f.mu.iter().all(|v| v[0] == 0.0));
    }

    #[test]
    fn large_noise_returns_prior_mean() {
        let g = grid();
        let a = -0.4;
        let m = LinearGaussianModel::scalar(g, a, 0.5, 1.0, 1e3, 1.0, 0.5).unwrap();
        let p = simulate_linear(&m, &g, NoiseSeed::new(2, 0)).unwrap();
        let f = kalman_bucy(&m, &solve_gamma(&m).unwrap(), &p.y).unwrap();
        let dev =
            f.mu.iter()
                .enumerate()
                .map(|(i, v)| (v[0] - (a * g.time(i)).exp()).abs())
                .fold(0.0, f64::max);
        assert!(dev < 1e-2, "deviation {dev}");
    }

    #[test]
    fn scalar_fast_path_agrees() {
        let g = grid();
        let m = LinearGaussianModel::scalar(g, -0.4, 0.5, 1.0, 0.3, 0.3, 0.1).unwrap();
        let p = simulate_linear(&m, &g, NoiseSeed::new(3, 0)).unwrap();
        let r = solve_gamma(&m).unwrap();
        let f = kalman_bucy(&m, &r, &p.y).unwrap();
        let fast = kalman_bucy_scalar(-0.4, 1.0, 0.3, 0.01, &r.scalar(), 0.3, &p.dy());
        for (u, v) in f.mu_scalar().iter().zip(&fast) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_length_is_contract_error() {
        let g = grid();
        let m = LinearGaussianModel::scalar(g, -0.4, 0.5, 1.0, 0.3, 0.0, 0.0).unwrap();
        let r = solve_gamma(&m).unwrap();
        assert!(matches!(
            kalman_bucy(&m, &r, &[0.0; 3]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn csv_layout() {
        let g = TimeGrid::new(0.0, 0.1, 3).unwrap();
        let m = LinearGaussianModel::scalar(g, -0.4, 0.5, 1.0, 0.3, 0.0, 0.0).unwrap();
        let f = kalman_bucy(&m, &solve_gamma(&m).unwrap(), &[0.0; 4]).unwrap();
        assert!(f.to_csv().as_str().starts_with("t,mu,gamma\n"));
    }
}
