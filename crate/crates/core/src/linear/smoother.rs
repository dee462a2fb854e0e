use nalgebra::{DMatrix, DVector};

use super::filter::{closed_loop, innovations};
use super::FilterPath;
use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::model::{LinearGaussianModel, TimeGrid};

/// Smoothed means `mu_{s;t}` for `s = 0..=t` at a fixed horizon `t`, with the
/// kernel row `Cov(xi_{s;t}, xi_{t;t})`.
#[derive(Debug, Clone)]
pub struct SmootherState {
    pub grid: TimeGrid,
    pub horizon: usize,
    pub mu_s_t: Vec<DVector<f64>>,
    pub k_row: Vec<DMatrix<f64>>,
}

impl SmootherState {
    pub fn to_csv(&self) -> CsvTable {
        let d = self.mu_s_t[0].len();
        let mut header = vec!["s".to_string()];
        if d == 1 {
            header.push("mu_s_t".into());
        } else {
            header.extend((0..d).map(|j| format!("mu_s_t{j}")));
        }
        let mut t = CsvTable::new(&header);
        for (i, m) in self.mu_s_t.iter().enumerate() {
            let mut row = vec![self.grid.time(i)];
            row.extend(m.iter());
            t.push(&row);
        }
        t
    }
}

/// `t -> mu_{s;t}` for `t = s..=n_steps` at a fixed node `s`, with
/// `Cov(xi_{t;t}, xi_{s;t})` alongside.
#[derive(Debug, Clone)]
pub struct FixedPointPath {
    pub s: usize,
    pub mu: Vec<DVector<f64>>,
    pub cov: Vec<DMatrix<f64>>,
}

impl FixedPointPath {
    /// `mu_{s;t}` at horizon node `t >= s`.
    pub fn at(&self, t: usize) -> &DVector<f64> {
        &self.mu[t - self.s]
    }
}

fn check_node(model: &LinearGaussianModel, node: usize, what: &str) -> Result<()> {
    if node > model.grid().n_steps() {
        return Err(Error::Contract(format!(
            "{what} node {node} beyond grid end {}",
            model.grid().n_steps()
        )));
    }
    Ok(())
}

/// Fixed-interval smoother as a backward recursion over the filtered path.
///
/// With `nu_s = mu_{s;t} - mu_s`, the filter step remainder
/// `delta_s = mu_{s+1} - mu_s - a_s mu_s dt` and
/// `F_s = I + (a_s - gamma_s c^T (sigma sigma^T)^{-1} c) dt`:
///
/// ```text
/// nu_{t-1} = delta_{t-1}
/// nu_s     = delta_s + gamma_s [gamma_{s+1}^{-1} delta_{s+1}
///                               + F_{s+1}^T gamma_{s+1}^{-1} (nu_{s+1} - delta_{s+1})]
/// ```
///
/// As `dt -> 0` this is `dmu_{s;t}/ds = a mu_{s;t} + b b^T gamma^{-1} (mu_{s;t} - mu_{s;s})`;
/// on the grid it reproduces [`fixed_point_smoother`] to rounding error.
pub fn rts_smooth(
    model: &LinearGaussianModel,
    filter: &FilterPath,
    horizon: usize,
) -> Result<SmootherState> {
    check_node(model, horizon, "horizon")?;
    let f = closed_loop(model, &filter.gamma)?;
    let dt = model.grid().dt();
    let n = model.dim_x();
    let gamma = &filter.gamma.gamma;
    let mu = &filter.mu;
    let delta = |s: usize| &mu[s + 1] - &mu[s] - model.a(s) * &mu[s] * dt;
    let mut mu_s_t = vec![DVector::zeros(n); horizon + 1];
    let mut k_row = vec![DMatrix::zeros(n, n); horizon + 1];
    mu_s_t[horizon] = mu[horizon].clone();
    k_row[horizon] = gamma[horizon].clone();
    if horizon == 0 {
        return Ok(SmootherState {
            grid: *model.grid(),
            horizon,
            mu_s_t,
            k_row,
        });
    }
    let mut nu = delta(horizon - 1);
    mu_s_t[horizon - 1] = &mu[horizon - 1] + &nu;
    k_row[horizon - 1] = gamma[horizon - 1].clone();
    let mut prop = f[horizon - 1].clone();
    for s in (0..horizon - 1).rev() {
        let chol = gamma[s + 1]
            .clone()
            .cholesky()
            .ok_or(Error::Singular { node: s + 1 })?;
        let d1 = delta(s + 1);
        let x = chol.solve(&d1);
        let z = chol.solve(&(&nu - &d1));
        nu = delta(s) + &gamma[s] * (x + f[s + 1].transpose() * z);
        mu_s_t[s] = &mu[s] + &nu;
        k_row[s] = (&prop * &gamma[s]).transpose();
        prop = prop * &f[s];
    }
    Ok(SmootherState {
        grid: *model.grid(),
        horizon,
        mu_s_t,
        k_row,
    })
}

/// Evolves `mu_{s;t}` forward in `t` from `mu_{s;s}`:
///
/// ```text
/// mu_{s;t+1} = mu_{s;t} + Cov(xi_{t;t}, xi_{s;t})^T e_t
/// Cov(xi_{t+1;t+1}, xi_{s;t+1}) = F_t Cov(xi_{t;t}, xi_{s;t})   (t > s)
/// ```
///
/// with the weighted innovation `e_t`; the covariance starts from `gamma(s)`
/// and is held one step before the closed-loop transition applies.
pub fn fixed_point_smoother(
    model: &LinearGaussianModel,
    filter: &FilterPath,
    y: &[f64],
    s_node: usize,
) -> Result<FixedPointPath> {
    check_node(model, s_node, "smoothing")?;
    let e = innovations(model, filter, y)?;
    let f = closed_loop(model, &filter.gamma)?;
    let n_steps = model.grid().n_steps();
    let mut m = filter.mu[s_node].clone();
    let mut l = filter.gamma.gamma[s_node].clone();
    let mut mu = vec![m.clone()];
    let mut cov = vec![l.clone()];
    for t in s_node..n_steps {
        m += l.transpose() * &e[t];
        if t > s_node {
            l = &f[t] * l;
        }
        mu.push(m.clone());
        cov.push(l.clone());
    }
    Ok(FixedPointPath { s: s_node, mu, cov })
}

#[cfg(test)]
mod tests {
    use super::super::{kalman_bucy, solve_gamma};
    use super::*;
    use crate::sde::{simulate_linear, NoiseSeed};

    fn setup(b: f64, c: f64, v0: f64) -> (LinearGaussianModel, FilterPath, Vec<f64>) {
        let g = TimeGrid::on_interval(2.0, 0.01).unwrap();
        let m = LinearGaussianModel::scalar(g, -0.4, b, c, 0.3, 0.5, v0).unwrap();
        let p = simulate_linear(&m, &g, NoiseSeed::new(8, 0)).unwrap();
        let f = kalman_bucy(&m, &solve_gamma(&m).unwrap(), &p.y).unwrap();
        (m, f, p.y)
    }

    #[test]
    fn rts_matches_fixed_point_everywhere() {
        let (m, f, y) = setup(0.5, 1.0, 1e-8);
        let fps: Vec<_> = (0..=200)
            .map(|s| fixed_point_smoother(&m, &f, &y, s).unwrap())
            .collect();
        for t in (0..=200).step_by(7) {
            let r = rts_smooth(&m, &f, t).unwrap();
            for s in 0..=t {
                let (u, v) = (r.mu_s_t[s][0], fps[s].at(t)[0]);
                assert!(
                    (u - v).abs() <= 1e-9 * u.abs().max(1.0),
                    "s={s} t={t}: {u} vs {v}"
                );
                assert!((r.k_row[s][(0, 0)] - fps[s].cov[t - s][(0, 0)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn boundary_is_filter_value() {
        let (m, f, _) = setup(0.5, 1.0, 0.0);
        let r = rts_smooth(&m, &f, 150).unwrap();
        assert_eq!(r.mu_s_t[150], f.mu[150]);
    }

    #[test]
    fn noiseless_signal_runs_backwards_exponentially() {
        let (m, f, _) = setup(0.0, 1.0, 0.2);
        let t = 200;
        let r = rts_smooth(&m, &f, t).unwrap();
        for s in 0..=t {
            let exact = (0.4 * (t - s) as f64 * 0.01).exp() * f.mu[t][0];
            assert!((r.mu_s_t[s][0] - exact).abs() < 0.02 * exact.abs().max(0.1));
        }
    }

    #[test]
    fn zero_gain_keeps_fixed_point_constant() {
        let (m, f, y) = setup(0.5, 0.0, 0.2);
        let fp = fixed_point_smoother(&m, &f, &y, 40).unwrap();
        assert!(fp.mu.iter().all(|v| v[0] == fp.mu[0][0]));
    }

    #[test]
    fn singular_gamma_is_reported() {
        let (m, f, _) = setup(0.0, 1.0, 0.0);
        let err = rts_smooth(&m, &f, 10).unwrap_err();
        assert!(matches!(err, Error::Singular { node: 9 }));
    }

    #[test]
    fn csv_layout() {
        let (m, f, _) = setup(0.5, 1.0, 0.1);
        let r = rts_smooth(&m, &f, 3).unwrap();
        let csv = r.to_csv();
        assert!(csv.as_str().starts_with("s,mu_s_t\n"));
        assert_eq!(csv.as_str().lines().count(), 5);
    }
}
