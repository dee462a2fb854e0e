use super::aterm::ATerm;
use super::integrate::scalar_constants;
use crate::error::{Error, Result};
use crate::linear::{kalman_bucy_scalar, solve_gamma};
use crate::model::LinearGaussianModel;

pub const ORACLE_NODE_CAP: usize = 4096;

/// Direct evaluation of A-terms by left-endpoint sums on the grid.
///
/// The smoothed means `mu_{s;t}`, the filter cross-covariances
/// `gamma(s,t;t)` and the kernel `gamma(s,u;t)` are carried forward in `t`
/// for every `s, u <= t`; each term is then summed over
/// `j_1 < .. < j_n < t`. Returns one path per term.
pub fn quadrature_oracle(
    terms: &[ATerm],
    model: &LinearGaussianModel,
    y: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let (a, c, sigma) = scalar_constants(model)?;
    let grid = model.grid();
    grid.check_len("observation path", y.len())?;
    if grid.len() > ORACLE_NODE_CAP {
        return Err(Error::CapExceeded {
            what: "oracle nodes",
            value: grid.len(),
            cap: ORACLE_NODE_CAP,
        });
    }
    let n = grid.n_steps();
    let dt = grid.dt();
    let info = c * c / (sigma * sigma);
    let gain = c / (sigma * sigma);
    let gamma = solve_gamma(model)?.scalar();
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let mu = kalman_bucy_scalar(a, c, sigma, dt, &gamma, model.x0_mean()[0], &dy);
    let full = terms.iter().any(|t| t.depth() > 1);

    let mut smoothed = vec![mu[0]];
    let mut lag = vec![gamma[0]];
    let mut kdiag = vec![gamma[0]];
    let mut kfull: Vec<Vec<f64>> = if full {
        vec![vec![gamma[0]]]
    } else {
        Vec::new()
    };
    let mut out = vec![vec![0.0; n + 1]; terms.len()];
    for t in 0..=n {
        let state = Snapshot {
            smoothed: &smoothed,
            lag: &lag,
            kdiag: &kdiag,
            kfull: &kfull,
            dy: &dy,
            c,
            dt,
        };
        for (k, term) in terms.iter().enumerate() {
            let outer = mu[t].powi(term.outer()[0] as i32) * gamma[t].powi(term.outer()[1] as i32);
            out[k][t] = outer * state.eval(&term.core(), t);
        }
        if t == n {
            break;
        }
        let e = dy[t] - c * mu[t] * dt;
        let f = 1.0 + (a - gamma[t] * info) * dt;
        for s in 0..=t {
            smoothed[s] += lag[s] * gain * e;
            kdiag[s] -= lag[s] * lag[s] * info * dt;
        }
        if full {
            for s in 0..=t {
                for u in 0..=s {
                    kfull[s][u] -= lag[s] * lag[u] * info * dt;
                }
            }
        }
        for l in lag.iter_mut().take(t) {
            *l *= f;
        }
        smoothed.push(mu[t + 1]);
        lag.push(gamma[t + 1]);
        kdiag.push(gamma[t + 1]);
        if full {
            let row = lag.clone();
            kfull.push(row);
        }
    }
    Ok(out)
}

struct Snapshot<'a> {
    smoothed: &'a [f64],
    lag: &'a [f64],
    kdiag: &'a [f64],
    /// Lower triangle, `kfull[s][u]` for `u <= s`.
    kfull: &'a [Vec<f64>],
    dy: &'a [f64],
    c: f64,
    dt: f64,
}

impl Snapshot<'_> {
    fn kernel(&self, s: usize, u: usize) -> f64 {
        if s == u {
            self.kdiag[s]
        } else if s > u {
            self.kfull[s][u]
        } else {
            self.kfull[u][s]
        }
    }

    fn level(&self, term: &ATerm, i: usize, j: usize) -> f64 {
        let m = self.smoothed[j];
        let measure = if term.alpha()[i] == 1 {
            self.dy[j] - self.c * m * self.dt
        } else {
            self.dt
        };
        m.powi(term.p()[i] as i32)
            * self.lag[j].powi(term.q()[i] as i32)
            * self.kdiag[j].powi(term.r(i, i) as i32)
            * measure
    }

    fn eval(&self, term: &ATerm, t: usize) -> f64 {
        if term.depth() == 0 {
            return 1.0;
        }
        let mut idx = Vec::with_capacity(term.depth());
        self.nested(term, 0, 0, t, &mut idx)
    }

    fn nested(&self, term: &ATerm, i: usize, from: usize, t: usize, idx: &mut Vec<usize>) -> f64 {
        let n = term.depth();
        let mut acc = 0.0;
        for j in from..t.saturating_sub(n - 1 - i) {
            let mut f = self.level(term, i, j);
            for (l, &jl) in idx.iter().enumerate() {
                let r = term.r(l, i);
                if r > 0 {
                    f *= self.kernel(jl, j).powi(r as i32);
                }
            }
            if f == 0.0 {
                continue;
            }
            if i + 1 == n {
                acc += f;
            } else {
                idx.push(j);
                acc += f * self.nested(term, i + 1, j + 1, t, idx);
                idx.pop();
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TimeGrid;

    #[test]
    fn time_integral() {
        let grid = TimeGrid::on_interval(1.0, 0.01).unwrap();
        let model = LinearGaussianModel::scalar(grid, -0.4, 0.5, 1.0, 0.3, 0.0, 0.0).unwrap();
        let y = vec![0.0; grid.len()];
        let v = quadrature_oracle(&[ATerm::single(0, 0, 0, 0)], &model, &y).unwrap();
        for (i, x) in v[0].iter().enumerate() {
            assert!((x - grid.time(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn double_time_integral() {
        let grid = TimeGrid::on_interval(1.0, 0.01).unwrap();
        let model = LinearGaussianModel::scalar(grid, -0.4, 0.5, 1.0, 0.3, 0.0, 0.0).unwrap();
        let y = vec![0.0; grid.len()];
        let t = ATerm::new(vec![0, 0], vec![0, 0], vec![0, 0, 0], vec![0, 0]).unwrap();
        let v = quadrature_oracle(&[t], &model, &y).unwrap();
        // strictly ordered pairs: k (k - 1) / 2 cells of area dt^2
        let k = grid.n_steps() as f64;
        assert!((v[0][grid.n_steps()] - k * (k - 1.0) / 2.0 * 1e-4).abs() < 1e-12);
    }

    #[test]
    fn smoothed_mean_matches_fixed_point_smoother() {
        use crate::linear::{fixed_point_smoother, kalman_bucy, solve_gamma};
        let grid = TimeGrid::on_interval(1.0, 0.01).unwrap();
        let model = LinearGaussianModel::scalar(grid, -0.4, 0.5, 1.0, 0.3, 0.2, 0.1).unwrap();
        let y: Vec<f64> = (0..grid.len())
            .map(|i| (i as f64 * 0.05).sin() * 0.3)
            .collect();
        // A(1,0,0,0;1) at t is the dt-sum of mu_{s;t}
        let v = quadrature_oracle(&[ATerm::single(1, 0, 0, 0)], &model, &y).unwrap();
        let g = solve_gamma(&model).unwrap();
        let f = kalman_bucy(&model, &g, &y).unwrap();
        let t = grid.n_steps();
        let mut want = 0.0;
        for s in 0..t {
            let fp = fixed_point_smoother(&model, &f, &y, s).unwrap();
            want += fp.at(t)[0] * grid.dt();
        }
        assert!((v[0][t] - want).abs() < 1e-10, "{} vs {want}", v[0][t]);
    }

    #[test]
    fn node_cap() {
        let grid = TimeGrid::on_interval(1.0, 1e-4).unwrap();
        let model = LinearGaussianModel::scalar(grid, -0.4, 0.5, 1.0, 0.3, 0.0, 0.0).unwrap();
        let y = vec![0.0; grid.len()];
        let err = quadrature_oracle(&[ATerm::single(0, 0, 0, 0)], &model, &y).unwrap_err();
        assert!(matches!(err, Error::CapExceeded { .. }));
    }
}
