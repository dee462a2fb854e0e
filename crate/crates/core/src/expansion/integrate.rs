use super::aterm::TermPolynomial;
use super::closure::TermSystem;
use crate::error::{Error, Result};
use crate::linear::{kalman_bucy_scalar, solve_gamma};
use crate::model::LinearGaussianModel;

#[derive(Debug, Clone, Copy)]
struct Entry {
    /// State index; `usize::MAX` for the constant 1.
    src: usize,
    mu: u8,
    gamma: u8,
    w: f64,
}

/// A linear combination of states with numeric coefficients.
#[derive(Debug, Clone)]
pub struct Readout {
    entries: Vec<Entry>,
}

/// [`TermSystem`] with coefficients evaluated for one model.
#[derive(Debug, Clone)]
pub struct CompiledSystem {
    n: usize,
    c: f64,
    sigma2: f64,
    drift: Vec<Entry>,
    drift_start: Vec<usize>,
    quad: Vec<Entry>,
    quad_start: Vec<usize>,
    diff: Vec<Entry>,
    diff_start: Vec<usize>,
    max_mu: usize,
    max_gamma: usize,
    realized: bool,
}

/// State values at every grid node, node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TermValues {
    pub n_states: usize,
    pub values: Vec<f64>,
}

impl TermValues {
    pub fn at(&self, node: usize) -> &[f64] {
        &self.values[node * self.n_states..(node + 1) * self.n_states]
    }

    pub fn state(&self, node: usize, i: usize) -> f64 {
        self.values[node * self.n_states + i]
    }
}

fn compile(
    sys: &TermSystem,
    poly: &TermPolynomial,
    a: f64,
    c: f64,
    sigma: f64,
) -> Result<Vec<Entry>> {
    poly.iter()
        .map(|(t, coef)| {
            let core = t.core();
            let src = if core.depth() == 0 {
                usize::MAX
            } else {
                sys.index_of(&core).ok_or_else(|| {
                    Error::Contract(format!("term {core} is not a state of the system"))
                })?
            };
            Ok(Entry {
                src,
                mu: t.outer()[0],
                gamma: t.outer()[1],
                w: coef.eval(a, c, sigma),
            })
        })
        .collect()
}

struct Powers {
    mu: Vec<f64>,
    gamma: Vec<f64>,
}

impl Powers {
    fn new(max_mu: usize, max_gamma: usize) -> Self {
        Self {
            mu: vec![1.0; max_mu + 1],
            gamma: vec![1.0; max_gamma + 1],
        }
    }

    fn set(&mut self, mu: f64, gamma: f64) {
        for k in 1..self.mu.len() {
            self.mu[k] = self.mu[k - 1] * mu;
        }
        for k in 1..self.gamma.len() {
            self.gamma[k] = self.gamma[k - 1] * gamma;
        }
    }
}

#[inline]
fn sum(entries: &[Entry], x: &[f64], pw: &Powers) -> f64 {
    entries
        .iter()
        .map(|e| {
            let v = if e.src == usize::MAX { 1.0 } else { x[e.src] };
            e.w * pw.mu[e.mu as usize] * pw.gamma[e.gamma as usize] * v
        })
        .sum()
}

impl CompiledSystem {
    pub fn new(sys: &TermSystem, a: f64, c: f64, sigma: f64) -> Result<Self> {
        let mut out = CompiledSystem {
            n: sys.len(),
            c,
            sigma2: sigma * sigma,
            drift: Vec::new(),
            drift_start: vec![0],
            quad: Vec::new(),
            quad_start: vec![0],
            diff: Vec::new(),
            diff_start: vec![0],
            max_mu: 0,
            max_gamma: 0,
            realized: true,
        };
        for i in 0..sys.len() {
            let mut regular = sys.drift[i].clone();
            regular.add_poly(&sys.quadratic[i].scaled(-1.0));
            out.drift.extend(compile(sys, &regular, a, c, sigma)?);
            out.drift_start.push(out.drift.len());
            out.quad
                .extend(compile(sys, &sys.quadratic[i], a, c, sigma)?);
            out.quad_start.push(out.quad.len());
            out.diff
                .extend(compile(sys, &sys.diffusion[i], a, c, sigma)?);
            out.diff_start.push(out.diff.len());
        }
        for e in out.drift.iter().chain(&out.diff).chain(&out.quad) {
            out.max_mu = out.max_mu.max(e.mu as usize);
            out.max_gamma = out.max_gamma.max(e.gamma as usize);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Total number of nonzero drift and diffusion coefficients.
    pub fn nnz(&self) -> usize {
        self.drift.len() + self.diff.len() + self.quad.len()
    }

    /// Chooses between the realized `(dl_k)^2` (default) and its expectation
    /// `sigma^2 dt` for the quadratic-variation part of the drift. The
    /// realized form reproduces grid sums of the integrals to `O(dt)` path by
    /// path; the expected form only in mean square at rate `sqrt(dt)`.
    pub fn with_realized_variation(mut self, on: bool) -> Self {
        self.realized = on;
        self
    }

    pub fn readout(
        &self,
        sys: &TermSystem,
        poly: &TermPolynomial,
        a: f64,
        sigma: f64,
    ) -> Result<Readout> {
        Ok(Readout {
            entries: compile(sys, poly, a, self.c, sigma)?,
        })
    }

    /// Euler-Maruyama from zero initial values, calling `visit(node, states)`
    /// at every node.
    pub fn integrate_with(
        &self,
        dt: f64,
        mu: &[f64],
        gamma: &[f64],
        dy: &[f64],
        mut visit: impl FnMut(usize, &[f64]),
    ) -> Result<()> {
        let steps = dy.len();
        if mu.len() != steps + 1 || gamma.len() < steps + 1 {
            return Err(Error::Contract(format!(
                "integrate_closure: {} increments, {} means, {} variances",
                steps,
                mu.len(),
                gamma.len()
            )));
        }
        let mut x = vec![0.0; self.n];
        let mut next = vec![0.0; self.n];
        let mut pw = Powers::new(self.max_mu, self.max_gamma);
        visit(0, &x);
        for k in 0..steps {
            pw.set(mu[k], gamma[k]);
            let dl = dy[k] - self.c * mu[k] * dt;
            let qv = if self.realized {
                dl * dl / self.sigma2
            } else {
                dt
            };
            for i in 0..self.n {
                let d = sum(
                    &self.drift[self.drift_start[i]..self.drift_start[i + 1]],
                    &x,
                    &pw,
                );
                let q = sum(
                    &self.quad[self.quad_start[i]..self.quad_start[i + 1]],
                    &x,
                    &pw,
                );
                let g = sum(
                    &self.diff[self.diff_start[i]..self.diff_start[i + 1]],
                    &x,
                    &pw,
                );
                next[i] = x[i] + d * dt + q * qv + g * dl;
            }
            if let Some(bad) = next.iter().position(|v| !v.is_finite()) {
                return Err(Error::Integration {
                    module: "expansion",
                    node: k + 1,
                    detail: format!("state {bad} is not finite"),
                });
            }
            std::mem::swap(&mut x, &mut next);
            visit(k + 1, &x);
        }
        Ok(())
    }

    pub fn integrate(&self, dt: f64, mu: &[f64], gamma: &[f64], dy: &[f64]) -> Result<TermValues> {
        let mut values = Vec::with_capacity(self.n * (dy.len() + 1));
        self.integrate_with(dt, mu, gamma, dy, |_, x| values.extend_from_slice(x))?;
        Ok(TermValues {
            n_states: self.n,
            values,
        })
    }
}

impl Readout {
    pub fn eval(&self, states: &[f64], mu: f64, gamma: f64) -> f64 {
        self.entries
            .iter()
            .map(|e| {
                let v = if e.src == usize::MAX {
                    1.0
                } else {
                    states[e.src]
                };
                e.w * mu.powi(e.mu as i32) * gamma.powi(e.gamma as i32) * v
            })
            .sum()
    }
}

/// Scalar constant coefficients `(a, c, sigma)` of a model, if it has them.
pub(crate) fn scalar_constants(model: &LinearGaussianModel) -> Result<(f64, f64, f64)> {
    if model.dim_x() != 1 || model.dim_y() != 1 {
        return Err(Error::Contract("expansion requires a scalar model".into()));
    }
    let at = |i| {
        (
            model.a(i)[(0, 0)],
            model.c(i)[(0, 0)],
            model.sigma(i)[(0, 0)],
            model.b(i)[(0, 0)],
        )
    };
    let first = at(0);
    if (1..model.grid().len()).any(|i| at(i) != first) {
        return Err(Error::Contract(
            "expansion requires constant coefficients".into(),
        ));
    }
    Ok((first.0, first.1, first.2))
}

/// Joint Euler-Maruyama of all states along the observation path `y`,
/// driven by `dt` and `dY - c mu_{t;t} dt` with the Kalman-Bucy mean.
pub fn integrate_closure(
    sys: &TermSystem,
    model: &LinearGaussianModel,
    y: &[f64],
) -> Result<TermValues> {
    let (a, c, sigma) = scalar_constants(model)?;
    let grid = model.grid();
    grid.check_len("observation path", y.len())?;
    let gamma = solve_gamma(model)?.scalar();
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let mu = kalman_bucy_scalar(a, c, sigma, grid.dt(), &gamma, model.x0_mean()[0], &dy);
    CompiledSystem::new(sys, a, c, sigma)?.integrate(grid.dt(), &mu, &gamma, &dy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::{derive_closure, quadrature_oracle, ATerm, Coef, ExpansionLimits};
    use crate::model::TimeGrid;

    fn seed(t: ATerm) -> TermPolynomial {
        let mut p = TermPolynomial::new();
        p.add(t, &Coef::constant(1.0));
        p
    }

    #[test]
    fn decoupled_when_unobserved() {
        let grid = TimeGrid::on_interval(2.0, 0.01).unwrap();
        let model = LinearGaussianModel::scalar(grid, -0.4, 0.5, 0.0, 0.3, 0.0, 0.0).unwrap();
        let sys = derive_closure(
            [&seed(ATerm::single(1, 0, 0, 1))],
            &ExpansionLimits::default(),
        )
        .unwrap();
        let y = vec![0.0; grid.len()];
        let v = integrate_closure(&sys, &model, &y).unwrap();
        let gamma = solve_gamma(&model).unwrap().scalar();
        let i0200 = sys.index_of(&ATerm::single(0, 2, 0, 0)).unwrap();
        let mut want = 0.0;
        for k in 0..grid.n_steps() {
            for i in 0..sys.len() {
                if i != i0200 {
                    assert_eq!(v.state(k + 1, i), 0.0);
                }
            }
            want += (2.0 * -0.4 * want + gamma[k] * gamma[k]) * grid.dt();
            assert!((v.state(k + 1, i0200) - want).abs() < 1e-15);
        }
        assert!(want > 0.0);
    }

    #[test]
    fn deterministic() {
        let grid = TimeGrid::on_interval(1.0, 0.01).unwrap();
        let model = LinearGaussianModel::scalar(grid, -0.4, 0.5, 1.0, 0.3, 0.0, 0.0).unwrap();
        let sys = derive_closure(
            [&seed(ATerm::single(1, 0, 0, 1))],
            &ExpansionLimits::default(),
        )
        .unwrap();
        let y: Vec<f64> = (0..grid.len())
            .map(|i| (i as f64 * 0.37).sin() * 0.1)
            .collect();
        let a = integrate_closure(&sys, &model, &y).unwrap();
        let b = integrate_closure(&sys, &model, &y).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_short_path() {
        let grid = TimeGrid::on_interval(1.0, 0.1).unwrap();
        let lin = crate::model::PerturbedLinearModel::cubic_sensor(0.1)
            .linear_part(grid)
            .unwrap();
        let sys = derive_closure(
            [&seed(ATerm::single(0, 0, 0, 0))],
            &ExpansionLimits::default(),
        )
        .unwrap();
        assert!(integrate_closure(&sys, &lin, &[0.0; 3]).is_err());
    }

    fn oracle_gap(dt: f64, y: &[f64]) -> f64 {
        let grid = TimeGrid::on_interval(4.0, dt).unwrap();
        let model = LinearGaussianModel::scalar(grid, -0.4, 0.5, 1.0, 0.3, 0.0, 0.0).unwrap();
        let sys = derive_closure(
            [&seed(ATerm::single(1, 0, 0, 1))],
            &ExpansionLimits::default(),
        )
        .unwrap();
        let got = integrate_closure(&sys, &model, y).unwrap();
        let want = quadrature_oracle(&sys.states, &model, y).unwrap();
        let mut worst: f64 = 0.0;
        for (i, w) in want.iter().enumerate() {
            let scale = w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            for (k, v) in w.iter().enumerate() {
                worst = worst.max((got.state(k, i) - v).abs() / scale);
            }
        }
        worst
    }

    #[test]
    fn first_order_agreement_with_quadrature() {
        use crate::model::PerturbedLinearModel;
        use crate::sde::{simulate_perturbed, NoiseSeed};
        let fine = TimeGrid::on_interval(4.0, 0.005).unwrap();
        let path = simulate_perturbed(
            &PerturbedLinearModel::cubic_sensor(0.0),
            &fine,
            NoiseSeed::new(3, 0),
        )
        .unwrap();
        let coarse: Vec<f64> = path.y.iter().step_by(2).cloned().collect();
        let (e_coarse, e_fine) = (oracle_gap(0.01, &coarse), oracle_gap(0.005, &path.y));
        assert!(e_fine < 10.0 * 0.005, "{e_fine}");
        assert!(e_coarse / e_fine > 1.4, "{e_coarse} {e_fine}");
    }
}
