use super::aterm::TermPolynomial;
use super::closure::{derive_closure, TermSystem};
use super::combine::{combine, ExpansionResult};
use super::integrate::{CompiledSystem, Readout};
use super::jterms::{build_j_terms, JTerms};
use super::ExpansionLimits;
use crate::error::{Error, Result};
use crate::linear::{kalman_bucy_scalar, solve_gamma};
use crate::model::{PerturbedLinearModel, TimeGrid};

/// Expansion filter of a fixed order for one model and grid.
///
/// Symbolic work and the Riccati solution are done once; [`Self::run`] is
/// then a single pass over the observation increments.
#[derive(Debug, Clone)]
pub struct AsymptoticFilter {
    model: PerturbedLinearModel,
    grid: TimeGrid,
    jterms: JTerms,
    system: TermSystem,
    compiled: CompiledSystem,
    read_x: Vec<Readout>,
    read_one: Vec<Readout>,
    gamma: Vec<f64>,
}

impl AsymptoticFilter {
    pub fn new(
        model: &PerturbedLinearModel,
        grid: TimeGrid,
        order: usize,
        limits: &ExpansionLimits,
    ) -> Result<Self> {
        let jterms = build_j_terms(&model.g, order, limits)?;
        let system = derive_closure(jterms.all(), limits)?;
        let (a, c, sigma) = (model.a, model.c, model.sigma);
        let compiled = CompiledSystem::new(&system, a, c, sigma)?;
        let read = |polys: &[TermPolynomial]| -> Result<Vec<Readout>> {
            polys
                .iter()
                .map(|p| compiled.readout(&system, p, a, sigma))
                .collect()
        };
        let read_x = read(&jterms.x)?;
        let read_one = read(&jterms.one)?;
        let gamma = solve_gamma(&model.linear_part(grid)?)?.scalar();
        Ok(Self {
            model: model.clone(),
            grid,
            jterms,
            system,
            compiled,
            read_x,
            read_one,
            gamma,
        })
    }

    pub fn order(&self) -> usize {
        self.read_x.len() - 1
    }

    pub fn system(&self) -> &TermSystem {
        &self.system
    }

    pub fn jterms(&self) -> &JTerms {
        &self.jterms
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// Kalman-Bucy mean of the unperturbed model.
    pub fn linear_mean(&self, dy: &[f64]) -> Vec<f64> {
        let m = &self.model;
        kalman_bucy_scalar(
            m.a,
            m.c,
            m.sigma,
            self.grid.dt(),
            &self.gamma,
            m.x0_mean,
            dy,
        )
    }

    /// Raw coefficients `coeffs[i][node]` from observation increments.
    pub fn coefficients(&self, dy: &[f64]) -> Result<Vec<Vec<f64>>> {
        if dy.len() != self.grid.n_steps() {
            return Err(Error::Contract(format!(
                "expansion: {} increments for {} steps",
                dy.len(),
                self.grid.n_steps()
            )));
        }
        let mu = self.linear_mean(dy);
        let k = self.order();
        let mut coeffs = vec![Vec::with_capacity(self.grid.len()); k + 1];
        let mut jx = vec![0.0; k + 1];
        let mut jone = vec![0.0; k + 1];
        self.compiled
            .integrate_with(self.grid.dt(), &mu, &self.gamma, dy, |node, x| {
                let (m, g) = (mu[node], self.gamma[node]);
                for i in 0..=k {
                    jx[i] = self.read_x[i].eval(x, m, g);
                    jone[i] = self.read_one[i].eval(x, m, g);
                }
                for (i, v) in combine(&jx, &jone).into_iter().enumerate() {
                    coeffs[i].push(v);
                }
            })?;
        Ok(coeffs)
    }

    /// Filter output along the observation path `y` (node values).
    pub fn run(&self, y: &[f64], rs: &[f64]) -> Result<ExpansionResult> {
        self.grid.check_len("observation path", y.len())?;
        let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
        let coeffs = self.coefficients(&dy)?;
        Ok(ExpansionResult::new(
            self.grid,
            self.model.epsilon,
            coeffs,
            rs,
        ))
    }
}
