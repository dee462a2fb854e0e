use super::{LinearGaussianModel, PolySpec, TimeGrid};
use crate::error::{Error, Result};

/// Scalar model `dX = aX dt + b dV`, `dY = (cX + eps g(X)) dt + sigma dW`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedLinearModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub g: PolySpec,
    pub x0_mean: f64,
    pub x0_var: f64,
}

impl PerturbedLinearModel {
    pub fn new(a: f64, b: f64, c: f64, sigma: f64, epsilon: f64, g: PolySpec) -> Result<Self> {
        let m = Self {
            a,
            b,
            c,
            sigma,
            epsilon,
            g,
            x0_mean: 0.0,
            x0_var: 0.0,
        };
        m.check()?;
        Ok(m)
    }

    /// Cubic sensor with the benchmark parameters
    /// `a = -0.4, b = 0.5, c = 1, sigma = 0.3` and the given `eps`.
    pub fn cubic_sensor(epsilon: f64) -> Self {
        Self::new(-0.4, 0.5, 1.0, 0.3, epsilon, PolySpec::monomial(3))
            .expect("benchmark parameters are valid")
    }

    pub fn with_initial(mut self, mean: f64, var: f64) -> Result<Self> {
        self.x0_mean = mean;
        self.x0_var = var;
        self.check()?;
        Ok(self)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        let mut m = self.clone();
        m.epsilon = epsilon;
        m.check()?;
        Ok(m)
    }

    fn check(&self) -> Result<()> {
        for (k, v) in [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("sigma", self.sigma),
            ("epsilon", self.epsilon),
            ("x0_mean", self.x0_mean),
            ("x0_var", self.x0_var),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("key `{k}`: must be finite")));
            }
        }
        if !(self.sigma > 0.0) {
            return Err(Error::Config(format!(
                "key `sigma`: must be > 0, got {}",
                self.sigma
            )));
        }
        // eps = 0 is accepted: it switches the perturbation off.
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!(
                "key `epsilon`: must lie in [0, 1), got {}",
                self.epsilon
            )));
        }
        if self.x0_var < 0.0 {
            return Err(Error::Config("key `x0_var`: must be >= 0".into()));
        }
        Ok(())
    }

    pub fn drift_obs(&self, x: f64) -> f64 {
        self.c * x + self.epsilon * self.g.eval(x)
    }

    /// The unperturbed linear part (observation coefficient `c`).
    pub fn linear_part(&self, grid: TimeGrid) -> Result<LinearGaussianModel> {
        LinearGaussianModel::scalar(
            grid,
            self.a,
            self.b,
            self.c,
            self.sigma,
            self.x0_mean,
            self.x0_var,
        )
    }
}
