use nalgebra::{DMatrix, DVector};

use super::filter::{centered_increments, prior_mean};
use super::kernel::{initial_xi_cov, sqrt_psd, stack, xi_steps};
use super::{cov_kernel, solve_gamma, solve_phi, CovKernel, RiccatiBackward};
use crate::error::{Error, Result};
use crate::model::LinearGaussianModel;
use crate::sde::{Channel, NoiseSeed};

/// Draws paths `zeta_{.;t}` whose law given the observations up to `t` is
/// the conditional law of the signal on `[0, t]`:
///
/// ```text
/// zeta_s = E[X_s] + xi_{s;t} + sum_{u<t} W(s, u) h_u
/// ```
///
/// `xi_{.;t}` is fresh Gaussian noise driven through
/// `dxi = (a + b b^T phi(s;t)) xi ds + b dV`, stepped with its exact Gaussian
/// one-step law, and the last term is the grid quadrature of the kernel
/// against the centred observation increments.
#[derive(Debug, Clone)]
pub struct ConditionalSampler {
    horizon: usize,
    dim: usize,
    mean: DVector<f64>,
    xi0_root: DMatrix<f64>,
    psi: Vec<DMatrix<f64>>,
    q_root: Vec<DMatrix<f64>>,
}

impl ConditionalSampler {
    pub fn new(
        model: &LinearGaussianModel,
        kernel: &CovKernel,
        phi: &RiccatiBackward,
        y: &[f64],
    ) -> Result<Self> {
        let t = kernel.horizon;
        if phi.horizon != t {
            return Err(Error::Contract(format!(
                "phi horizon {} differs from kernel horizon {t}",
                phi.horizon
            )));
        }
        let w = kernel.weights.as_ref().ok_or_else(|| {
            Error::Contract(
                "kernel carries no quadrature weights (build it with cov_kernel)".into(),
            )
        })?;
        let prior = prior_mean(model);
        let h = centered_increments(model, &prior, y)?;
        let mean = stack(&prior[..=t]) + w * stack(&h[..t]);
        let steps = xi_steps(model, phi)?;
        Ok(Self {
            horizon: t,
            dim: model.dim_x(),
            mean,
            xi0_root: sqrt_psd(&initial_xi_cov(model, phi)?),
            q_root: steps.iter().map(|st| sqrt_psd(&st.q)).collect(),
            psi: steps.into_iter().map(|st| st.psi).collect(),
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Conditional mean `E[zeta_s | Y]` at node `s`, which equals `mu_{s;t}`.
    pub fn mean(&self, s: usize) -> DVector<f64> {
        self.mean.rows(s * self.dim, self.dim).into_owned()
    }

    /// One conditional path; the noise comes from the auxiliary channel of
    /// `seed`.
    pub fn sample(&self, seed: NoiseSeed) -> Vec<DVector<f64>> {
        let mut rng = seed.stream(Channel::Auxiliary);
        let d = self.dim;
        let mut xi = &self.xi0_root * rng.normals(d);
        let mut out = Vec::with_capacity(self.horizon + 1);
        out.push(&xi + self.mean(0));
        for k in 0..self.horizon {
            xi = &self.psi[k] * xi + &self.q_root[k] * rng.normals(d);
            out.push(&xi + self.mean(k + 1));
        }
        out
    }

    /// Scalar sample written into `out` (length `horizon + 1`).
    pub fn sample_scalar_into(&self, seed: NoiseSeed, out: &mut [f64]) {
        assert_eq!(self.dim, 1, "scalar sampling of a vector model");
        let mut rng = seed.stream(Channel::Auxiliary);
        let mut xi = self.xi0_root[(0, 0)] * rng.normal();
        out[0] = xi + self.mean[0];
        for k in 0..self.horizon {
            xi = self.psi[k][(0, 0)] * xi + self.q_root[k][(0, 0)] * rng.normal();
            out[k + 1] = xi + self.mean[k + 1];
        }
    }
}

/// Builds every ingredient from the model and draws one conditional path
/// on nodes `0..=horizon`.
pub fn sample_conditional_path(
    model: &LinearGaussianModel,
    y: &[f64],
    horizon: usize,
    seed: NoiseSeed,
) -> Result<Vec<DVector<f64>>> {
    let gamma = solve_gamma(model)?;
    let kernel = cov_kernel(model, &gamma, horizon)?;
    let phi = solve_phi(model, horizon)?;
    Ok(ConditionalSampler::new(model, &kernel, &phi, y)?.sample(seed))
}
