use nalgebra::{DMatrix, DVector};

use super::filter::closed_loop;
use super::{RiccatiBackward, RiccatiForward};
use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::model::{min_eigenvalue, LinearGaussianModel, TimeGrid};

/// Largest number of nodes a dense kernel may span.
pub const KERNEL_NODE_CAP: usize = 4096;

/// Dense conditional covariance `K(s, u; t) = Cov(xi_{s;t}, xi_{u;t})` over
/// nodes `0..=horizon`, stored as a `(t+1) d x (t+1) d` block matrix.
#[derive(Debug, Clone)]
pub struct CovKernel {
    pub grid: TimeGrid,
    pub horizon: usize,
    pub dim: usize,
    pub k: DMatrix<f64>,
    /// Quadrature weights `W(s, u)` mapping the centred increments `h_u`,
    /// `u < t`, onto the smoothed mean: `mu_{s;t} = E[X_s] + sum_u W(s, u) h_u`.
    /// They equal `K(s, u)` below the diagonal; on and above it they carry
    /// the one-step correction `Cov(xi_{u;u}, xi_{s;u})^T C_u gamma_u dt`.
    pub weights: Option<DMatrix<f64>>,
}

impl CovKernel {
    pub fn block(&self, s: usize, u: usize) -> DMatrix<f64> {
        let d = self.dim;
        self.k.view((s * d, u * d), (d, d)).into_owned()
    }

    pub fn scalar(&self, s: usize, u: usize) -> f64 {
        self.k[(s * self.dim, u * self.dim)]
    }

    /// Smallest eigenvalue of the kernel restricted to every `stride`-th node.
    pub fn min_eigenvalue_subsampled(&self, stride: usize) -> f64 {
        let nodes: Vec<usize> = (0..=self.horizon).step_by(stride.max(1)).collect();
        let d = self.dim;
        let m = DMatrix::from_fn(nodes.len() * d, nodes.len() * d, |i, j| {
            self.k[(nodes[i / d] * d + i % d, nodes[j / d] * d + j % d)]
        });
        min_eigenvalue(&m)
    }

    pub fn to_csv(&self) -> CsvTable {
        let d = self.dim;
        let mut header = vec!["s".to_string(), "u".to_string()];
        if d == 1 {
            header.push("k".into());
        } else {
            for j in 0..d {
                header.extend((0..d).map(|l| format!("k{j}{l}")));
            }
        }
        let mut t = CsvTable::new(&header);
        for s in 0..=self.horizon {
            for u in 0..=self.horizon {
                let mut row = vec![self.grid.time(s), self.grid.time(u)];
                row.extend(self.block(s, u).transpose().iter());
                t.push(&row);
            }
        }
        t
    }
}

fn check_horizon(model: &LinearGaussianModel, horizon: usize) -> Result<()> {
    if horizon > model.grid().n_steps() {
        return Err(Error::Contract(format!(
            "horizon node {horizon} beyond grid end {}",
            model.grid().n_steps()
        )));
    }
    if horizon + 1 > KERNEL_NODE_CAP {
        return Err(Error::CapExceeded {
            what: "dense kernel nodes",
            value: horizon + 1,
            cap: KERNEL_NODE_CAP,
        });
    }
    Ok(())
}

fn put(m: &mut DMatrix<f64>, s: usize, u: usize, block: &DMatrix<f64>) {
    let d = block.nrows();
    m.view_mut((s * d, u * d), (d, d)).copy_from(block);
}

/// Kernel from the filter covariance (quadrature route):
///
/// ```text
/// K(s, u; t) = L(s, u) - int_s^t L(r, s)^T C(r) L(r, u) dr,   s >= u,
/// L(r, u) = Phi(r, u) gamma(u),
/// ```
///
/// where `Phi` is the transition of `a - gamma C` with
/// `C = c^T (sigma sigma^T)^{-1} c`. Factoring `L(r, u) = Phi(r, s) L(s, u)`
/// gives `K(s, u) = (I - gamma_s Lambda_s) L(s, u)` with
/// `Lambda_s = int_s^t Phi(r, s)^T C Phi(r, s) dr`, accumulated backwards by
/// the trapezoidal rule, so the whole kernel costs `O(t^2)` block products.
///
/// The returned kernel also carries the quadrature weights that reproduce
/// the grid smoothers exactly (see [`CovKernel::weights`]).
pub fn cov_kernel(
    model: &LinearGaussianModel,
    gamma: &RiccatiForward,
    horizon: usize,
) -> Result<CovKernel> {
    check_horizon(model, horizon)?;
    let der = model.derived()?;
    let g = &gamma.gamma;
    let phi = &gamma.propagators;
    let d = model.dim_x();
    let dt = model.grid().dt();
    let t = horizon;
    let eye = DMatrix::<f64>::identity(d, d);
    let info = |k: usize| &der.info[2 * k];

    let mut lam = vec![DMatrix::zeros(d, d); t + 1];
    for j in (0..t).rev() {
        let pj = &phi[j];
        lam[j] =
            pj.transpose() * (&lam[j + 1] + info(j + 1) * (0.5 * dt)) * pj + info(j) * (0.5 * dt);
    }
    let n = (t + 1) * d;
    let mut k = DMatrix::zeros(n, n);
    for s in 0..=t {
        let diag = &g[s] - &g[s] * &lam[s] * &g[s];
        put(&mut k, s, s, &((&diag + diag.transpose()) * 0.5));
    }
    let left: Vec<DMatrix<f64>> = (0..=t).map(|s| &eye - &g[s] * &lam[s]).collect();
    for u in 0..t {
        let mut l = g[u].clone();
        for s in u + 1..=t {
            l = &phi[s - 1] * l;
            let ksu = &left[s] * &l;
            put(&mut k, u, s, &ksu.transpose());
            put(&mut k, s, u, &ksu);
        }
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            module: "linear",
            node: t,
            detail: "kernel is not finite".into(),
        });
    }
    Ok(CovKernel {
        grid: *model.grid(),
        horizon,
        dim: d,
        k,
        weights: Some(mean_weights(model, gamma, horizon)?),
    })
}

/// `Cov(xi_{t;t}, xi_{s;t}) = Phi(t, s) gamma(s)` for `s <= t`.
pub fn filter_cross_cov(gamma: &RiccatiForward, t: usize, s: usize) -> DMatrix<f64> {
    (s..t).fold(gamma.gamma[s].clone(), |acc, k| &gamma.propagators[k] * acc)
}

/// Weights `W(s, u)`, `u < t`, with `mu_{s;t} = E[X_s] + sum_u W(s, u) h_u`
/// exactly for the Euler-Maruyama filter and the grid smoothers. They are
/// the kernel of the grid recursion
///
/// ```text
/// W(s, u) = L(s, u) - sum_{k >= max(s, u+1)} L(k, s)^T C_k L(k, u) dt
/// ```
///
/// with `L(u, u) = L(u+1, u) = gamma_u` and `L(k+1, u) = F_k L(k, u)`
/// beyond, `F_k = I + (a_k - gamma_k C_k) dt`.
fn mean_weights(
    model: &LinearGaussianModel,
    gamma: &RiccatiForward,
    horizon: usize,
) -> Result<DMatrix<f64>> {
    let der = model.derived()?;
    let f = closed_loop(model, gamma)?;
    let g = &gamma.gamma;
    let d = model.dim_x();
    let dt = model.grid().dt();
    let t = horizon;
    let eye = DMatrix::<f64>::identity(d, d);
    let info = |k: usize| &der.info[2 * k];

    // lam[j] = sum_{k >= j} Phi(k, j)^T C_k Phi(k, j) dt with grid transitions.
    let mut lam = vec![DMatrix::zeros(d, d); t + 1];
    for j in (0..t).rev() {
        lam[j] = info(j) * dt + f[j].transpose() * &lam[j + 1] * &f[j];
    }
    // sum_{k >= s} L(k, s)^T C_k L(k, u) dt = p[s] L(s, u) for s > u.
    let p: Vec<DMatrix<f64>> = (0..=t)
        .map(|s| {
            if s < t {
                &g[s] * (info(s) * dt + &lam[s + 1] * &f[s])
            } else {
                DMatrix::zeros(d, d)
            }
        })
        .collect();
    let mut w = DMatrix::zeros((t + 1) * d, t * d);
    for s in 0..t {
        let diag = &g[s] - &g[s] * &lam[s + 1] * &g[s];
        put(&mut w, s, s, &diag);
    }
    for u in 0..t {
        let mut l = g[u].clone();
        for s in u + 1..=t {
            if s > u + 1 {
                l = &f[s - 1] * l;
            }
            put(&mut w, s, u, &((&eye - &p[s]) * &l));
            if s < t {
                let above = (&eye - &p[s]) * &l;
                let corr = l.transpose() * info(s) * &g[s] * dt;
                put(&mut w, u, s, &(above.transpose() + corr));
            }
        }
    }
    Ok(w)
}

/// Symmetric square root of a PSD matrix.
pub(crate) fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 1 {
        return DMatrix::from_element(1, 1, m[(0, 0)].max(0.0).sqrt());
    }
    let e = (0.5 * (m + m.transpose())).symmetric_eigen();
    let r = e.eigenvalues.map(|v| v.max(0.0).sqrt());
    &e.eigenvectors * DMatrix::from_diagonal(&r) * e.eigenvectors.transpose()
}

/// `V[xi_{0;t}] = S (I - S phi(0;t) S)^{-1} S` with `S = x0_cov^{1/2}`.
pub fn initial_xi_cov(model: &LinearGaussianModel, phi: &RiccatiBackward) -> Result<DMatrix<f64>> {
    let s = sqrt_psd(model.x0_cov());
    let d = s.nrows();
    let inner = DMatrix::identity(d, d) - &s * &phi.phi[0] * &s;
    let inv = inner.try_inverse().ok_or(Error::Numerical {
        module: "linear",
        node: 0,
        detail: "I - S phi(0;t) S is singular".into(),
    })?;
    Ok(&s * inv * &s)
}

/// Exact Gaussian one-step law of `dxi = (a + b b^T phi(s;t)) xi ds + b dV`:
/// `xi_{k+1} = psi_k xi_k + N(0, q_k)`.
#[derive(Debug, Clone)]
pub(crate) struct XiStep {
    pub psi: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

/// RK4 integration of `psi' = A psi`, `q' = A q + q A^T + b b^T` over each
/// step, `A = a + b b^T phi`.
pub(crate) fn xi_steps(model: &LinearGaussianModel, phi: &RiccatiBackward) -> Result<Vec<XiStep>> {
    let der = model.derived()?;
    let d = model.dim_x();
    let dt = model.grid().dt();
    Ok((0..phi.horizon)
        .map(|i| {
            let drift = |stage: usize| {
                let k = 2 * i + stage;
                let ph = match stage {
                    0 => &phi.phi[i],
                    1 => &phi.phi_mid[i],
                    _ => &phi.phi[i + 1],
                };
                (model.a_half(k) + &der.bbt[k] * ph, &der.bbt[k])
            };
            let f = |stage: usize, psi: &DMatrix<f64>, q: &DMatrix<f64>| {
                let (a, bbt) = drift(stage);
                (&a * psi, &a * q + q * a.transpose() + bbt)
            };
            let (p0, q0) = (DMatrix::identity(d, d), DMatrix::zeros(d, d));
            let h = 0.5 * dt;
            let (a1, b1) = f(0, &p0, &q0);
            let (a2, b2) = f(1, &(&p0 + &a1 * h), &(&q0 + &b1 * h));
            let (a3, b3) = f(1, &(&p0 + &a2 * h), &(&q0 + &b2 * h));
            let (a4, b4) = f(2, &(&p0 + &a3 * dt), &(&q0 + &b3 * dt));
            let psi = p0 + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (dt / 6.0);
            let q = q0 + (b1 + b2 * 2.0 + b3 * 2.0 + b4) * (dt / 6.0);
            XiStep {
                psi,
                q: (&q + q.transpose()) * 0.5,
            }
        })
        .collect())
}

/// Kernel of the process `xi_{.;t}` on the grid, propagated from
/// `V[xi_{0;t}]` with the exact one-step laws: `Cov(xi_s, xi_u) = Psi(s, u) w_u`
/// for `s >= u`, `w_{k+1} = psi_k w_k psi_k^T + q_k`. This is the covariance of
/// the paths drawn by the conditional sampler.
pub fn cov_kernel_from_phi(
    model: &LinearGaussianModel,
    phi: &RiccatiBackward,
) -> Result<CovKernel> {
    let t = phi.horizon;
    check_horizon(model, t)?;
    let steps = xi_steps(model, phi)?;
    let d = model.dim_x();
    let mut var = Vec::with_capacity(t + 1);
    let mut w = initial_xi_cov(model, phi)?;
    var.push(w.clone());
    for st in &steps {
        w = &st.psi * &w * st.psi.transpose() + &st.q;
        w = (&w + w.transpose()) * 0.5;
        var.push(w.clone());
    }
    let n = (t + 1) * d;
    let mut k = DMatrix::zeros(n, n);
    for u in 0..=t {
        let mut c = var[u].clone();
        put(&mut k, u, u, &c);
        for s in u + 1..=t {
            c = &steps[s - 1].psi * c;
            put(&mut k, s, u, &c);
            put(&mut k, u, s, &c.transpose());
        }
    }
    Ok(CovKernel {
        grid: *model.grid(),
        horizon: t,
        dim: d,
        k,
        weights: None,
    })
}

/// Stacks per-node vectors into one column.
pub(crate) fn stack(v: &[DVector<f64>]) -> DVector<f64> {
    let d = v.first().map_or(0, |x| x.len());
    DVector::from_fn(v.len() * d, |i, _| v[i / d][i % d])
}

#[cfg(test)]
mod tests {
    use super::super::{solve_gamma, solve_phi};
    use super::*;

    fn scalar(b: f64, v0: f64, horizon: f64) -> LinearGaussianModel {
        let g = TimeGrid::on_interval(horizon, 0.01).unwrap();
        LinearGaussianModel::scalar(g, -0.4, b, 1.0, 0.3, 0.0, v0).unwrap()
    }

    #[test]
    fn diagonal_at_horizon_is_gamma() {
        let m = scalar(0.5, 0.0, 2.0);
        let g = solve_gamma(&m).unwrap();
        let k = cov_kernel(&m, &g, 150).unwrap();
        assert_eq!(k.block(150, 150), g.gamma[150]);
        assert_eq!(k.k, k.k.transpose());
    }

    #[test]
    fn degenerate_signal_gives_zero_kernel() {
        let m = scalar(0.0, 0.0, 1.0);
        let k = cov_kernel(&m, &solve_gamma(&m).unwrap(), 100).unwrap();
        assert!(k.k.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kernel_is_psd() {
        let m = scalar(0.5, 0.2, 3.0);
        let k = cov_kernel(&m, &solve_gamma(&m).unwrap(), 300).unwrap();
        assert!(k.min_eigenvalue_subsampled(10) > -1e-12);
    }

    #[test]
    fn lambda_sum_matches_direct_evaluation() {
        let m = scalar(0.5, 0.2, 0.5);
        let g = solve_gamma(&m).unwrap();
        let t = 50;
        let k = cov_kernel(&m, &g, t).unwrap();
        let info = 1.0 / 0.09;
        let l = |r: usize, u: usize| filter_cross_cov(&g, r, u)[(0, 0)];
        for s in (0..=t).step_by(5) {
            for u in (0..=s).step_by(3) {
                let sum: f64 = (s..t)
                    .map(|j| 0.5 * (l(j, s) * l(j, u) + l(j + 1, s) * l(j + 1, u)) * info * 0.01)
                    .sum();
                let direct = l(s, u) - sum;
                assert!((k.scalar(s, u) - direct).abs() < 1e-14, "({s},{u})");
            }
        }
    }

    #[test]
    fn weights_match_direct_grid_sum() {
        let m = scalar(0.5, 0.2, 0.5);
        let g = solve_gamma(&m).unwrap();
        let t = 50;
        let w = cov_kernel(&m, &g, t).unwrap().weights.unwrap();
        let f = closed_loop(&m, &g).unwrap();
        let gs = g.scalar();
        let info = 1.0 / 0.09;
        let l = |k: usize, u: usize| -> f64 {
            if k <= u + 1 {
                return gs[u];
            }
            (u + 1..k).fold(gs[u], |acc, j| f[j][(0, 0)] * acc)
        };
        for s in (0..=t).step_by(4) {
            for u in (0..t).step_by(3) {
                let lead = if u < s { l(s, u) } else { l(u, s) };
                let from = s.max(u + 1);
                let sum: f64 = (from..t).map(|j| l(j, s) * info * l(j, u) * 0.01).sum();
                assert!((w[(s, u)] - (lead - sum)).abs() < 1e-14, "({s},{u})");
            }
        }
    }

    #[test]
    fn kernel_converges_at_second_order() {
        let err = |dt: f64| {
            let g = TimeGrid::on_interval(1.0, dt).unwrap();
            let m = LinearGaussianModel::scalar(g, -0.4, 0.5, 1.0, 0.3, 0.0, 0.2).unwrap();
            let n = g.n_steps();
            let kc = cov_kernel(&m, &solve_gamma(&m).unwrap(), n).unwrap();
            let kp = cov_kernel_from_phi(&m, &solve_phi(&m, n).unwrap()).unwrap();
            let pts = [(0, 0), (n / 2, n / 4), (n, n / 2), (n / 2, n / 2)];
            pts.iter()
                .map(|&(s, u)| (kc.scalar(s, u) - kp.scalar(s, u)).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(e1 / e2 > 3.0, "{e1} {e2}");
    }

    #[test]
    fn backward_exponential_representation() {
        let (a, b) = (-0.4, 0.5);
        let m = scalar(b, 0.2, 2.0);
        let g = solve_gamma(&m).unwrap();
        let gs = g.scalar();
        let t = 200;
        let k = cov_kernel(&m, &g, t).unwrap();
        for s in (0..=t).step_by(20) {
            for u in (0..=s).step_by(10) {
                let integral: f64 = (u..s).map(|r| (a + b * b / gs[r]) * 0.01).sum();
                let want = k.scalar(s, s) * (-integral).exp();
                let got = k.scalar(s, u);
                assert!(
                    (got - want).abs() < 0.01 * k.scalar(s, s),
                    "({s},{u}): {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn phi_route_agrees_with_quadrature_route() {
        let m = scalar(0.5, 0.2, 2.0);
        let t = 200;
        let kc = cov_kernel(&m, &solve_gamma(&m).unwrap(), t).unwrap();
        let kp = cov_kernel_from_phi(&m, &solve_phi(&m, t).unwrap()).unwrap();
        let diff = (&kc.k - &kp.k).amax();
        assert!(diff < 5e-4 * kc.k.amax(), "max difference {diff}");
    }

    #[test]
    fn horizon_cap_enforced() {
        let g = TimeGrid::new(0.0, 0.001, 5000).unwrap();
        let m = LinearGaussianModel::scalar(g, -0.4, 0.5, 1.0, 0.3, 0.0, 0.0).unwrap();
        let r = solve_gamma(&m).unwrap();
        assert!(matches!(
            cov_kernel(&m, &r, 4500),
            Err(Error::CapExceeded { .. })
        ));
    }
}
