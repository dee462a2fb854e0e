//! Euler-Maruyama simulation of signal/observation pairs.
//!
//! Every path draws its randomness from ChaCha8 streams keyed by
//! `(base_seed, path_index, channel)`; within a stream the draw position is
//! the step counter. Paths are therefore reproducible one by one, in any
//! order and on any number of threads.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::model::{LinearGaussianModel, NonlinearModel, PerturbedLinearModel, TimeGrid};

/// Noise channels of one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Channel {
    Initial = 0,
    Signal = 1,
    Observation = 2,
    /// Fresh noise for conditional path sampling.
    Auxiliary = 3,
}

const CHANNELS: u64 = 4;

/// Identifies the noise of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoiseSeed {
    pub base_seed: u64,
    pub path_index: u64,
}

impl NoiseSeed {
    pub fn new(base_seed: u64, path_index: u64) -> Self {
        Self {
            base_seed,
            path_index,
        }
    }

    pub fn stream(&self, channel: Channel) -> NoiseStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base_seed);
        rng.set_stream(
            self.path_index
                .wrapping_mul(CHANNELS)
                .wrapping_add(channel as u64),
        );
        NoiseStream { rng }
    }

    /// Brownian increments of the given dimension for every step of `grid`.
    pub fn increments(&self, channel: Channel, grid: &TimeGrid, dim: usize) -> Increments {
        let mut s = self.stream(channel);
        let sd = grid.dt().sqrt();
        let values = (0..grid.n_steps() * dim).map(|_| sd * s.normal()).collect();
        Increments {
            dim,
            dt: grid.dt(),
            values,
        }
    }
}

/// Sequential standard-normal draws from one channel.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn normals(&mut self, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| self.normal())
    }
}

/// Brownian increments `dW_i`, step-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Increments {
    pub dim: usize,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl Increments {
    pub fn zeros(n_steps: usize, dim: usize, dt: f64) -> Self {
        Self {
            dim,
            dt,
            values: vec![0.0; n_steps * dim],
        }
    }

    pub fn n_steps(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.values.len() / self.dim
        }
    }

    pub fn step(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Increments of the same Brownian path on the grid with twice the step.
    pub fn coarsen(&self) -> Self {
        let n = self.n_steps() / 2;
        let mut values = Vec::with_capacity(n * self.dim);
        for i in 0..n {
            let (a, b) = (self.step(2 * i), self.step(2 * i + 1));
            values.extend(a.iter().zip(b).map(|(u, v)| u + v));
        }
        Self {
            dim: self.dim,
            dt: 2.0 * self.dt,
            values,
        }
    }
}

/// Simulated signal and observation paths, node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPair {
    pub grid: TimeGrid,
    pub dim_x: usize,
    pub dim_y: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub seed: NoiseSeed,
}

impl PathPair {
    pub fn x_at(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim_x..(i + 1) * self.dim_x]
    }

    pub fn y_at(&self, i: usize) -> &[f64] {
        &self.y[i * self.dim_y..(i + 1) * self.dim_y]
    }

    /// Observation increments `Y_{i+1} - Y_i`, step-major.
    pub fn dy(&self) -> Vec<f64> {
        let d = self.dim_y;
        (0..self.grid.n_steps() * d)
            .map(|k| self.y[k + d] - self.y[k])
            .collect()
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut header = vec!["t".to_string()];
        let names = |p: &str, d: usize| -> Vec<String> {
            if d == 1 {
                vec![p.to_string()]
            } else {
                (0..d).map(|j| format!("{p}{j}")).collect()
            }
        };
        header.extend(names("x", self.dim_x));
        header.extend(names("y", self.dim_y));
        let mut t = CsvTable::new(&header);
        let mut row = Vec::with_capacity(header.len());
        for i in 0..self.grid.len() {
            row.clear();
            row.push(self.grid.time(i));
            row.extend_from_slice(self.x_at(i));
            row.extend_from_slice(self.y_at(i));
            t.push(&row);
        }
        t
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.to_csv().write(path)
    }
}

fn blow_up(node: usize, what: &str) -> Error {
    Error::Integration {
        module: "sde",
        node,
        detail: format!("{what} is not finite"),
    }
}

fn check_grid(model_grid: &TimeGrid, grid: &TimeGrid) -> Result<()> {
    if model_grid != grid {
        return Err(Error::Contract(
            "simulation grid differs from the model grid".into(),
        ));
    }
    Ok(())
}

/// Scalar Euler-Maruyama recursion
/// `X += drift(i, X) dt + diff(i, X) dV_i`, `Y += obs(i, X) dt + sig(i) dW_i`.
#[allow(clippy::too_many_arguments)]
fn euler_scalar(
    x0: f64,
    dt: f64,
    dv: &[f64],
    dw: &[f64],
    drift: impl Fn(usize, f64) -> f64,
    diff: impl Fn(usize, f64) -> f64,
    obs: impl Fn(usize, f64) -> f64,
    sig: impl Fn(usize) -> f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = dv.len();
    let mut x = Vec::with_capacity(n + 1);
    let mut y = Vec::with_capacity(n + 1);
    let (mut xi, mut yi) = (x0, 0.0);
    x.push(xi);
    y.push(yi);
    for i in 0..n {
        let xn = xi + drift(i, xi) * dt + diff(i, xi) * dv[i];
        yi += obs(i, xi) * dt + sig(i) * dw[i];
        xi = xn;
        if !xi.is_finite() {
            return Err(blow_up(i + 1, "signal"));
        }
        if !yi.is_finite() {
            return Err(blow_up(i + 1, "observation"));
        }
        x.push(xi);
        y.push(yi);
    }
    Ok((x, y))
}

/// Draws `X_0 ~ N(mean, cov)` through a symmetric square root of `cov`.
pub fn draw_initial(mean: &DVector<f64>, cov: &DMatrix<f64>, seed: &NoiseSeed) -> DVector<f64> {
    let d = mean.len();
    let z = seed.stream(Channel::Initial).normals(d);
    if d == 1 {
        return DVector::from_element(1, mean[0] + cov[(0, 0)].max(0.0).sqrt() * z[0]);
    }
    let eig = (0.5 * (cov + cov.transpose())).symmetric_eigen();
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let root =
        &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
    mean + root * z
}

/// Integrates the linear system on its grid from `x0` with the given
/// Brownian increments (`dv` of dimension `m1`, `dw` of dimension `m2`).
pub fn integrate_linear(
    model: &LinearGaussianModel,
    x0: &DVector<f64>,
    dv: &Increments,
    dw: &Increments,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = model.grid();
    let n = grid.n_steps();
    let dt = grid.dt();
    if dv.n_steps() != n || dw.n_steps() != n {
        return Err(Error::Contract(
            "increment count differs from n_steps".into(),
        ));
    }
    if dv.dim != model.noise_dim_x() || dw.dim != model.noise_dim_y() {
        return Err(Error::Contract(
            "increment dimension differs from the model".into(),
        ));
    }
    if model.dim_x() == 1 && model.dim_y() == 1 && dv.dim == 1 && dw.dim == 1 {
        let s = |m: &DMatrix<f64>| m[(0, 0)];
        return euler_scalar(
            x0[0],
            dt,
            &dv.values,
            &dw.values,
            |i, x| s(model.a(i)) * x,
            |i, _| s(model.b(i)),
            |i, x| s(model.c(i)) * x,
            |i| s(model.sigma(i)),
        );
    }
    let (d1, d2) = (model.dim_x(), model.dim_y());
    let mut x = Vec::with_capacity((n + 1) * d1);
    let mut y = Vec::with_capacity((n + 1) * d2);
    let mut xi = x0.clone();
    let mut yi = DVector::zeros(d2);
    x.extend(xi.iter());
    y.extend(yi.iter());
    for i in 0..n {
        let v = DVector::from_column_slice(dv.step(i));
        let w = DVector::from_column_slice(dw.step(i));
        let xn = &xi + model.a(i) * &xi * dt + model.b(i) * v;
        yi += model.c(i) * &xi * dt + model.sigma(i) * w;
        xi = xn;
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(blow_up(i + 1, "signal"));
        }
        if yi.iter().any(|v| !v.is_finite()) {
            return Err(blow_up(i + 1, "observation"));
        }
        x.extend(xi.iter());
        y.extend(yi.iter());
    }
    Ok((x, y))
}

/// Simulates the linear-Gaussian system with noise keyed by `seed`.
pub fn simulate_linear(
    model: &LinearGaussianModel,
    grid: &TimeGrid,
    seed: NoiseSeed,
) -> Result<PathPair> {
    check_grid(model.grid(), grid)?;
    let x0 = draw_initial(model.x0_mean(), model.x0_cov(), &seed);
    let dv = seed.increments(Channel::Signal, grid, model.noise_dim_x());
    let dw = seed.increments(Channel::Observation, grid, model.noise_dim_y());
    let (x, y) = integrate_linear(model, &x0, &dv, &dw)?;
    Ok(PathPair {
        grid: *grid,
        dim_x: model.dim_x(),
        dim_y: model.dim_y(),
        x,
        y,
        seed,
    })
}

/// Integrates the perturbed scalar model from `x0` with given increments.
pub fn integrate_perturbed(
    model: &PerturbedLinearModel,
    dt: f64,
    x0: f64,
    dv: &[f64],
    dw: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    euler_scalar(
        x0,
        dt,
        dv,
        dw,
        |_, x| model.a * x,
        |_, _| model.b,
        |_, x| model.drift_obs(x),
        |_| model.sigma,
    )
}

/// Simulates `dX = aX dt + b dV`, `dY = (cX + eps g(X)) dt + sigma dW`.
pub fn simulate_perturbed(
    model: &PerturbedLinearModel,
    grid: &TimeGrid,
    seed: NoiseSeed,
) -> Result<PathPair> {
    let x0 = draw_initial(
        &DVector::from_element(1, model.x0_mean),
        &DMatrix::from_element(1, 1, model.x0_var),
        &seed,
    )[0];
    let dv = seed.increments(Channel::Signal, grid, 1);
    let dw = seed.increments(Channel::Observation, grid, 1);
    let (x, y) = integrate_perturbed(model, grid.dt(), x0, &dv.values, &dw.values)?;
    Ok(PathPair {
        grid: *grid,
        dim_x: 1,
        dim_y: 1,
        x,
        y,
        seed,
    })
}

/// Simulates `dX = alpha(X) dt + eps beta(X) dV`, `dY = h(X) dt + sigma dW`
/// from `X_0 = 0`.
pub fn simulate_nonlinear(
    model: &NonlinearModel,
    grid: &TimeGrid,
    seed: NoiseSeed,
) -> Result<PathPair> {
    let dv = seed.increments(Channel::Signal, grid, 1);
    let dw = seed.increments(Channel::Observation, grid, 1);
    let eps = model.epsilon;
    let (x, y) = euler_scalar(
        0.0,
        grid.dt(),
        &dv.values,
        &dw.values,
        |_, x| model.alpha.eval(x),
        |_, x| eps * model.beta.eval(x),
        |_, x| model.h.eval(x),
        |_| model.sigma,
    )?;
    Ok(PathPair {
        grid: *grid,
        dim_x: 1,
        dim_y: 1,
        x,
        y,
        seed,
    })
}
