use crate::error::{Error, Result};

/// Uniform time discretization `t0, t0 + dt, ..., t0 + n_steps * dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if !t0.is_finite() {
            return Err(Error::Config("key `t0`: must be finite".into()));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("key `dt`: must be > 0, got {dt}")));
        }
        if n_steps == 0 {
            return Err(Error::Config("key `n_steps`: must be >= 1".into()));
        }
        Ok(Self { t0, dt, n_steps })
    }

    /// Grid on `[0, horizon]` with the step rounded so that it divides the horizon.
    pub fn on_interval(horizon: f64, dt: f64) -> Result<Self> {
        let n = (horizon / dt).round();
        if !(n >= 1.0) {
            return Err(Error::Config(format!(
                "horizon {horizon} too short for step {dt}"
            )));
        }
        Self::new(0.0, horizon / n, n as usize)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Time of half-node `k`, i.e. `t0 + k * dt / 2`.
    pub fn half_time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * 0.5 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.n_steps)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.time(i))
    }

    /// Index of the node at time `t`, if `t` lies on the grid.
    pub fn node_at(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.dt;
        let i = x.round();
        if i < 0.0 || i > self.n_steps as f64 || (x - i).abs() > 1e-7 {
            return None;
        }
        Some(i as usize)
    }

    /// Same interval, half the step.
    pub fn refined(&self) -> Self {
        Self {
            t0: self.t0,
            dt: 0.5 * self.dt,
            n_steps: 2 * self.n_steps,
        }
    }

    /// Prefix of this grid ending at node `last`.
    pub fn truncated(&self, last: usize) -> Result<Self> {
        if last == 0 || last > self.n_steps {
            return Err(Error::Contract(format!(
                "cannot truncate grid of {} steps at node {last}",
                self.n_steps
            )));
        }
        Ok(Self {
            n_steps: last,
            ..*self
        })
    }

    /// Fails unless a path has exactly one entry per node.
    pub fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::Contract(format!(
                "{what} has {len} nodes, grid has {}",
                self.len()
            )));
        }
        Ok(())
    }
}
