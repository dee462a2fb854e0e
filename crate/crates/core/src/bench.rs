//! Monte-Carlo error study.
//!
//! Each path is simulated from its own `(base_seed, path_index)` noise
//! stream, filtered by the linear Kalman-Bucy mean and by the expansion
//! filters (raw and clipped), and scored by the integrated squared error
//! against the simulated signal. Paths run in parallel; results are
//! collected in path order so every table is reproducible bit for bit.

use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expansion::{clip_path, AsymptoticFilter, ExpansionLimits};
use crate::io::{fmt_f64, CsvTable};
use crate::model::{PerturbedLinearModel, TimeGrid};
use crate::sde::{simulate_perturbed, NoiseSeed};

/// The clipping ratios `0.1, .., 1.0, inf`.
pub fn default_ratios() -> Vec<f64> {
    let mut rs: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    rs.push(f64::INFINITY);
    rs
}

fn ratio_label(r: f64) -> String {
    format!("{r}")
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub model: PerturbedLinearModel,
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub base_seed: u64,
    /// Expansion orders scored, each at least 1.
    pub orders: Vec<usize>,
    /// Clipping ratios, each positive or infinite.
    pub ratios: Vec<f64>,
    pub limits: ExpansionLimits,
}

impl BenchConfig {
    /// Cubic sensor study: 1000 paths on `[0, 100]` with step 0.01,
    /// orders 1 and 2, ratios `0.1, .., 1.0, inf`.
    pub fn cubic_sensor(epsilon: f64) -> Result<Self> {
        Ok(Self {
            model: PerturbedLinearModel::cubic_sensor(0.0).with_epsilon(epsilon)?,
            grid: TimeGrid::on_interval(100.0, 0.01)?,
            n_paths: 1000,
            base_seed: 0,
            orders: vec![1, 2],
            ratios: default_ratios(),
            limits: ExpansionLimits::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::Config("key `paths`: must be >= 1".into()));
        }
        if self.orders.is_empty() || self.orders.contains(&0) {
            return Err(Error::Config("key `order`: must be >= 1".into()));
        }
        if let Some(r) = self.ratios.iter().find(|r| !(**r > 0.0)) {
            return Err(Error::Config(format!(
                "key `r`: must be > 0 or inf, got {r}"
            )));
        }
        Ok(())
    }

    pub fn validate_sweep(&self) -> Result<()> {
        if self.ratios.len() < 2 {
            return Err(Error::Config(
                "key `r`: a sweep needs at least two values".into(),
            ));
        }
        self.validate()
    }

    fn max_order(&self) -> usize {
        self.orders.iter().copied().max().unwrap_or(0)
    }

    /// Variant names in column order: `mu`, `n<k>` per order, then
    /// `n<k>_r<r>` per order and ratio.
    pub fn variants(&self) -> Vec<String> {
        let mut v = vec!["mu".to_string()];
        v.extend(self.orders.iter().map(|k| format!("n{k}")));
        for k in &self.orders {
            v.extend(
                self.ratios
                    .iter()
                    .map(|&r| format!("n{k}_r{}", ratio_label(r))),
            );
        }
        v
    }
}

/// Integrated squared error `sum_i (x_i - n_i)^2 dt` over the grid intervals
/// (left endpoints).
pub fn ise(x: &[f64], estimate: &[f64], grid: &TimeGrid) -> Result<f64> {
    grid.check_len("signal path", x.len())?;
    grid.check_len("estimate path", estimate.len())?;
    let n = grid.n_steps();
    Ok(x[..n]
        .iter()
        .zip(&estimate[..n])
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        * grid.dt())
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathStatus {
    Ok,
    /// Some variant has a non-finite error; that variant is left out of the
    /// statistics.
    NonFinite,
    /// The path could not be simulated or the expansion integration failed.
    Failed(String),
}

impl PathStatus {
    pub fn label(&self) -> String {
        match self {
            PathStatus::Ok => "ok".into(),
            PathStatus::NonFinite => "nonfinite".into(),
            PathStatus::Failed(why) => format!("failed: {}", why.replace(',', ";")),
        }
    }
}

/// Errors of one path, one entry per [`BenchConfig::variants`] column.
#[derive(Debug, Clone, PartialEq)]
pub struct IseRecord {
    pub path_index: u64,
    pub seed: u64,
    pub ise: Vec<f64>,
    pub status: PathStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub variant: String,
    pub min: f64,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
    pub n_ok: usize,
}

impl SummaryRow {
    fn from_values(variant: &str, values: impl Iterator<Item = f64>) -> Self {
        let mut v: Vec<f64> = values.filter(|x| x.is_finite()).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let (min, median, mean, max) = if n == 0 {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        } else {
            let median = if n % 2 == 1 {
                v[n / 2]
            } else {
                0.5 * (v[n / 2 - 1] + v[n / 2])
            };
            (v[0], median, v.iter().sum::<f64>() / n as f64, v[n - 1])
        };
        Self {
            variant: variant.to_string(),
            min,
            median,
            mean,
            max,
            n_ok: n,
        }
    }
}

/// Mean errors of the clipped filters at one ratio, one entry per order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub r: f64,
    pub mise: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub orders: Vec<usize>,
    pub rows: Vec<SweepRow>,
}

impl Sweep {
    /// Ratio with the smallest mean error for the `j`-th order.
    pub fn argmin(&self, j: usize) -> Option<&SweepRow> {
        self.rows
            .iter()
            .filter(|row| row.mise[j].is_finite())
            .min_by(|a, b| a.mise[j].total_cmp(&b.mise[j]))
    }

    /// `r,mise_n<k>..`.
    pub fn to_csv(&self) -> CsvTable {
        let mut header = vec!["r".to_string()];
        header.extend(self.orders.iter().map(|k| format!("mise_n{k}")));
        let mut t = CsvTable::new(&header);
        for row in &self.rows {
            let mut fields = vec![ratio_label(row.r)];
            fields.extend(row.mise.iter().map(|&v| fmt_f64(v)));
            t.push_fields(&fields);
        }
        t
    }
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub orders: Vec<usize>,
    pub ratios: Vec<f64>,
    pub variants: Vec<String>,
    pub records: Vec<IseRecord>,
    pub summary: Vec<SummaryRow>,
    pub elapsed: Duration,
}

impl BenchReport {
    pub fn row(&self, variant: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.variant == variant)
    }

    /// Paths whose records are all finite.
    pub fn n_complete(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.status == PathStatus::Ok)
            .count()
    }

    /// Mean error of every clipped filter, one row per ratio.
    pub fn sweep(&self) -> Sweep {
        let rows = self
            .ratios
            .iter()
            .map(|&r| SweepRow {
                r,
                mise: self
                    .orders
                    .iter()
                    .map(|k| {
                        self.row(&format!("n{k}_r{}", ratio_label(r)))
                            .map_or(f64::NAN, |s| s.mean)
                    })
                    .collect(),
            })
            .collect();
        Sweep {
            orders: self.orders.clone(),
            rows,
        }
    }

    /// `path_index,seed,ise_<variant>..,status`.
    pub fn records_csv(&self) -> CsvTable {
        let mut header = vec!["path_index".to_string(), "seed".into()];
        header.extend(self.variants.iter().map(|v| format!("ise_{v}")));
        header.push("status".into());
        let mut t = CsvTable::new(&header);
        for rec in &self.records {
            let mut row = vec![rec.path_index.to_string(), rec.seed.to_string()];
            row.extend(rec.ise.iter().map(|&v| fmt_f64(v)));
            row.push(rec.status.label());
            t.push_fields(&row);
        }
        t
    }

    /// `variant,min,median,mean,max,n_ok`.
    pub fn summary_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["variant", "min", "median", "mean", "max", "n_ok"]);
        for s in &self.summary {
            t.push_fields(&[
                s.variant.clone(),
                fmt_f64(s.min),
                fmt_f64(s.median),
                fmt_f64(s.mean),
                fmt_f64(s.max),
                s.n_ok.to_string(),
            ]);
        }
        t
    }

    /// Writes `records.csv`, `summary.csv` and `sweep.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        self.records_csv().write(&dir.join("records.csv"))?;
        self.summary_csv().write(&dir.join("summary.csv"))?;
        self.sweep().to_csv().write(&dir.join("sweep.csv"))
    }
}

/// A validated configuration with its expansion filter built once.
#[derive(Debug, Clone)]
pub struct MonteCarlo {
    config: BenchConfig,
    filter: AsymptoticFilter,
}

impl MonteCarlo {
    pub fn new(config: BenchConfig) -> Result<Self> {
        config.validate()?;
        let filter = AsymptoticFilter::new(
            &config.model,
            config.grid,
            config.max_order(),
            &config.limits,
        )?;
        Ok(Self { config, filter })
    }

    pub fn config(&self) -> &BenchConfig {
        &self.config
    }

    /// Errors of one path; failures are recorded in the status.
    pub fn run_path(&self, path_index: u64) -> IseRecord {
        let cfg = &self.config;
        let n_variants = 1 + cfg.orders.len() * (1 + cfg.ratios.len());
        let mut record = IseRecord {
            path_index,
            seed: cfg.base_seed,
            ise: vec![f64::NAN; n_variants],
            status: PathStatus::Ok,
        };
        let path = match simulate_perturbed(
            &cfg.model,
            &cfg.grid,
            NoiseSeed::new(cfg.base_seed, path_index),
        ) {
            Ok(p) => p,
            Err(e) => {
                record.status = PathStatus::Failed(e.to_string());
                return record;
            }
        };
        let dy = path.dy();
        let score = |est: &[f64]| ise(&path.x, est, &cfg.grid).unwrap_or(f64::NAN);
        let coeffs = match self.filter.coefficients(&dy) {
            Ok(c) => c,
            Err(e) => {
                record.ise[0] = score(&self.filter.linear_mean(&dy));
                record.status = PathStatus::Failed(e.to_string());
                return record;
            }
        };
        let eps = cfg.model.epsilon;
        record.ise[0] = score(&coeffs[0]);
        let mut col = 1;
        for &k in &cfg.orders {
            record.ise[col] = score(&clip_path(&coeffs[..=k], eps, f64::INFINITY));
            col += 1;
        }
        for &k in &cfg.orders {
            for &r in &cfg.ratios {
                record.ise[col] = score(&clip_path(&coeffs[..=k], eps, r));
                col += 1;
            }
        }
        if record.ise.iter().any(|v| !v.is_finite()) {
            record.status = PathStatus::NonFinite;
        }
        record
    }

    pub fn run(&self) -> BenchReport {
        let start = Instant::now();
        let records: Vec<IseRecord> = (0..self.config.n_paths as u64)
            .into_par_iter()
            .map(|i| self.run_path(i))
            .collect();
        let variants = self.config.variants();
        let summary = variants
            .iter()
            .enumerate()
            .map(|(j, v)| SummaryRow::from_values(v, records.iter().map(|r| r.ise[j])))
            .collect();
        BenchReport {
            orders: self.config.orders.clone(),
            ratios: self.config.ratios.clone(),
            variants,
            records,
            summary,
            elapsed: start.elapsed(),
        }
    }
}

/// Simulates, filters and scores every path of `config`.
pub fn run_monte_carlo(config: &BenchConfig) -> Result<BenchReport> {
    Ok(MonteCarlo::new(config.clone())?.run())
}

/// Mean errors of the clipped filters over the ratios of `config`.
pub fn r_sweep(config: &BenchConfig) -> Result<Sweep> {
    config.validate_sweep()?;
    Ok(run_monte_carlo(config)?.sweep())
}
