//! Command-line front end: reads a model file, applies flag overrides, runs
//! one subcommand and writes its CSV tables plus `manifest.txt` into the
//! output directory.

use std::ffi::OsString;
use std::path::PathBuf;

use asymfilter_core::bench::{default_ratios, BenchConfig, MonteCarlo};
use asymfilter_core::expansion::{AsymptoticFilter, ExpansionLimits, DEFAULT_WICK_DEGREE_CAP};
use asymfilter_core::io::{write_atomic, CsvTable};
use asymfilter_core::linear::{
    cov_kernel, kalman_bucy, rts_smooth, solve_gamma, solve_phi, ConditionalSampler,
};
use asymfilter_core::sde::simulate_perturbed;
use asymfilter_core::{
    Error, ModelFile, NoiseSeed, PathPair, PerturbedLinearModel, Result, TimeGrid,
};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

#[derive(Debug, Parser)]
#[command(
    name = "asymfilter",
    version,
    about = "Continuous-time filtering and expansion filters"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one signal/observation path.
    Simulate(Common),
    /// Kalman-Bucy filter of the linear part along a simulated path.
    Filter(Common),
    /// Fixed-interval smoother over the whole grid.
    Smooth(Common),
    /// Draw paths from the conditional law of the signal given the observations.
    SampleCond(Common),
    /// Asymptotic expansion filter, raw and clipped.
    Expand(Common),
    /// Monte-Carlo integrated squared errors.
    Bench(Common),
    /// Mean integrated squared error over clipping ratios.
    Sweep(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Filter(_) => "filter",
            Command::Smooth(_) => "smooth",
            Command::SampleCond(_) => "sample-cond",
            Command::Expand(_) => "expand",
            Command::Bench(_) => "bench",
            Command::Sweep(_) => "sweep",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Simulate(c)
            | Command::Filter(c)
            | Command::Smooth(c)
            | Command::SampleCond(c)
            | Command::Expand(c)
            | Command::Bench(c)
            | Command::Sweep(c) => c,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Model file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub order: Option<usize>,
    /// Clipping ratio; repeat for several, `inf` for none.
    #[arg(long = "r")]
    pub r: Vec<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Initial-variance regularization of the smoother and sampler, which invert
/// `gamma` and fail on an exactly known start.
const DEFAULT_REG: f64 = 1e-8;

/// Model file with the flag overrides applied.
fn effective(common: &Common) -> Result<ModelFile> {
    let mut file = ModelFile::load(&common.config)?;
    let run = &mut file.run;
    run.seed = common.seed.or(run.seed);
    run.paths = common.paths.or(run.paths);
    run.order = common.order.or(run.order);
    if !common.r.is_empty() {
        run.r = Some(common.r.clone());
    }
    Ok(file)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

struct Run {
    file: ModelFile,
    model: PerturbedLinearModel,
    grid: TimeGrid,
    seed: u64,
    out: PathBuf,
    written: Vec<String>,
}

impl Run {
    fn order(&self) -> usize {
        self.file.run.order.unwrap_or(2)
    }

    fn limits(&self) -> ExpansionLimits {
        let order = self.order();
        let degree = self.model.g.degree().unwrap_or(0);
        let d = ExpansionLimits::default();
        ExpansionLimits {
            max_order: d.max_order.max(order),
            wick_degree_cap: DEFAULT_WICK_DEGREE_CAP.max(order * (degree + 1) + 1),
            ..d
        }
    }

    fn write(&mut self, name: &str, table: &CsvTable) -> Result<()> {
        table.write(&self.out.join(name))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn path(&mut self) -> Result<PathPair> {
        let path = simulate_perturbed(&self.model, &self.grid, NoiseSeed::new(self.seed, 0))?;
        self.write("path.csv", &path.to_csv())?;
        Ok(path)
    }

    fn bench_config(&self) -> BenchConfig {
        BenchConfig {
            model: self.model.clone(),
            grid: self.grid,
            n_paths: self.file.run.paths.unwrap_or(1000),
            base_seed: self.seed,
            orders: (1..=self.order()).collect(),
            ratios: self.file.run.r.clone().unwrap_or_else(default_ratios),
            limits: self.limits(),
        }
    }

    fn manifest(&self, command: &str, source: &[u8]) -> String {
        let text = self.file.to_text();
        let outputs: Vec<String> = self.written.iter().map(|w| format!("\"{w}\"")).collect();
        format!(
            "command = \"{command}\"\n\
             seed = {}\n\
             config_sha256 = \"{}\"\n\
             source_sha256 = \"{}\"\n\
             asymfilter_cli = \"{}\"\n\
             asymfilter_core = \"{}\"\n\
             outputs = [{}]\n\
             \n# effective configuration\n{text}",
            self.seed,
            sha256_hex(text.as_bytes()),
            sha256_hex(source),
            env!("CARGO_PKG_VERSION"),
            asymfilter_core::VERSION,
            outputs.join(", "),
        )
    }
}

fn execute(cmd: &Command) -> Result<()> {
    let common = cmd.common();
    let source = std::fs::read(&common.config)
        .map_err(|e| Error::Config(format!("{}: {e}", common.config.display())))?;
    let file = effective(common)?;
    let mut run = Run {
        model: file.perturbed()?,
        grid: file.grid()?,
        seed: file.run.seed.unwrap_or(0),
        out: common.out.clone(),
        written: Vec::new(),
        file,
    };
    let reg = run.file.run.reg.unwrap_or(DEFAULT_REG);
    match cmd {
        Command::Simulate(_) => {
            run.path()?;
        }
        Command::Filter(_) => {
            let path = run.path()?;
            let lin = run.model.linear_part(run.grid)?;
            let f = kalman_bucy(&lin, &solve_gamma(&lin)?, &path.y)?;
            run.write("filter.csv", &f.to_csv())?;
        }
        Command::Smooth(_) => {
            let path = run.path()?;
            let lin = run.model.linear_part(run.grid)?.regularized(reg);
            let f = kalman_bucy(&lin, &solve_gamma(&lin)?, &path.y)?;
            let s = rts_smooth(&lin, &f, run.grid.n_steps())?;
            run.write("smooth.csv", &s.to_csv())?;
        }
        Command::SampleCond(_) => {
            let path = run.path()?;
            let lin = run.model.linear_part(run.grid)?.regularized(reg);
            let horizon = run.grid.n_steps();
            let gamma = solve_gamma(&lin)?;
            let sampler = ConditionalSampler::new(
                &lin,
                &cov_kernel(&lin, &gamma, horizon)?,
                &solve_phi(&lin, horizon)?,
                &path.y,
            )?;
            let n = run.file.run.paths.unwrap_or(1);
            let mut header = vec!["t".to_string(), "mean".into()];
            header.extend((0..n).map(|i| format!("sample{i}")));
            let samples: Vec<Vec<f64>> = (0..n as u64)
                .map(|i| {
                    let mut z = vec![0.0; horizon + 1];
                    sampler.sample_scalar_into(NoiseSeed::new(run.seed, i), &mut z);
                    z
                })
                .collect();
            let mut table = CsvTable::new(&header);
            for k in 0..=horizon {
                let mut row = vec![run.grid.time(k), sampler.mean(k)[0]];
                row.extend(samples.iter().map(|z| z[k]));
                table.push(&row);
            }
            run.write("samples.csv", &table)?;
        }
        Command::Expand(_) => {
            let path = run.path()?;
            let filter = AsymptoticFilter::new(&run.model, run.grid, run.order(), &run.limits())?;
            eprintln!("expansion: {} states", filter.system().len());
            let rs = run.file.run.r.clone().unwrap_or_default();
            let result = filter.run(&path.y, &rs)?;
            run.write("expansion.csv", &result.to_csv())?;
        }
        Command::Bench(_) | Command::Sweep(_) => {
            let cfg = run.bench_config();
            let sweep_only = matches!(cmd, Command::Sweep(_));
            if sweep_only {
                cfg.validate_sweep()?;
            }
            let report = MonteCarlo::new(cfg)?.run();
            eprintln!(
                "bench: {} paths in {:.1} s, {} complete",
                report.records.len(),
                report.elapsed.as_secs_f64(),
                report.n_complete()
            );
            if !sweep_only {
                run.write("records.csv", &report.records_csv())?;
                run.write("summary.csv", &report.summary_csv())?;
            }
            run.write("sweep.csv", &report.sweep().to_csv())?;
        }
    }
    write_atomic(
        &run.out.join("manifest.txt"),
        &run.manifest(cmd.name(), &source),
    )
}

/// Exit code of an error: 2 for numerical failures, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() || matches!(err, Error::Contract(_)) {
        2
    } else {
        1
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("asymfilter {}: {e}", cli.command.name());
            exit_code(&e)
        }
    }
}
