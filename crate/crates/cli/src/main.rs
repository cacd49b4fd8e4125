use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use qtur_core::bounds::{BoundReport, BoundStatus};
use qtur_core::counting::{activity_curve, counting_moments, evolve_on_grid, CountingObservable, TimeGrid};
use qtur_core::engine::{build_generator, steady_state};
use qtur_core::experiments::cic::{run_cic_suite, CheckStatus, CicOptions};
use qtur_core::experiments::config::{Experiment, InitialState, ModelSpec, RunConfig, SweepConfig};
use qtur_core::experiments::report::{bounds_report, ReportOptions};
use qtur_core::experiments::sweep::run_sweep;
use qtur_core::model::MatrixJson;
use qtur_core::parallel::{threads_from_env, with_threads};
use qtur_core::trajectory::dump::{fmt_float, write_trajectories};
use qtur_core::trajectory::{estimate_records, PathEvaluator, Sampler, SeedPolicy};
use qtur_core::LindbladModel;

#[derive(Parser)]
#[command(name = "qtur", version, about = "Monitored Lindblad dynamics and uncertainty-relation checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the steady state as JSON.
    SteadyState(RunArgs),
    /// Tabulate ρ(t), activity and entropy production on a uniform grid.
    Evolve {
        #[command(flatten)]
        run: RunArgs,
        /// Grid points including t = 0.
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Exact mean and variance of a counting observable.
    Moments(RunArgs),
    /// Sample jump trajectories and dump them as CSV.
    Trajectories(RunArgs),
    /// Evaluate every applicable bound for one model.
    Bounds(RunArgs),
    /// Random sweep of the activity bound on the degenerate-excited-state model.
    SweepKur(SweepArgs),
    /// Random sweep of the entropy-production bound on the paired model.
    SweepEp(SweepArgs),
    /// Check that the model and its H = 0 twin agree.
    VerifyCic {
        #[command(flatten)]
        run: RunArgs,
        /// Skip the jump-count histogram comparison.
        #[arg(long)]
        no_k_test: bool,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in model: da, ep or poisson.
    #[arg(long, conflicts_with = "model_file")]
    model: Option<String>,
    /// Model JSON file.
    #[arg(long)]
    model_file: Option<PathBuf>,
    /// Comma-separated rates for the built-in model.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    rates: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    omega_e: f64,
    /// steady, ground, mixed or basis:<k>
    #[arg(long)]
    initial_state: Option<String>,
    #[arg(long)]
    tau: Option<f64>,
    /// Comma-separated counting weights, one per channel.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    weights: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    grid_points: Option<usize>,
    /// Keep H in the dynamics (sampling uses V instead of the damped operator).
    #[arg(long, overrides_with = "incoherent")]
    coherent: bool,
    /// Drop H from the dynamics.
    #[arg(long)]
    incoherent: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trajectories: Option<usize>,
    /// Evaluate the finite-time bounds from the initial state instead of the steady state.
    #[arg(long)]
    transient: bool,
    #[arg(long)]
    initial_state: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Run {
    cfg: RunConfig,
    model: LindbladModel,
    rho0: qtur_core::DensityMatrix,
    coherent: Option<bool>,
}

impl RunArgs {
    fn resolve(&self) -> Result<Run> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p).with_context(|| format!("reading {}", p.display()))?,
            None => RunConfig::default(),
        };
        if let Some(name) = &self.model {
            cfg.model = builtin_model(name, self.omega_e, self.rates.as_deref())?;
        } else if let Some(path) = &self.model_file {
            cfg.model = ModelSpec::File { path: path.clone() };
        } else if self.rates.is_some() {
            bail!("--rates needs --model");
        }
        if let Some(s) = &self.initial_state {
            cfg.initial_state = InitialState::parse(s)?;
        }
        if let Some(tau) = self.tau {
            cfg.tau = tau;
        }
        if let Some(w) = &self.weights {
            cfg.weights = Some(w.clone());
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(n) = self.trajectories {
            cfg.trajectories = n;
        }
        if let Some(n) = self.grid_points {
            cfg.grid_points = n;
        }
        if self.out.is_some() {
            cfg.output = self.out.clone();
        }
        let coherent = match (self.coherent, self.incoherent) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        };
        if let Some(c) = coherent {
            cfg.coherent = c;
        }
        if !(cfg.tau > 0.0 && cfg.tau.is_finite()) {
            bail!("tau must be positive");
        }
        let model = cfg.model.build()?;
        let rho0 = cfg.initial_state.build(&model)?;
        Ok(Run { cfg, model, rho0, coherent })
    }
}

impl Run {
    /// Deterministic quantities keep H unless `--incoherent` is given.
    fn dynamics_coherent(&self) -> bool {
        self.coherent.unwrap_or(true)
    }

    fn observable(&self) -> Result<CountingObservable> {
        Ok(match &self.cfg.weights {
            Some(w) => CountingObservable::new(w.clone())?,
            None => CountingObservable::activity(self.model.n_channels()),
        })
    }
}

fn builtin_model(name: &str, omega_e: f64, rates: Option<&[f64]>) -> Result<ModelSpec> {
    let fixed = |n: usize, default: f64| -> Result<Vec<f64>> {
        match rates {
            None => Ok(vec![default; n]),
            Some(r) if r.len() == n => Ok(r.to_vec()),
            Some(r) => bail!("model {name} takes {n} rates, got {}", r.len()),
        }
    };
    Ok(match name {
        "da" => ModelSpec::Da { omega_e, rates: fixed(4, 0.5)?.try_into().expect("length checked") },
        "ep" => ModelSpec::Ep { omega_e, rates: fixed(6, 0.5)?.try_into().expect("length checked") },
        "poisson" => ModelSpec::Poisson { gamma: fixed(1, 1.0)?[0], paired: false },
        other => bail!("unknown model '{other}' (expected da, ep or poisson)"),
    })
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(path: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn steady_state_cmd(run: &Run) -> Result<bool> {
    let rho = steady_state(&build_generator(&run.model, run.dynamics_coherent())?)?;
    let value = json!({
        "dim": rho.dim(),
        "coherent": run.dynamics_coherent(),
        "rho": MatrixJson::from(rho.matrix()),
        "von_neumann_entropy": rho.von_neumann_entropy()?,
    });
    write_json(run.cfg.output.as_deref(), &value)?;
    Ok(true)
}

fn evolve_cmd(run: &Run, points: usize) -> Result<bool> {
    let coherent = run.dynamics_coherent();
    let grid = TimeGrid::uniform(run.cfg.tau, points)?;
    let states = evolve_on_grid(&build_generator(&run.model, coherent)?, &run.rho0, &grid)?;
    let curve = activity_curve(&run.model, coherent, &run.rho0, &grid)?;
    let d = run.model.dim();

    let mut out = output(run.cfg.output.as_deref())?;
    let mut header = vec!["t".to_string()];
    for i in 0..d {
        for j in 0..d {
            header.push(format!("re_{i}_{j}"));
            header.push(format!("im_{i}_{j}"));
        }
    }
    header.extend(["activity_rate", "activity"].map(String::from));
    if curve.entropy.is_some() {
        header.extend(["entropy_flux", "entropy_production"].map(String::from));
    }
    writeln!(out, "{}", header.join(","))?;
    for (k, rho) in states.iter().enumerate() {
        let mut row = vec![fmt_float(curve.times[k])];
        for i in 0..d {
            for j in 0..d {
                row.push(fmt_float(rho.matrix()[(i, j)].re));
                row.push(fmt_float(rho.matrix()[(i, j)].im));
            }
        }
        row.push(fmt_float(curve.activity_rate[k]));
        row.push(fmt_float(curve.activity[k]));
        if let (Some(flux), Some(entropy)) = (&curve.entropy_flux, &curve.entropy) {
            row.push(fmt_float(flux[k]));
            row.push(fmt_float(entropy[k]));
        }
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(true)
}

fn moments_cmd(run: &Run) -> Result<bool> {
    let obs = run.observable()?;
    let m = counting_moments(&run.model, run.dynamics_coherent(), &run.rho0, &obs, run.cfg.tau)?;
    let value = json!({
        "tau": run.cfg.tau,
        "coherent": run.dynamics_coherent(),
        "weights": obs.weights(),
        "mean": m.mean,
        "second_moment": m.second_moment,
        "variance": m.variance,
    });
    write_json(run.cfg.output.as_deref(), &value)?;
    Ok(true)
}

fn trajectories_cmd(run: &Run) -> Result<bool> {
    let obs = run.observable()?;
    let sampler = Sampler::new(&run.model, &run.rho0, run.cfg.tau, run.cfg.coherent)?;
    let records = sampler.sample_ensemble(&SeedPolicy::new(run.cfg.seed), run.cfg.trajectories)?;
    let entropies = if run.model.entropy_changes().is_ok() {
        let evaluator = PathEvaluator::new(&run.model, &sampler)?;
        Some(records.iter().map(|r| evaluator.record_entropy(r).ok()).collect::<Vec<_>>())
    } else {
        None
    };
    let mut out = output(run.cfg.output.as_deref())?;
    write_trajectories(&mut out, &records, &obs, entropies.as_deref())?;
    out.flush()?;
    let est = estimate_records(&records, &obs, &[])?;
    eprintln!(
        "{} trajectories: mean {:.6e} +- {:.2e}, variance {:.6e} +- {:.2e}",
        records.len(),
        est.mean,
        est.mean_stderr,
        est.variance,
        est.variance_stderr
    );
    Ok(true)
}

fn bounds_cmd(run: &Run) -> Result<bool> {
    let obs = run.observable()?;
    let opts = ReportOptions { trajectories: run.cfg.trajectories, seed: run.cfg.seed, grid_points: run.cfg.grid_points };
    let reports = bounds_report(&run.model, &run.rho0, &obs, run.cfg.tau, &opts)?;
    let mut out = output(run.cfg.output.as_deref())?;
    writeln!(out, "{}", BoundReport::CSV_HEADER.join(","))?;
    for r in &reports {
        writeln!(out, "{}", r.csv_row().join(","))?;
    }
    out.flush()?;
    let mut ok = true;
    for r in &reports {
        eprintln!("{:<24} {:?}", r.name, r.status);
        ok &= r.status != BoundStatus::Violated;
    }
    Ok(ok)
}

fn sweep_cmd(args: &SweepArgs, experiment: Experiment) -> Result<bool> {
    let mut cfg = match &args.config {
        Some(p) => SweepConfig::from_file(p).with_context(|| format!("reading {}", p.display()))?,
        None => SweepConfig::default(),
    };
    cfg.experiment = experiment;
    if let Some(n) = args.draws {
        cfg.n_draws = n;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.trajectories {
        cfg.trajectories = n;
    }
    if args.transient {
        cfg.transient = true;
    }
    if let Some(s) = &args.initial_state {
        cfg.initial_state = InitialState::parse(s)?;
    }
    if args.out.is_some() {
        cfg.output = args.out.clone();
    }
    cfg.validate()?;
    let result = run_sweep(&cfg)?;
    let mut out = output(cfg.output.as_deref())?;
    result.write_csv(&mut out)?;
    out.flush()?;
    let summary = result.summary();
    eprintln!("{summary}");
    Ok(summary.full_violated == 0)
}

fn verify_cic_cmd(run: &Run, no_k_test: bool) -> Result<bool> {
    let current = match &run.cfg.weights {
        Some(w) => Some(CountingObservable::current(&run.model, w.clone())?),
        None => None,
    };
    let opts = CicOptions {
        trajectories: run.cfg.trajectories,
        seed: run.cfg.seed,
        grid_points: run.cfg.grid_points,
        k_test: !no_k_test,
        ..CicOptions::default()
    };
    let report = run_cic_suite(&run.model, &run.rho0, run.cfg.tau, current.as_ref(), &opts)?;
    for c in &report.checks {
        let tag = match c.status {
            CheckStatus::Passed => "PASS",
            CheckStatus::Failed => "FAIL",
            CheckStatus::Skipped => "SKIP",
        };
        println!("{tag} {:<24} {:.3e} (threshold {:.1e}) {}", c.name, c.measured, c.threshold, c.detail);
    }
    if let Some(path) = &run.cfg.output {
        write_json(Some(path), &serde_json::to_value(&report)?)?;
    }
    Ok(report.all_passed())
}

fn dispatch(command: &Command) -> Result<bool> {
    match command {
        Command::SteadyState(a) => steady_state_cmd(&a.resolve()?),
        Command::Evolve { run, points } => evolve_cmd(&run.resolve()?, *points),
        Command::Moments(a) => moments_cmd(&a.resolve()?),
        Command::Trajectories(a) => trajectories_cmd(&a.resolve()?),
        Command::Bounds(a) => bounds_cmd(&a.resolve()?),
        Command::SweepKur(a) => sweep_cmd(a, Experiment::KurSweep),
        Command::SweepEp(a) => sweep_cmd(a, Experiment::EpSweep),
        Command::VerifyCic { run, no_k_test } => verify_cic_cmd(&run.resolve()?, *no_k_test),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match with_threads(threads_from_env(), || dispatch(&cli.command)).map_err(anyhow::Error::from).and_then(|r| r) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
