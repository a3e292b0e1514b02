use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::warn;
use vecshuffle_core::accuracy::{bound_mse_general, bound_mse_t1};
use vecshuffle_core::audit::{monte_carlo_audit, AuditOptions, NeighborPair};
use vecshuffle_core::params::compose_epsilon_prime;
use vecshuffle_harness::config::{
    parse_values, CalibrationMode, ExperimentConfig, KChoice, Overrides,
};
use vecshuffle_harness::dataset::{IngestOptions, Normalize, Table};
use vecshuffle_harness::output::emit_outputs;
use vecshuffle_harness::sweep::{plan_point, run_sweep};
use vecshuffle_harness::{HarnessError, Result};

#[derive(Parser, Debug)]
#[command(
    name = "vecshuffle",
    version,
    about = "Shuffle-model vector summation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the calibration for one parameter set.
    Params(Flags),
    /// Run one experiment point.
    Run(Flags),
    /// Sweep one parameter.
    Sweep(Flags),
    /// Monte-Carlo privacy audit of a tiny instance.
    Audit(AuditFlags),
    /// Validate a dataset file.
    IngestCheck(Flags),
}

#[derive(Args, Debug, Clone, Default)]
struct Flags {
    /// Flat key = value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    /// Positive integer or "auto".
    #[arg(long)]
    k: Option<KChoice>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// One of t, k, d, n, eps.
    #[arg(long)]
    axis: Option<String>,
    /// Comma-separated axis values.
    #[arg(long)]
    values: Option<String>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    drop_label: bool,
    /// clamp or minmax.
    #[arg(long)]
    normalize: Option<String>,
    /// theorem1, t1 or manual.
    #[arg(long)]
    calibration: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct AuditFlags {
    #[command(flatten)]
    flags: Flags,
    /// Estimator delta; defaults to the budget's.
    #[arg(long)]
    audit_delta: Option<f64>,
}

impl Flags {
    fn overrides(&self) -> Result<Overrides> {
        Ok(Overrides {
            d: self.d,
            k: self.k,
            n: self.n,
            t: self.t,
            eps: self.eps,
            delta: self.delta,
            axis: self.axis.as_deref().map(str::parse).transpose()?,
            values: self.values.as_deref().map(parse_values).transpose()?,
            trials: self.trials,
            seed: self.seed,
            dataset: self.dataset.clone(),
            drop_label: self.drop_label.then_some(true),
            normalize: self
                .normalize
                .as_deref()
                .map(str::parse::<Normalize>)
                .transpose()?,
            calibration: self.calibration.clone(),
            gamma: self.gamma,
            out_dir: self.out_dir.clone(),
        })
    }

    fn config(&self, base: ExperimentConfig) -> Result<ExperimentConfig> {
        let file = match &self.config {
            Some(path) => Overrides::read_file(path)?,
            None => Overrides::default(),
        };
        let mut config = base;
        config.apply(&file.merged(self.overrides()?))?;
        Ok(config)
    }
}

fn single(config: &ExperimentConfig) -> Result<()> {
    if config.axis.is_some() {
        return Err(HarnessError::Usage(
            "this command takes no sweep axis; use `sweep`".into(),
        ));
    }
    Ok(())
}

fn params(flags: &Flags) -> Result<()> {
    let config = flags.config(ExperimentConfig::default())?;
    single(&config)?;
    if let Some(advice) = config.delta_advice() {
        warn!("{advice}");
    }
    let point = plan_point(&config, 0, f64::NAN)?;
    let plan = point.plan?;
    let p = plan.params;
    let b = plan.budget;
    println!("regime={:?}", b.regime());
    println!("calibration={:?}", plan.calibration);
    println!("d={} k={} n={} t={}", p.d, p.k, p.n, p.t);
    println!("eps={} delta={}", b.epsilon(), b.delta());
    println!("gamma={}", p.gamma);
    if p.t > 1 {
        let c = compose_epsilon_prime(&b, p.t)?;
        println!(
            "eps_prime={} delta_prime={}",
            c.epsilon_prime, c.delta_prime
        );
    }
    match bound_mse_general(&p, &b) {
        Ok(r) => println!(
            "bound_mse_general={} sigma_general={}",
            r.mse_bound, r.sigma_bound
        ),
        Err(e) => println!("bound_mse_general=unavailable ({e})"),
    }
    if p.t == 1 {
        match bound_mse_t1(&p, &b) {
            Ok(r) => println!("bound_mse_t1={} sigma_t1={}", r.mse_bound, r.sigma_bound),
            Err(e) => println!("bound_mse_t1=unavailable ({e})"),
        }
    }
    Ok(())
}

fn run(flags: &Flags, sweep: bool) -> Result<()> {
    let config = flags.config(ExperimentConfig::default())?;
    if sweep && config.axis.is_none() {
        return Err(HarnessError::Usage(
            "sweep needs --axis and --values".into(),
        ));
    }
    if !sweep {
        single(&config)?;
    }
    let results = run_sweep(&config)?;
    let artifacts = emit_outputs(&results, &config.out_dir)?;
    let label = |value: f64| {
        if value.is_nan() {
            "point".to_string()
        } else {
            format!("{}={value}", results.axis_name())
        }
    };
    for (point, plan, stats) in results.feasible() {
        println!(
            "{} k={} gamma={:.6} mean_mse={:.6} stderr={:.6} bound_mse={}",
            label(point.value),
            plan.params.k,
            plan.params.gamma,
            stats.mean,
            stats.stderr,
            plan.bound_mse
                .map_or_else(|| "n/a".into(), |b| format!("{b:.6}"))
        );
    }
    for p in &results.points {
        if let Err(reason) = &p.point.plan {
            println!("{} skipped: {reason}", label(p.point.value));
        }
    }
    if let Some(fit) = results.fit {
        println!(
            "fit: mse ~ {:.4e} * x^{:.4} (r2 {:.4})",
            fit.prefactor, fit.exponent, fit.r_squared
        );
    }
    println!("wrote {}", artifacts.trials.display());
    println!("wrote {}", artifacts.summary.display());
    if let Some(plot) = artifacts.plot {
        println!("wrote {}", plot.display());
    }
    Ok(())
}

fn audit(flags: &AuditFlags) -> Result<()> {
    let base = ExperimentConfig {
        d: 1,
        k: KChoice::Fixed(1),
        n: 10,
        t: 1,
        eps: 0.9,
        delta: 0.9,
        trials: 1_000_000,
        calibration: CalibrationMode::Theorem1,
        ..ExperimentConfig::default()
    };
    let config = flags.flags.config(base)?;
    single(&config)?;
    let point = plan_point(&config, 0, f64::NAN)?;
    let plan = point.plan?;
    let pair = NeighborPair::extreme(plan.params.n, plan.params.d)?;
    let mut options = AuditOptions::new(config.trials, config.seed);
    options.delta = flags.audit_delta;
    let v = monte_carlo_audit(&pair, &plan.params, &plan.budget, &options)?;
    println!("gamma={}", plan.params.gamma);
    println!(
        "empirical_eps={} lower_eps={} theoretical_eps={} delta={}",
        v.empirical_epsilon, v.lower_epsilon, v.theoretical_epsilon, v.delta
    );
    println!(
        "trials={} cells={} hard_failure={}",
        v.trials, v.cells, v.hard_failure
    );
    if v.pass {
        println!("PASS");
        Ok(())
    } else {
        println!("FAIL");
        Err(HarnessError::AuditFailed(format!(
            "lower epsilon {} exceeds {}",
            v.lower_epsilon, v.theoretical_epsilon
        )))
    }
}

fn ingest_check(flags: &Flags) -> Result<()> {
    let config = flags.config(ExperimentConfig::default())?;
    let path = config
        .dataset
        .as_ref()
        .ok_or_else(|| HarnessError::Usage("ingest-check needs --dataset".into()))?;
    let table = Table::read_csv(
        path,
        IngestOptions {
            drop_label: config.drop_label,
            normalize: config.normalize,
        },
    )?;
    let matrix = table.shape(config.n, config.d)?;
    let (lo, hi) = matrix
        .rows
        .iter()
        .flat_map(|r| r.values())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    println!("source={}", matrix.provenance.source);
    println!(
        "file_rows={} file_columns={}",
        table.rows().len(),
        table.columns()
    );
    println!("n={} d={} min={lo} max={hi}", matrix.n(), matrix.dim());
    println!("normalization={}", matrix.provenance.normalization);
    for note in &matrix.provenance.notes {
        println!("note: {note}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Params(f) => params(f),
        Command::Run(f) => run(f, false),
        Command::Sweep(f) => run(f, true),
        Command::Audit(f) => audit(f),
        Command::IngestCheck(f) => ingest_check(f),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
