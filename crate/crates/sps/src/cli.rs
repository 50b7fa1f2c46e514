//! Command-line front end: configure a run, execute one-pass or two-pass
//! sampling or a schedule replay, and emit human-readable tables plus
//! machine-readable JSON reports.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 data or I/O error, 4 numerical abort (weight collapse, singular
//! proposal covariance), 5 mixing failure (mutation step cap reached).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{self, DatasetSpec, LoadOptions};
use crate::engine::{self, Monitor, Resampling, RunConfig};
use crate::error::{Error, Result};
use crate::model::{GaussianPrior, LogitData, DEFAULT_CONDITION_LIMIT};
use crate::oracle;
use crate::report::RunReport;
use crate::rng::{stream, Phase};

#[derive(Parser)]
#[command(
    name = "sps",
    version,
    about = "Sequential posterior sampler for Bayesian multinomial logit models"
)]
pub struct CliArgs {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a dataset, build the g-prior, and run the sampler.
    Run(Box<RunArgs>),
    /// Run a tiny built-in model and check the sampler against the
    /// quadrature oracle.
    Verify(VerifyArgs),
    /// Render a JSON report file as a text table.
    Render(RenderArgs),
}

#[derive(Args)]
struct RunArgs {
    /// CSV data file: outcome label first, covariates following.
    #[arg(long)]
    data: PathBuf,

    /// Validate against this registry dataset (also supplies the default g).
    #[arg(long)]
    registry: Option<String>,

    /// Outcome count C (required when --registry is not used).
    #[arg(long)]
    outcomes: Option<usize>,

    /// Prior scale g (default: the registry's modal g).
    #[arg(long)]
    g: Option<f64>,

    /// Number of particle groups.
    #[arg(long = "J", default_value_t = 10)]
    groups: usize,

    /// Particles per group.
    #[arg(long = "N", default_value_t = 1000)]
    per_group: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Write the JSON report here (two-pass runs write <out>.pass1/.pass2).
    #[arg(long)]
    out: Option<PathBuf>,

    /// ESS/(J·N) threshold triggering a cycle break.
    #[arg(long, default_value_t = 0.5)]
    ess: f64,

    /// RNE target for intermediate mutation phases.
    #[arg(long = "k-inter", default_value_t = 0.35)]
    k_inter: f64,

    /// RNE target for the final mutation phase.
    #[arg(long = "k-final", default_value_t = 0.9)]
    k_final: f64,

    /// Safety cap on mutation steps per cycle.
    #[arg(long, default_value_t = 1000)]
    max_m_steps: usize,

    /// Resampling scheme: residual or multinomial.
    #[arg(long, default_value = "residual")]
    resampling: String,

    /// Monitor expressions (logodds:C, coord:I, coordmean); repeatable.
    #[arg(long = "monitor")]
    monitors: Vec<String>,

    /// Run the two-pass algorithm (adaptive, then replay with fresh
    /// randomness).
    #[arg(long)]
    two_pass: bool,

    /// Replay a recorded schedule instead of adapting.
    #[arg(long)]
    schedule: Option<PathBuf>,

    /// Worker threads (affects speed only, never results).
    #[arg(long)]
    threads: Option<usize>,

    /// Skip one header line in the CSV.
    #[arg(long)]
    header: bool,

    /// Prepend a constant column to the covariates.
    #[arg(long)]
    add_intercept: bool,

    /// Condition-number limit for X'X in the g-prior.
    #[arg(long)]
    condition_limit: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Built-in toy model: binomial or binomial-intercept.
    #[arg(long, default_value = "binomial")]
    toy: String,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long = "J", default_value_t = 10)]
    groups: usize,

    #[arg(long = "N", default_value_t = 1000)]
    per_group: usize,
}

#[derive(Args)]
struct RenderArgs {
    /// Report JSON file (bare report or {meta, report} envelope).
    report: PathBuf,
}

/// Envelope written to disk: wall-clock metadata kept apart from the
/// deterministic report body.
#[derive(Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub meta: ReportMeta,
    pub report: RunReport,
}

#[derive(Serialize, Deserialize)]
pub struct ReportMeta {
    pub created: String,
    pub generator: String,
}

impl ReportEnvelope {
    pub fn wrap(report: RunReport) -> Self {
        Self {
            meta: ReportMeta {
                created: chrono::Utc::now().to_rfc3339(),
                generator: format!("sps {}", env!("CARGO_PKG_VERSION")),
            },
            report,
        }
    }
}

/// Entry point: parse arguments, dispatch, and map errors to exit codes.
pub fn main() -> i32 {
    let args = CliArgs::parse();
    match dispatch(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(args: CliArgs) -> Result<i32> {
    match args.command {
        Command::Run(run) => run_command(&run),
        Command::Verify(verify) => verify_command(&verify),
        Command::Render(render) => render_command(&render.report),
    }
}

fn run_command(args: &RunArgs) -> Result<i32> {
    if args.two_pass && args.schedule.is_some() {
        return Err(Error::Config(
            "--two-pass and --schedule are mutually exclusive".into(),
        ));
    }

    // Dataset spec: registry entry or ad hoc with explicit outcome count.
    let mut spec = match &args.registry {
        Some(name) => data::registry_lookup(name).ok_or_else(|| {
            Error::Data(format!(
                "unknown dataset '{name}' (known: {})",
                data::registry()
                    .iter()
                    .map(|d| d.name.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })?,
        None => {
            let outcomes = args.outcomes.ok_or_else(|| {
                Error::Config("--outcomes is required when --registry is not used".into())
            })?;
            DatasetSpec::ad_hoc(
                args.data
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "data".into())
                    .as_str(),
                outcomes,
            )
        }
    };
    if args.add_intercept {
        spec.add_intercept = true;
    }

    let dataset = data::load_csv(&args.data, &spec, LoadOptions { header: args.header })?;

    let g = args
        .g
        .or(spec.modal_g)
        .ok_or_else(|| Error::Config("--g is required for ad hoc datasets".into()))?;

    let supplement = data::design_supplement(dataset.covariates(), &spec);
    if spec.supplement_empty_cell && supplement.added_rows == 0 {
        eprintln!(
            "warning: dataset '{}' requests an empty-cell supplement but no empty cell was found",
            spec.name
        );
    }
    let prior = GaussianPrior::g_prior_with_condition_limit(
        &supplement.matrix,
        spec.outcomes,
        g,
        args.condition_limit.unwrap_or(DEFAULT_CONDITION_LIMIT),
    )?;

    let cfg = build_config(args)?;

    let execute = || -> Result<i32> {
        if let Some(schedule_path) = &args.schedule {
            let text = std::fs::read_to_string(schedule_path)?;
            let schedule = engine::CycleSchedule::from_json(&text)?;
            let (_, report) = engine::run_nonadaptive(&dataset, &prior, &cfg, &schedule)?;
            print!("{}", render_report(&report));
            if let Some(out) = &args.out {
                write_report(out, &report)?;
            }
        } else if args.two_pass {
            let two = engine::run_two_pass(&dataset, &prior, &cfg)?;
            println!("== pass 1 (adaptive) ==");
            print!("{}", render_report(&two.pass1));
            println!("== pass 2 (nonadaptive replay) ==");
            print!("{}", render_report(&two.pass2));
            if let Some(out) = &args.out {
                write_report(&suffixed(out, "pass1"), &two.pass1)?;
                write_report(&suffixed(out, "pass2"), &two.pass2)?;
                let schedule_path = suffixed(out, "schedule");
                std::fs::write(&schedule_path, two.schedule.to_json()?)?;
            }
        } else {
            let (_, schedule, report) = engine::run_adaptive(&dataset, &prior, &cfg)?;
            print!("{}", render_report(&report));
            if let Some(out) = &args.out {
                write_report(out, &report)?;
                std::fs::write(suffixed(out, "schedule"), schedule.to_json()?)?;
            }
        }
        Ok(0)
    };

    match args.threads {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(execute)
        }
        None => execute(),
    }
}

fn build_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::new(args.groups, args.per_group, args.seed);
    cfg.ess_threshold = args.ess;
    cfg.rne_inter = args.k_inter;
    cfg.rne_final = args.k_final;
    cfg.max_m_steps = args.max_m_steps;
    cfg.resampling = args
        .resampling
        .parse::<Resampling>()
        .map_err(Error::Config)?;
    for m in &args.monitors {
        cfg.monitors.push(m.parse::<Monitor>().map_err(Error::Config)?);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn suffixed(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    let ext = path.extension().map(|s| s.to_string_lossy().into_owned());
    let name = match (stem, ext) {
        (Some(stem), Some(ext)) => format!("{stem}.{tag}.{ext}"),
        (Some(stem), None) => format!("{stem}.{tag}"),
        _ => format!("report.{tag}.json"),
    };
    path.with_file_name(name)
}

fn write_report(path: &Path, report: &RunReport) -> Result<()> {
    let envelope = ReportEnvelope::wrap(report.clone());
    std::fs::write(path, serde_json::to_string_pretty(&envelope)?)?;
    Ok(())
}

/// Render a report as the standard text table: one line per functional
/// ("mean (sd) [nse, rne]"), the log-ML line, and the cycle summary.
pub fn render_report(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "algorithm: {}  J: {}  N: {}  seed: {}",
        report.algorithm, report.config.groups, report.config.per_group, report.config.seed
    );
    for f in &report.functions {
        match f.rne {
            Some(rne) => {
                let _ = writeln!(
                    out,
                    "{}: {:.4} ({:.4}) [{:.3e}, {:.2}]",
                    f.name, f.mean, f.sd, f.nse, rne
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "{}: {:.4} ({:.4}) [{:.3e}, rne: n/a]",
                    f.name, f.mean, f.sd, f.nse
                );
            }
        }
    }
    let _ = writeln!(
        out,
        "log ML: {:.4} [{:.3e}]",
        report.log_ml.value, report.log_ml.nse
    );
    let _ = writeln!(
        out,
        "cycles: {}  M iterations: {}  final h: {:.2}",
        report.schedule_summary.cycles,
        report.total_m_steps(),
        report.schedule_summary.final_h
    );
    for w in &report.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

fn render_command(path: &Path) -> Result<i32> {
    let text = std::fs::read_to_string(path)?;
    let report = match serde_json::from_str::<ReportEnvelope>(&text) {
        Ok(envelope) => {
            if envelope.report.schema_version != crate::report::REPORT_SCHEMA_VERSION {
                return Err(Error::Schedule(format!(
                    "unsupported report schema version {}",
                    envelope.report.schema_version
                )));
            }
            envelope.report
        }
        Err(_) => RunReport::from_json(&text)?,
    };
    print!("{}", render_report(&report));
    Ok(0)
}

/// Deterministic toy datasets for self-verification.
///
/// The data are generated from a fixed internal seed, so the only
/// randomness under the user's control is the sampler seed.
pub fn toy_dataset(toy: &str) -> Result<(LogitData, GaussianPrior)> {
    const TOY_DATA_SEED: u64 = 0x5053_5053; // fixed: the toy is part of the interface
    let t = 30;
    let mut rng = stream(TOY_DATA_SEED, 0, Phase::Init, 0, 0, 0);
    use rand::Rng as _;
    match toy {
        "binomial" => {
            let mut xs = Vec::with_capacity(t);
            let mut ys = Vec::with_capacity(t);
            for _ in 0..t {
                let x: f64 = rng.gen_range(-2.0..2.0);
                let p = 1.0 / (1.0 + (-0.8 * x).exp());
                ys.push(if rng.gen::<f64>() < p { 1 } else { 2 });
                xs.push(x);
            }
            let x = DMatrix::from_column_slice(t, 1, &xs);
            let prior = GaussianPrior::g_prior(&x, 2, 0.25)?;
            Ok((LogitData::new(ys, x, 2)?, prior))
        }
        "binomial-intercept" => {
            let mut rows = Vec::with_capacity(2 * t);
            let mut ys = Vec::with_capacity(t);
            for _ in 0..t {
                let x: f64 = rng.gen_range(-2.0..2.0);
                let eta = -0.4 + 0.9 * x;
                let p = 1.0 / (1.0 + (-eta).exp());
                ys.push(if rng.gen::<f64>() < p { 1 } else { 2 });
                rows.push(1.0);
                rows.push(x);
            }
            let x = DMatrix::from_row_slice(t, 2, &rows);
            let prior = GaussianPrior::g_prior(&x, 2, 0.25)?;
            Ok((LogitData::new(ys, x, 2)?, prior))
        }
        other => Err(Error::Config(format!(
            "unknown toy model '{other}' (expected binomial or binomial-intercept)"
        ))),
    }
}

fn verify_command(args: &VerifyArgs) -> Result<i32> {
    let (dataset, prior) = toy_dataset(&args.toy)?;
    let cfg = RunConfig::new(args.groups, args.per_group, args.seed);
    let (_, _, report) = engine::run_adaptive(&dataset, &prior, &cfg)?;

    let xbar = dataset.covariate_mean();
    let q = oracle::quadrature_posterior(
        &dataset,
        &prior,
        |theta| theta.iter().zip(xbar.iter()).map(|(a, b)| a * b).sum(),
        dataset.t(),
        401,
    )?;

    let moment = &report.functions[0]; // logodds[1]@xbar
    let mean_err = (moment.mean - q.mean).abs();
    let ml_err = (report.log_ml.value - q.log_ml).abs();
    let mean_ok = mean_err <= 3.0 * moment.nse;
    let ml_ok = ml_err <= 3.0 * report.log_ml.nse;

    println!("toy: {}  seed: {}", args.toy, args.seed);
    println!(
        "posterior mean  sampler: {:.6}  quadrature: {:.6}  |diff|: {:.2e}  3×NSE: {:.2e}  {}",
        moment.mean,
        q.mean,
        mean_err,
        3.0 * moment.nse,
        if mean_ok { "PASS" } else { "FAIL" }
    );
    println!(
        "log ML          sampler: {:.6}  quadrature: {:.6}  |diff|: {:.2e}  3×NSE: {:.2e}  {}",
        report.log_ml.value,
        q.log_ml,
        ml_err,
        3.0 * report.log_ml.nse,
        if ml_ok { "PASS" } else { "FAIL" }
    );
    Ok(if mean_ok && ml_ok { 0 } else { 1 })
}
