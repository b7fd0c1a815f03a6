//! Command-line front end: argument types, the three subcommands and the run
//! manifest.
//!
//! Every flag can also be set through a `BEARING_HOMING_*` environment
//! variable (`BEARING_HOMING_SEED`, `BEARING_HOMING_OUT_DIR`, ...).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dynamics::POSE_DIM;
use crate::filters::ProcessNoise;
use crate::harness::log::read_csv_trajectory;
use crate::harness::run::initial_observability_warning;
use crate::harness::stats::{format_table, rmse_from_rows, Summary};
use crate::harness::{aggregate_replicates, run_scenario, ScenarioConfig, TrajectoryLog};
use crate::observability::{observability_report, sample_generic_states, DEFAULT_RANK_TOL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FILTER: i32 = 3;

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Parser)]
#[command(name = "bearing-homing", version, about = "Bearing-only homing simulator and estimator benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write trajectories, summary and manifest.
    Run(RunArgs),
    /// Rank test of the observability matrix over sampled states.
    Observability(ObservabilityArgs),
    /// Recompute per-state RMSE from trajectory CSVs.
    Rmse(RmseArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Scenario file (TOML); a previous run's manifest also works.
    #[arg(long, env = "BEARING_HOMING_CONFIG")]
    pub config: PathBuf,
    /// Master seed; replicate r uses seed + r.
    #[arg(long, env = "BEARING_HOMING_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "BEARING_HOMING_REPLICATES")]
    pub replicates: Option<usize>,
    /// Comma-separated subset of ekf, aekf, piekf.
    #[arg(long, env = "BEARING_HOMING_FILTER", value_delimiter = ',')]
    pub filter: Option<Vec<String>>,
    #[arg(long, env = "BEARING_HOMING_OUT_DIR", default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ObservabilityArgs {
    #[arg(long, env = "BEARING_HOMING_CONFIG")]
    pub config: PathBuf,
    #[arg(long, env = "BEARING_HOMING_SAMPLES", default_value_t = 100)]
    pub samples: usize,
    #[arg(long, env = "BEARING_HOMING_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Sampled ranges are uniform in [range-min, range-max] cm.
    #[arg(long, default_value_t = 10.0)]
    pub range_min: f64,
    #[arg(long, default_value_t = 150.0)]
    pub range_max: f64,
    /// Relative singular-value threshold.
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct RmseArgs {
    #[arg(required = true)]
    pub csv: Vec<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Io(_) => EXIT_FAILURE,
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Reads a scenario file. Syntax errors carry line and column.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    ScenarioConfig::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub master_seed: u64,
    pub replicates: usize,
    /// `state` or `input`.
    pub process_noise_form: String,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
    pub outputs: Vec<String>,
}

/// Result of `run`: the artifacts written and any aborted replicates.
#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub trajectories: Vec<PathBuf>,
    pub summary: Summary,
    pub failures: Vec<String>,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Applies the command-line overrides to a loaded config.
pub fn apply_overrides(mut cfg: ScenarioConfig, args: &RunArgs) -> ScenarioConfig {
    if let Some(s) = args.seed {
        cfg.seeds.master = s;
    }
    if let Some(r) = args.replicates {
        cfg.seeds.replicates = r;
    }
    if let Some(f) = &args.filter {
        cfg.filters = f.clone();
    }
    cfg.manifest = None;
    cfg
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<RunOutcome, CliError> {
    let started = unix_now();
    let cfg = apply_overrides(load_config(&args.config)?, args);
    let sc = cfg.resolve().map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(w) = initial_observability_warning(&sc) {
        writeln!(out, "warning: {w}").map_err(|e| CliError::Io(e.to_string()))?;
    }

    let logs = run_scenario(&sc);
    let dir = &args.out_dir;
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut trajectories = Vec::new();
    let mut failures = Vec::new();
    for log in &logs {
        let path = dir.join(log.file_name());
        let file = fs::File::create(&path).map_err(|e| io_error(&path, e))?;
        log.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| io_error(&path, e))?;
        if let Some(f) = &log.failure {
            failures.push(format!("{} seed {}: {f}", log.filter.display_name(), log.seed));
        }
        trajectories.push(path);
    }

    let summary = aggregate_replicates(&logs);
    let summary_csv = dir.join(format!("{}_summary.csv", sc.name));
    write_summary_csv(&summary_csv, &summary)?;
    let text = summary_text(&sc.name, &summary, &logs, &failures);
    let summary_txt = dir.join(format!("{}_summary.txt", sc.name));
    fs::write(&summary_txt, &text).map_err(|e| io_error(&summary_txt, e))?;
    out.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))?;

    let mut outputs: Vec<String> = trajectories
        .iter()
        .chain([&summary_csv, &summary_txt])
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    outputs.push(MANIFEST_FILE.to_string());
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: sc.master_seed,
        replicates: sc.replicates,
        process_noise_form: match sc.tunings.first().map(|t| &t.process_noise) {
            Some(ProcessNoise::Input(_)) => "input".into(),
            _ => "state".into(),
        },
        started_unix_s: started,
        finished_unix_s: unix_now(),
        outputs,
    };
    write_manifest(&dir.join(MANIFEST_FILE), &cfg, &manifest)?;

    Ok(RunOutcome {
        out_dir: dir.clone(),
        trajectories,
        summary,
        failures,
    })
}

/// The resolved config followed by a `[manifest]` table, so the file can be
/// passed back to `run --config`.
pub fn write_manifest(path: &Path, cfg: &ScenarioConfig, manifest: &RunManifest) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Wrapper<'a> {
        manifest: &'a RunManifest,
    }
    let mut text = cfg.to_toml();
    text.push('\n');
    text.push_str(&toml::to_string(&Wrapper { manifest }).map_err(|e| CliError::Io(e.to_string()))?);
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn write_summary_csv(path: &Path, summary: &Summary) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record([
        "filter",
        "replicates",
        "failed",
        "rmse_R_cm",
        "rmse_theta_rad",
        "rmse_alpha_rad",
        "std_R_cm",
        "std_theta_rad",
        "std_alpha_rad",
        "median_rmse_R_cm",
    ])
    .map_err(|e| io_error(path, e))?;
    for f in &summary.filters {
        let mut row = vec![
            f.filter.display_name().to_string(),
            f.replicates.to_string(),
            f.failed.to_string(),
        ];
        row.extend(f.mean.iter().chain(&f.std).map(f64::to_string));
        row.push(f.median_range.to_string());
        w.write_record(&row).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

fn summary_text(name: &str, summary: &Summary, logs: &[TrajectoryLog], failures: &[String]) -> String {
    let mut s = format_table(&format!("{name}: mean RMSE over replicates"), summary);
    if !summary.wins.is_empty() {
        s.push_str("\nlower R RMSE than (fraction of seeds):\n");
        for ((a, b), w) in &summary.wins {
            s.push_str(&format!("  {a} vs {b}: {w:.2}\n"));
        }
    }
    let homed = logs.iter().filter(|l| l.termination.truth_step.is_some()).count();
    s.push_str(&format!("\nreached home: {homed}/{} runs\n", logs.len()));
    if !failures.is_empty() {
        s.push_str(&format!("aborted: {} runs\n", failures.len()));
        for f in failures {
            s.push_str(&format!("  {f}\n"));
        }
    }
    s
}

#[derive(Debug, Clone)]
pub struct ObservabilityOutcome {
    pub q: usize,
    pub ranks: Vec<usize>,
    pub observable: usize,
}

impl ObservabilityOutcome {
    pub fn all_observable(&self) -> bool {
        !self.ranks.is_empty() && self.observable == self.ranks.len()
    }
}

pub fn cmd_observability(args: &ObservabilityArgs, out: &mut dyn Write) -> Result<ObservabilityOutcome, CliError> {
    let cfg = load_config(&args.config)?;
    let lm = cfg
        .landmarks
        .to_landmarks()
        .map_err(|e| CliError::Config(format!("landmarks: {e}")))?;
    if !(args.range_min > 0.0 && args.range_max >= args.range_min) {
        return Err(CliError::Config("need 0 < range-min <= range-max".into()));
    }
    let q = lm.len();
    let n = q + POSE_DIM;
    let w = |out: &mut dyn Write, s: String| out.write_all(s.as_bytes()).map_err(|e| CliError::Io(e.to_string()));
    w(out, format!("q = {q}, state dimension {n}, tol {:e}\n", args.tol))?;
    let mut ranks = Vec::new();
    for (i, x) in sample_generic_states(&lm, args.samples, args.range_min, args.range_max, args.seed)
        .iter()
        .enumerate()
    {
        let rep = observability_report(x, &lm, args.tol).map_err(|e| CliError::Io(e.to_string()))?;
        let sv = &rep.singular_values;
        let smallest_kept = sv.get(rep.rank.saturating_sub(1)).copied().unwrap_or(0.0);
        w(
            out,
            format!(
                "sample {i:3}: R {:7.2} theta {:6.3} alpha {:6.3}  rank {}/{n}  sv_max {:.3e}  sv_rank {:.3e}\n",
                x.pose.range,
                x.pose.theta,
                x.pose.alpha,
                rep.rank,
                sv.first().copied().unwrap_or(0.0),
                smallest_kept
            ),
        )?;
        ranks.push(rep.rank);
    }
    let observable = ranks.iter().filter(|r| **r == n).count();
    w(
        out,
        format!(
            "observable at {observable}/{} samples; max rank {}\n",
            ranks.len(),
            ranks.iter().max().copied().unwrap_or(0)
        ),
    )?;
    Ok(ObservabilityOutcome { q, ranks, observable })
}

pub fn cmd_rmse(args: &RmseArgs, out: &mut dyn Write) -> Result<(), CliError> {
    for path in &args.csv {
        let file = fs::File::open(path).map_err(|e| io_error(path, e))?;
        let traj = read_csv_trajectory(file).map_err(|e| io_error(path, e))?;
        let r = rmse_from_rows(&traj.names, &traj.truth, &traj.estimate);
        let mut line = format!("{}", path.display());
        for (n, v) in r.names.iter().zip(&r.values) {
            line.push_str(&format!(" {n}={v:.6}"));
        }
        writeln!(out, "{line}").map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(())
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, out).map(|o| {
            if o.failures.is_empty() {
                EXIT_OK
            } else {
                let _ = writeln!(err, "{} run(s) aborted by a filter singularity", o.failures.len());
                EXIT_FILTER
            }
        }),
        Command::Observability(a) => cmd_observability(a, out).map(|o| {
            if o.all_observable() {
                EXIT_OK
            } else {
                EXIT_FAILURE
            }
        }),
        Command::Rmse(a) => cmd_rmse(a, out).map(|_| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
