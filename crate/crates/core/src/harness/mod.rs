//! Command-line harness: `ee-point`, `scaling` and `verify`.
//!
//! Exit codes: 0 success, 1 a verification property failed, 2 configuration
//! or I/O error, 3 a solver failed (non-convergence or a degenerate draw).

pub mod config;
pub mod verify;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::capacity::DEFAULT_TOL;
use crate::ee::{ee_dpc, ee_lower, ee_siso, ee_upper};
use crate::error::{Error, Result};
use crate::matrix_kernel::C64;
use crate::scaling::{run_scaling_experiment, ExperimentSpec};
use crate::system_model::{denormalize_ee, draw_channels, ChannelSet, SystemConfig};

pub use config::{config_digest, ExperimentSection, Overrides, RunConfig, RunManifest};
pub use verify::{run_verify, Kernels, PropertyOutcome, VerifyLevel, VerifyReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROPERTY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mimo-ee", version, about = "Energy efficiency of MIMO broadcast channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize the efficiency of one channel draw and print it as JSON.
    EePoint(EePointArgs),
    /// Run the `experiment` section of a config and write CSV plus a manifest.
    Scaling(ScalingArgs),
    /// Run the built-in property suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct EePointArgs {
    /// JSON config document.
    pub config: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Normalized overhead; replaces the value derived from the config.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Debug: give every user the scalar channel gain `|h|^2 = GAIN` instead
    /// of a random draw. Requires M = N = 1.
    #[arg(long)]
    pub gain: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    pub config: PathBuf,
    /// CSV output path; the manifest goes next to it as `<stem>.manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Reduced sample sizes (the default).
    #[arg(long, conflicts_with = "full")]
    pub quick: bool,
    /// Acceptance-scale sample sizes.
    #[arg(long)]
    pub full: bool,
    /// Write a JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match cli.command {
        Command::EePoint(a) => cmd_ee_point(&a, out, err),
        Command::Scaling(a) => cmd_scaling(&a, err),
        Command::Verify(a) => {
            let level = if a.full { VerifyLevel::Full } else { VerifyLevel::Quick };
            cmd_verify(level, &Kernels::default(), a.out.as_deref(), out, err)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotConverged { .. } | Error::BracketCap { .. } | Error::RankDeficient { .. } => EXIT_SOLVER,
        Error::Trial { source, .. } => exit_code(source),
        _ => EXIT_CONFIG,
    }
}

fn report(e: &Error, err: &mut dyn Write) -> i32 {
    let _ = writeln!(err, "error: {e}");
    exit_code(e)
}

/// Output of `ee-point`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EePointReport {
    pub alpha: f64,
    pub xi_dpc: f64,
    pub xi_upper: f64,
    pub xi_lower: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_siso: Option<f64>,
    pub q_star: f64,
    pub gamma_bits_per_joule: f64,
}

/// Draws (or, with `gain`, builds) one channel set and evaluates every
/// efficiency at the resolved `alpha`.
pub fn ee_point(cfg: &RunConfig, overrides: &Overrides, gain: Option<f64>) -> Result<EePointReport> {
    let sys = &cfg.system;
    let alpha = cfg.resolved_alpha(overrides)?;
    if sys.rx_antennas * sys.users < sys.tx_antennas {
        return Err(Error::Config(format!(
            "`users` * `rx_antennas` must be at least `tx_antennas` for the lower bound, got {} * {} < {}",
            sys.users, sys.rx_antennas, sys.tx_antennas
        )));
    }
    let channels = match gain {
        Some(g) => scalar_channels(sys, g)?,
        None => draw_channels(sys, &mut ChaCha8Rng::seed_from_u64(overrides.seed.unwrap_or(0))),
    };
    let dpc = ee_dpc(&channels, alpha, DEFAULT_TOL)?;
    let siso = if sys.tx_antennas == 1 && sys.rx_antennas == 1 {
        Some(ee_siso(&channels, alpha)?.xi)
    } else {
        None
    };
    Ok(EePointReport {
        alpha,
        xi_dpc: dpc.xi,
        xi_upper: ee_upper(&channels, alpha)?.xi,
        xi_lower: ee_lower(&channels, alpha)?.xi,
        xi_siso: siso,
        q_star: dpc.q_star,
        gamma_bits_per_joule: denormalize_ee(sys, dpc.xi),
    })
}

fn scalar_channels(sys: &SystemConfig, gain: f64) -> Result<ChannelSet> {
    if sys.tx_antennas != 1 || sys.rx_antennas != 1 {
        return Err(Error::Config("`--gain` needs `tx_antennas` = `rx_antennas` = 1".into()));
    }
    if !(gain >= 0.0 && gain.is_finite()) {
        return Err(Error::Config(format!("`--gain` must be nonnegative, got {gain}")));
    }
    ChannelSet::siso(&vec![C64::new(gain.sqrt(), 0.0); sys.users])
}

pub fn cmd_ee_point(args: &EePointArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let overrides = Overrides {
        seed: Some(args.seed),
        alpha: args.alpha,
        trials: None,
    };
    let result = RunConfig::load(&args.config).and_then(|cfg| ee_point(&cfg, &overrides, args.gain));
    match result {
        Ok(rep) => {
            let text = serde_json::to_string_pretty(&rep).expect("report serializes");
            if writeln!(out, "{text}").is_err() {
                return EXIT_CONFIG;
            }
            EXIT_OK
        }
        Err(e) => report(&e, err),
    }
}

/// Resolved inputs of a scaling run; its digest goes into the manifest.
#[derive(Debug, Serialize)]
struct ResolvedScaling<'a> {
    system: &'a SystemConfig,
    experiment: &'a ExperimentSpec,
}

/// `<dir>/<stem>.manifest.json` next to the CSV output.
pub fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("manifest.json")
}

/// Runs the experiment and writes the CSV and its manifest. Nothing is left
/// on disk if any step fails.
pub fn write_scaling(cfg: &RunConfig, overrides: &Overrides, out: &Path) -> Result<RunManifest> {
    let started = config::timestamp();
    let spec = cfg.experiment_spec(overrides)?;
    let result = run_scaling_experiment(&spec)?;
    let manifest = RunManifest {
        command: "scaling".into(),
        config_digest: config_digest(&ResolvedScaling {
            system: &cfg.system,
            experiment: &spec,
        }),
        master_seed: spec.master_seed,
        tool_version: config::TOOL_VERSION.into(),
        started,
        finished: config::timestamp(),
    };
    let manifest_out = manifest_path(out);
    let written = std::fs::write(out, result.to_csv()).and_then(|()| {
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&manifest_out, text + "\n")
    });
    if let Err(e) = written {
        let _ = std::fs::remove_file(out);
        let _ = std::fs::remove_file(&manifest_out);
        return Err(Error::Config(format!("cannot write {}: {e}", out.display())));
    }
    Ok(manifest)
}

pub fn cmd_scaling(args: &ScalingArgs, err: &mut dyn Write) -> i32 {
    let overrides = Overrides {
        seed: args.seed,
        alpha: args.alpha,
        trials: args.trials,
    };
    match RunConfig::load(&args.config).and_then(|cfg| write_scaling(&cfg, &overrides, &args.out)) {
        Ok(_) => EXIT_OK,
        Err(e) => report(&e, err),
    }
}

/// Runs the property suite with the given kernels, prints one line per
/// property and optionally writes the JSON report.
pub fn cmd_verify(
    level: VerifyLevel,
    kernels: &Kernels,
    report_path: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let rep = run_verify(level, kernels);
    let _ = out.write_all(rep.lines().as_bytes());
    let failures = rep.properties.iter().filter(|p| !p.passed).count();
    let _ = writeln!(
        out,
        "{} of {} properties passed",
        rep.properties.len() - failures,
        rep.properties.len()
    );
    if let Some(path) = report_path {
        let text = serde_json::to_string_pretty(&rep).expect("report serializes");
        if let Err(e) = std::fs::write(path, text + "\n") {
            let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
            return EXIT_CONFIG;
        }
    }
    if rep.passed {
        EXIT_OK
    } else {
        EXIT_PROPERTY_FAILED
    }
}
