//! `fcspdc`: configuration listing, GVM curves, single-point analysis and
//! wavelength sweeps for frequency-converted SPDC sources.

mod commands;
mod config;

use std::fmt;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fcspdc::dispersion::Crystal;
use fcspdc::phasematch::ConfigId;
use fcspdc::spectra::PmfKind;

use commands::{AnalyzeArgs, DumpFormat, GvmArgs, SweepArgs};
use config::{Overrides, RunConfig};

/// Malformed or inconsistent user input.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

/// Too many sweep points failed.
#[derive(Debug)]
pub struct PartialSweep {
    pub succeeded: usize,
    pub total: usize,
}

impl fmt::Display for PartialSweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "only {} of {} sweep points succeeded", self.succeeded, self.total)
    }
}

impl std::error::Error for PartialSweep {}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PmfArg {
    Sinc,
    Gaussian,
}

impl From<PmfArg> for PmfKind {
    fn from(p: PmfArg) -> Self {
        match p {
            PmfArg::Sinc => PmfKind::Sinc,
            PmfArg::Gaussian => PmfKind::Gaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DumpArg {
    Csv,
    Binary,
}

#[derive(Debug, Parser)]
#[command(name = "fcspdc", version, about = "Frequency-converted SPDC source design")]
struct Cli {
    /// Crystal: ktp, ln or mgln.
    #[arg(long, global = true, value_parser = parse_crystal)]
    crystal: Option<Crystal>,
    /// Phase-matching function model.
    #[arg(long, global = true, value_enum)]
    pmf: Option<PmfArg>,
    /// Minimum points per grid axis.
    #[arg(long, global = true)]
    grid_points: Option<usize>,
    /// Seed for the multistart search.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for reports, tables and dumps.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config_file: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the phase-matching configurations of the crystal.
    Configs,
    /// Trace the group-velocity-matching curves as CSV.
    Gvm {
        #[arg(long, default_value_t = 600.0)]
        lo: f64,
        #[arg(long, default_value_t = 4000.0)]
        hi: f64,
        /// Signal wavelengths sampled across the range.
        #[arg(long, default_value_t = 201)]
        samples: usize,
        /// Write to a file instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Optimize one degenerate wavelength and report the design.
    Analyze {
        /// Degenerate wavelength in nm.
        #[arg(long)]
        lambda_deg: f64,
        /// Force a configuration (I..IV) instead of selecting the best.
        #[arg(long, value_parser = parse_config)]
        config: Option<ConfigId>,
        /// Dump the JSA, JCA and effective amplitude.
        #[arg(long, value_enum)]
        dump_jsa: Option<DumpArg>,
    },
    /// Sweep the degenerate wavelength; resumes from the sidecar.
    Sweep {
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        /// Evenly spaced point count instead of a step.
        #[arg(long)]
        points: Option<usize>,
        /// Ignore an existing checkpoint.
        #[arg(long)]
        fresh: bool,
        /// Write the figure CSV pack.
        #[arg(long)]
        figures: bool,
        /// Skip the conventional baseline.
        #[arg(long)]
        no_conventional: bool,
    },
}

fn parse_crystal(s: &str) -> Result<Crystal, String> {
    s.parse().map_err(|e: fcspdc::Error| e.to_string())
}

fn parse_config(s: &str) -> Result<ConfigId, String> {
    s.parse().map_err(|e: fcspdc::Error| e.to_string())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let overrides = Overrides {
        crystal: cli.crystal,
        pmf: cli.pmf.map(Into::into),
        grid_points: cli.grid_points,
        seed: cli.seed,
        out_dir: cli.out_dir,
    };
    let mut cfg = RunConfig::resolve(cli.config_file.as_deref(), &overrides)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Configs => commands::configs(&cfg, &mut out)?,
        Command::Gvm { lo, hi, samples, output } => {
            if samples < 2 {
                return Err(InputError("--samples must be at least 2".into()).into());
            }
            commands::gvm(&cfg, &GvmArgs { lo_nm: lo, hi_nm: hi, samples, output }, &mut out)?
        }
        Command::Analyze { lambda_deg, config, dump_jsa } => {
            let dump = dump_jsa.map(|d| match d {
                DumpArg::Csv => DumpFormat::Csv,
                DumpArg::Binary => DumpFormat::Binary,
            });
            commands::analyze(&cfg, &AnalyzeArgs { lambda_deg_nm: lambda_deg, config, dump }, &mut out)?;
        }
        Command::Sweep { lo, hi, step, points, fresh, figures, no_conventional } => {
            let r = &mut cfg.sweep;
            if let Some(v) = lo {
                r.lambda_min_nm = v;
            }
            if let Some(v) = hi {
                r.lambda_max_nm = v;
            }
            if let Some(v) = step {
                r.step_nm = v;
                r.points = None;
            }
            if points.is_some() {
                r.points = points;
            }
            if no_conventional {
                cfg.conventional = false;
            }
            cfg.validate()?;
            commands::run_sweep(&cfg, &SweepArgs { fresh, figures }, &mut out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<PartialSweep>().is_some() {
        return 4;
    }
    if e.downcast_ref::<InputError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<fcspdc::Error>() {
        Some(err) if err.is_physics() => 3,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_exit_codes() {
        let input: anyhow::Error = InputError("bad".into()).into();
        assert_eq!(exit_code(&input), 2);
        let partial: anyhow::Error = PartialSweep { succeeded: 8, total: 10 }.into();
        assert_eq!(exit_code(&partial), 4);
        let cutoff: anyhow::Error = fcspdc::Error::BelowCutoff { crystal: "KTP".into(), lambda_deg_nm: 300.0, limit_nm: 466.0 }.into();
        assert_eq!(exit_code(&cutoff), 3);
        let param: anyhow::Error = fcspdc::Error::InvalidParameter("x".into()).into();
        assert_eq!(exit_code(&param), 2);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
