//! The four subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use fcspdc::dispersion::{self, Crystal, CrystalDispersion};
use fcspdc::exec::Execution;
use fcspdc::io::{self, SweepSidecar};
use fcspdc::optimizer::{
    optimize_bandwidths, select_configuration, sweep, ConfigRecord, SearchOptions, SweepResult, SweepSettings,
};
use fcspdc::phasematch::{list_configs, trace_gvm_curves, ConfigId, GvmScan, Type2Axes};
use fcspdc::source::{check_fc_limit, GridOptions, SourceModel};
use fcspdc::spectra::{JointAmplitude, PmfKind};

use crate::config::{RunConfig, MAX_LAMBDA_NM};
use crate::{InputError, PartialSweep};

/// Fraction of sweep points that must succeed for a zero exit status.
pub const SWEEP_SUCCESS_THRESHOLD: f64 = 0.9;

fn dispersion_for(cfg: &RunConfig) -> Result<CrystalDispersion> {
    Ok(dispersion::resolve(cfg.crystal, cfg.coefficients.as_deref())?)
}

fn search_options(cfg: &RunConfig) -> SearchOptions {
    SearchOptions { seed: cfg.seed, grid: GridOptions::default().with_points(cfg.grid_points), ..Default::default() }
}

fn file_stem(cfg: &RunConfig) -> String {
    format!("{}_{}", cfg.crystal.name().to_ascii_lowercase(), cfg.pmf.name())
}

pub fn configs(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{:<6} {:<12} {:<12}", "config", "spdc", "sfc")?;
    for c in list_configs(cfg.crystal) {
        writeln!(out, "{:<6} {:<12} {:<12}", c.id.roman(), c.spdc_label(), c.sfc_label())?;
    }
    Ok(())
}

pub struct GvmArgs {
    pub lo_nm: f64,
    pub hi_nm: f64,
    pub samples: usize,
    pub output: Option<PathBuf>,
}

pub fn gvm(cfg: &RunConfig, a: &GvmArgs, out: &mut dyn Write) -> Result<()> {
    let disp = dispersion_for(cfg)?;
    let scan = GvmScan { signal_samples: a.samples, ..Default::default() };
    let curves = trace_gvm_curves(&disp, Type2Axes::default_for(cfg.crystal), (a.lo_nm, a.hi_nm), scan)?;
    if curves.iter().all(|c| c.points.is_empty()) {
        eprintln!("warning: no group-velocity-matching roots in {}..{} nm", a.lo_nm, a.hi_nm);
    }
    for c in &curves {
        for p in c.degeneracy_crossings() {
            eprintln!("{} condition crosses the degeneracy diagonal at {:.1} nm", c.condition.name(), p.lambda_s_nm);
        }
    }
    match &a.output {
        Some(path) => {
            let mut buf = Vec::new();
            io::write_gvm_csv(&mut buf, &curves)?;
            io::write_atomic(path, &buf)?;
        }
        None => io::write_gvm_csv(out, &curves)?,
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpFormat {
    Csv,
    Binary,
}

pub struct AnalyzeArgs {
    pub lambda_deg_nm: f64,
    pub config: Option<ConfigId>,
    pub dump: Option<DumpFormat>,
}

#[derive(Serialize)]
struct AnalyzeReport<'a> {
    format: &'static str,
    crate_version: &'static str,
    seed: u64,
    grid_points: usize,
    result: &'a SweepResult,
    dumps: Vec<String>,
}

fn check_lambda(disp: &CrystalDispersion, lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda <= MAX_LAMBDA_NM) {
        return Err(InputError(format!("lambda_deg must lie in (0, {MAX_LAMBDA_NM}] nm, got {lambda}")).into());
    }
    check_fc_limit(disp, lambda)?;
    Ok(())
}

fn forced(disp: &CrystalDispersion, id: ConfigId, lambda: f64, pmf: PmfKind, cfg: &RunConfig, opts: &SearchOptions) -> Result<SweepResult> {
    let src = SourceModel::new(disp, id, lambda)?;
    let best = optimize_bandwidths(&src, pmf, &cfg.constraints, opts)?;
    Ok(SweepResult {
        lambda_deg_nm: lambda,
        crystal: cfg.crystal,
        pmf,
        spdc_period_um: src.gratings.spdc.period_um,
        sfc_period_um: src.gratings.sfc.period_um,
        lengths: best.evaluation.lengths,
        records: vec![ConfigRecord { config: id, model_eta: Some(best.model_eta), eta: Some(best.eta()), error: None }],
        best,
    })
}

fn dump(path: &Path, f: &JointAmplitude, format: DumpFormat) -> Result<()> {
    let mut buf = Vec::new();
    match format {
        DumpFormat::Csv => io::write_amplitude_csv(&mut buf, f)?,
        DumpFormat::Binary => io::write_amplitude_binary(&mut buf, f)?,
    }
    io::write_atomic(path, &buf)?;
    Ok(())
}

pub fn analyze(cfg: &RunConfig, a: &AnalyzeArgs, out: &mut dyn Write) -> Result<PathBuf> {
    let disp = dispersion_for(cfg)?;
    check_lambda(&disp, a.lambda_deg_nm)?;
    let opts = search_options(cfg);
    let result = match a.config {
        Some(id) => forced(&disp, id, a.lambda_deg_nm, cfg.pmf, cfg, &opts)?,
        None => select_configuration(&disp, a.lambda_deg_nm, cfg.pmf, &cfg.constraints, &opts)?,
    };
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let stem = format!("analyze_{}_{}nm", file_stem(cfg), a.lambda_deg_nm);
    let mut dumps = Vec::new();
    if let Some(format) = a.dump {
        let src = SourceModel::new(&disp, result.best.config, a.lambda_deg_nm)?;
        let grid = GridOptions { exec: Execution::Sequential, ..opts.grid };
        let amps = src.amplitudes(&result.best.bandwidths, cfg.pmf, &grid)?;
        let ext = match format {
            DumpFormat::Csv => "csv",
            DumpFormat::Binary => "bin",
        };
        for (name, f) in [("jsa", &amps.jsa), ("jca", &amps.jca), ("effective", &amps.effective)] {
            let file = format!("{stem}_{name}.{ext}");
            dump(&cfg.out_dir.join(&file), f, format)?;
            dumps.push(file);
        }
    }
    let report = AnalyzeReport {
        format: "fcspdc-analyze",
        crate_version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        grid_points: cfg.grid_points,
        result: &result,
        dumps,
    };
    let path = cfg.out_dir.join(format!("{stem}.json"));
    let text = serde_json::to_vec_pretty(&report)?;
    io::write_atomic(&path, &text)?;

    let b = &result.best;
    let m = &b.evaluation.report;
    writeln!(out, "crystal {}  lambda_deg {} nm  pmf {}", cfg.crystal, a.lambda_deg_nm, cfg.pmf.name())?;
    writeln!(out, "config {}", b.config.roman())?;
    writeln!(out, "purity {:.6}", m.purity)?;
    writeln!(out, "indistinguishability {:.6}", m.indistinguishability)?;
    writeln!(out, "heralding_efficiency {:.6}", m.heralding_efficiency)?;
    if let Some(c) = m.conversion_efficiency {
        writeln!(out, "conversion_efficiency {c:.6}")?;
    }
    let n = b.normalized.as_array();
    writeln!(out, "normalized sigma_p {:.4} sigma_phi {:.4} sigma_e {:.4} sigma_psi {:.4}", n[0], n[1], n[2], n[3])?;
    writeln!(out, "lengths_mm spdc {:.3} sfc {:.3}", result.lengths.spdc_mm, result.lengths.sfc_mm)?;
    writeln!(out, "periods_um spdc {:.4} sfc {:.4}", result.spdc_period_um, result.sfc_period_um)?;
    writeln!(out, "report {}", path.display())?;
    Ok(path)
}

pub struct SweepArgs {
    pub fresh: bool,
    pub figures: bool,
}

pub fn sidecar_path(cfg: &RunConfig, pmf: PmfKind) -> PathBuf {
    let stem = format!("{}_{}", cfg.crystal.name().to_ascii_lowercase(), pmf.name());
    cfg.out_dir.join(format!("sweep_{stem}.json"))
}

fn load_other(cfg: &RunConfig, crystal: Crystal, pmf: PmfKind) -> Option<SweepSidecar> {
    let s = SweepSidecar::load(&sidecar_path(cfg, pmf)).ok()?;
    (s.crystal == crystal).then_some(s)
}

pub fn run_sweep(cfg: &RunConfig, a: &SweepArgs, out: &mut dyn Write) -> Result<SweepSidecar> {
    let disp = dispersion_for(cfg)?;
    let lambdas = cfg.lambdas();
    check_fc_limit(&disp, lambdas[0])?;
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let search = search_options(cfg);
    let settings = SweepSettings {
        pmf: cfg.pmf,
        constraints: cfg.constraints,
        search,
        conventional: cfg.conventional,
        exec: if cfg.parallel { Execution::Parallel } else { Execution::Sequential },
    };
    let fresh = SweepSidecar::new(cfg.crystal, cfg.pmf, lambdas, cfg.constraints, search, cfg.conventional);
    let side_path = sidecar_path(cfg, cfg.pmf);
    let mut side = match SweepSidecar::load(&side_path) {
        Ok(old) if !a.fresh && old.same_request(&fresh) => {
            writeln!(out, "resuming: {} of {} points already done", old.points.len(), old.lambdas_nm.len())?;
            old
        }
        _ => fresh,
    };
    let chunk = std::thread::available_parallelism().map_or(1, |n| n.get()).max(1);
    let pending = side.pending();
    for batch in pending.chunks(chunk) {
        let points = sweep(&disp, batch, &settings);
        for p in &points {
            match &p.result {
                Ok(r) => writeln!(out, "{:8.2} nm  config {:>4}  P {:.4}  I {:.4}  H {:.4}", p.lambda_deg_nm, r.best.config.roman(),
                    r.best.evaluation.report.purity, r.best.evaluation.report.indistinguishability, r.best.evaluation.report.heralding_efficiency)?,
                Err(e) => writeln!(out, "{:8.2} nm  failed: {e}", p.lambda_deg_nm)?,
            }
        }
        side.record(points);
        side.save(&side_path)?;
    }

    let csv = cfg.out_dir.join(format!("sweep_{}.csv", file_stem(cfg)));
    let mut buf = Vec::new();
    io::write_sweep_csv(&mut buf, &side.points)?;
    io::write_atomic(&csv, &buf)?;
    writeln!(out, "table {}", csv.display())?;
    writeln!(out, "sidecar {}", side_path.display())?;

    if a.figures {
        let other = match cfg.pmf {
            PmfKind::Sinc => load_other(cfg, cfg.crystal, PmfKind::Gaussian),
            PmfKind::Gaussian => load_other(cfg, cfg.crystal, PmfKind::Sinc),
        };
        let (sinc, gauss) = match cfg.pmf {
            PmfKind::Sinc => (Some(&side), other.as_ref()),
            PmfKind::Gaussian => (other.as_ref(), Some(&side)),
        };
        let dir = cfg.out_dir.join("figures");
        let files = io::write_figure_pack(&dir, cfg.crystal, sinc.map(|s| s.points.as_slice()), gauss.map(|s| s.points.as_slice()))?;
        writeln!(out, "figure pack {} ({} files)", dir.display(), files.len())?;
    }

    let frac = side.success_fraction();
    if frac < SWEEP_SUCCESS_THRESHOLD {
        return Err(PartialSweep { succeeded: side.points.len() - side.failed, total: side.lambdas_nm.len() }.into());
    }
    Ok(side)
}
