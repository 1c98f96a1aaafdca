//! File formats: amplitude dumps, GVM loci, sweep tables, the sweep sidecar
//! and per-panel figure data.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::Crystal;
use crate::optimizer::{OptimizationConstraints, SearchOptions, SweepPoint};
use crate::phasematch::{GvmCondition, GvmCurve, GvmPoint};
use crate::spectra::{AmplitudeKind, JointAmplitude, Normalization, PmfKind, SpectralAxis, SpectralGrid, Values};
use crate::units::nm_from_omega;
use crate::{Error, Result};

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Write to a temporary sibling and rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct AmplitudeRow {
    omega1_rad_per_fs: f64,
    omega2_rad_per_fs: f64,
    lambda1_nm: f64,
    lambda2_nm: f64,
    re: f64,
    im: f64,
}

/// One row per grid point, axis 1 slowest.
pub fn write_amplitude_csv<W: Write>(w: W, f: &JointAmplitude) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let (r, c) = f.grid.shape();
    for i in 0..r {
        let w1 = f.grid.axis1.value(i);
        for j in 0..c {
            let w2 = f.grid.axis2.value(j);
            let v = f.values.get(i, j);
            out.serialize(AmplitudeRow {
                omega1_rad_per_fs: w1,
                omega2_rad_per_fs: w2,
                lambda1_nm: nm_from_omega(w1),
                lambda2_nm: nm_from_omega(w2),
                re: v.re,
                im: v.im,
            })
            .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn axis_from_samples(samples: &[f64]) -> Result<SpectralAxis> {
    let (lo, hi) = (samples[0], samples[samples.len() - 1]);
    SpectralAxis::new(0.5 * (lo + hi), 0.5 * (hi - lo), samples.len())
}

/// Inverse of [`write_amplitude_csv`]; the grid is rebuilt from the
/// frequency columns, so it matches the original to rounding.
pub fn read_amplitude_csv<R: Read>(r: R, kind: AmplitudeKind, normalization: Normalization) -> Result<JointAmplitude> {
    let mut rows = Vec::new();
    for rec in csv::Reader::from_reader(r).deserialize() {
        let row: AmplitudeRow = rec.map_err(csv_err)?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("amplitude file has no rows".into()));
    }
    let cols = rows.iter().take_while(|r| r.omega1_rad_per_fs == rows[0].omega1_rad_per_fs).count();
    if rows.len() % cols != 0 {
        return Err(Error::Parse("amplitude rows do not form a rectangle".into()));
    }
    let nr = rows.len() / cols;
    let a1: Vec<f64> = (0..nr).map(|i| rows[i * cols].omega1_rad_per_fs).collect();
    let a2: Vec<f64> = (0..cols).map(|j| rows[j].omega2_rad_per_fs).collect();
    let grid = SpectralGrid::new(axis_from_samples(&a1)?, axis_from_samples(&a2)?)?;
    let complex = rows.iter().any(|r| r.im != 0.0);
    let values = if complex {
        Values::Complex(DMatrix::from_fn(nr, cols, |i, j| {
            let r = &rows[i * cols + j];
            Complex64::new(r.re, r.im)
        }))
    } else {
        Values::Real(DMatrix::from_fn(nr, cols, |i, j| rows[i * cols + j].re))
    };
    JointAmplitude::new(grid, values, kind, normalization)
}

pub const AMPLITUDE_FORMAT: &str = "fcspdc-amplitude";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeHeader {
    pub format: String,
    pub version: u32,
    pub grid: SpectralGrid,
    pub kind: AmplitudeKind,
    pub normalization: Normalization,
    pub rows: usize,
    pub cols: usize,
    /// Element layout after the header line.
    pub layout: String,
}

const LAYOUT: &str = "row-major complex f64 little-endian (re, im)";

/// JSON header line followed by the raw matrix.
pub fn write_amplitude_binary<W: Write>(mut w: W, f: &JointAmplitude) -> Result<()> {
    let (rows, cols) = f.grid.shape();
    let header = AmplitudeHeader {
        format: AMPLITUDE_FORMAT.into(),
        version: 1,
        grid: f.grid,
        kind: f.kind,
        normalization: f.normalization,
        rows,
        cols,
        layout: LAYOUT.into(),
    };
    let mut buf = serde_json::to_vec(&header).map_err(json_err)?;
    buf.push(b'\n');
    buf.reserve(rows * cols * 16);
    for i in 0..rows {
        for j in 0..cols {
            let v = f.values.get(i, j);
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_amplitude_binary<R: Read>(r: R) -> Result<JointAmplitude> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let h: AmplitudeHeader = serde_json::from_str(line.trim_end()).map_err(json_err)?;
    if h.format != AMPLITUDE_FORMAT || h.version != 1 || h.layout != LAYOUT {
        return Err(Error::Parse(format!("unsupported amplitude file {} v{}", h.format, h.version)));
    }
    if h.grid.shape() != (h.rows, h.cols) {
        return Err(Error::Parse("header shape disagrees with grid".into()));
    }
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    if data.len() != h.rows * h.cols * 16 {
        return Err(Error::Parse(format!("expected {} bytes of data, found {}", h.rows * h.cols * 16, data.len())));
    }
    let read = |k: usize| f64::from_le_bytes(data[8 * k..8 * k + 8].try_into().expect("8 bytes"));
    let m = DMatrix::from_fn(h.rows, h.cols, |i, j| {
        let k = 2 * (i * h.cols + j);
        Complex64::new(read(k), read(k + 1))
    });
    let values = if m.iter().all(|v| v.im == 0.0) { Values::Real(m.map(|v| v.re)) } else { Values::Complex(m) };
    JointAmplitude::new(h.grid, values, h.kind, h.normalization)
}

#[derive(Debug, Serialize, Deserialize)]
struct GvmRow {
    condition: String,
    lambda_s_nm: f64,
    lambda_i_nm: f64,
    lambda_p_nm: f64,
    degenerate: bool,
}

pub fn write_gvm_csv<W: Write>(w: W, curves: &[GvmCurve]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for c in curves {
        for p in &c.points {
            out.serialize(GvmRow {
                condition: c.condition.name().into(),
                lambda_s_nm: p.lambda_s_nm,
                lambda_i_nm: p.lambda_i_nm,
                lambda_p_nm: p.lambda_p_nm,
                degenerate: p.degenerate,
            })
            .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Curves in the order their conditions first appear.
pub fn read_gvm_csv<R: Read>(r: R) -> Result<Vec<GvmCurve>> {
    let mut curves: Vec<GvmCurve> = Vec::new();
    for rec in csv::Reader::from_reader(r).deserialize() {
        let row: GvmRow = rec.map_err(csv_err)?;
        let condition: GvmCondition = row.condition.parse()?;
        let p = GvmPoint { lambda_s_nm: row.lambda_s_nm, lambda_i_nm: row.lambda_i_nm, lambda_p_nm: row.lambda_p_nm, degenerate: row.degenerate };
        match curves.iter_mut().find(|c| c.condition == condition) {
            Some(c) => c.points.push(p),
            None => curves.push(GvmCurve { condition, points: vec![p] }),
        }
    }
    Ok(curves)
}

/// One sweep table row; optional fields are empty for failed points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda_deg_nm: f64,
    pub status: String,
    pub config: Option<String>,
    pub purity: Option<f64>,
    pub indistinguishability: Option<f64>,
    pub heralding_efficiency: Option<f64>,
    pub conversion_efficiency: Option<f64>,
    pub sigma_p_norm: Option<f64>,
    pub sigma_phi_norm: Option<f64>,
    pub sigma_e_norm: Option<f64>,
    pub sigma_psi_norm: Option<f64>,
    pub sigma_p_rad_per_fs: Option<f64>,
    pub sigma_phi_rad_per_fs: Option<f64>,
    pub sigma_e_rad_per_fs: Option<f64>,
    pub sigma_psi_rad_per_fs: Option<f64>,
    pub length_spdc_mm: Option<f64>,
    pub length_sfc_mm: Option<f64>,
    pub period_spdc_um: Option<f64>,
    pub period_sfc_um: Option<f64>,
    pub sigma_out_rad_per_fs: Option<f64>,
    pub sigma_out_min_rad_per_fs: Option<f64>,
    pub sigma_out_max_rad_per_fs: Option<f64>,
    pub conventional_purity_unfiltered: Option<f64>,
    pub conventional_purity_sideband: Option<f64>,
    pub conventional_indistinguishability_sideband: Option<f64>,
    pub conventional_heralding_sideband: Option<f64>,
    pub conventional_p_both_99: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn from_point(p: &SweepPoint) -> Self {
        let conv = p.conventional_ok();
        let mut row = SweepRow {
            lambda_deg_nm: p.lambda_deg_nm,
            status: "ok".into(),
            config: None,
            purity: None,
            indistinguishability: None,
            heralding_efficiency: None,
            conversion_efficiency: None,
            sigma_p_norm: None,
            sigma_phi_norm: None,
            sigma_e_norm: None,
            sigma_psi_norm: None,
            sigma_p_rad_per_fs: None,
            sigma_phi_rad_per_fs: None,
            sigma_e_rad_per_fs: None,
            sigma_psi_rad_per_fs: None,
            length_spdc_mm: None,
            length_sfc_mm: None,
            period_spdc_um: None,
            period_sfc_um: None,
            sigma_out_rad_per_fs: None,
            sigma_out_min_rad_per_fs: None,
            sigma_out_max_rad_per_fs: None,
            conventional_purity_unfiltered: conv.map(|c| c.purity_unfiltered),
            conventional_purity_sideband: conv.map(|c| c.sideband.purity),
            conventional_indistinguishability_sideband: conv.map(|c| c.sideband.indistinguishability),
            conventional_heralding_sideband: conv.map(|c| c.sideband.heralding_efficiency),
            conventional_p_both_99: conv.map(|c| c.p_both),
            error: None,
        };
        match &p.result {
            Ok(r) => {
                let m = &r.best.evaluation.report;
                let n = r.best.normalized;
                let a = r.best.bandwidths;
                row.config = Some(r.best.config.roman().into());
                row.purity = Some(m.purity);
                row.indistinguishability = Some(m.indistinguishability);
                row.heralding_efficiency = Some(m.heralding_efficiency);
                row.conversion_efficiency = m.conversion_efficiency;
                (row.sigma_p_norm, row.sigma_phi_norm, row.sigma_e_norm, row.sigma_psi_norm) =
                    (Some(n.sigma_p), Some(n.sigma_phi), Some(n.sigma_e), Some(n.sigma_psi));
                (row.sigma_p_rad_per_fs, row.sigma_phi_rad_per_fs, row.sigma_e_rad_per_fs, row.sigma_psi_rad_per_fs) =
                    (Some(a.sigma_p), Some(a.sigma_phi), Some(a.sigma_e), Some(a.sigma_psi));
                row.length_spdc_mm = Some(r.lengths.spdc_mm);
                row.length_sfc_mm = Some(r.lengths.sfc_mm);
                row.period_spdc_um = Some(r.spdc_period_um);
                row.period_sfc_um = Some(r.sfc_period_um);
                row.sigma_out_rad_per_fs = Some(r.best.evaluation.sigma_out);
                row.sigma_out_min_rad_per_fs = Some(r.best.output_interval.0);
                row.sigma_out_max_rad_per_fs = Some(r.best.output_interval.1);
            }
            Err(e) => {
                row.status = "error".into();
                row.error = Some(e.clone());
            }
        }
        row
    }
}

pub fn write_sweep_csv<W: Write>(w: W, points: &[SweepPoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in points {
        out.serialize(SweepRow::from_point(p)).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(r: R) -> Result<Vec<SweepRow>> {
    csv::Reader::from_reader(r).deserialize().map(|rec| rec.map_err(csv_err)).collect()
}

pub const SIDECAR_FORMAT: &str = "fcspdc-sweep";
pub const SIDECAR_VERSION: u32 = 1;

/// Sweep provenance and per-point results; doubles as the resume checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSidecar {
    pub format: String,
    pub version: u32,
    pub crate_version: String,
    pub crystal: Crystal,
    pub pmf: PmfKind,
    pub lambdas_nm: Vec<f64>,
    pub constraints: OptimizationConstraints,
    pub search: SearchOptions,
    pub conventional: bool,
    pub points: Vec<SweepPoint>,
    pub failed: usize,
    pub complete: bool,
}

impl SweepSidecar {
    pub fn new(crystal: Crystal, pmf: PmfKind, lambdas_nm: Vec<f64>, constraints: OptimizationConstraints, search: SearchOptions, conventional: bool) -> Self {
        Self {
            format: SIDECAR_FORMAT.into(),
            version: SIDECAR_VERSION,
            crate_version: env!("CARGO_PKG_VERSION").into(),
            crystal,
            pmf,
            lambdas_nm,
            constraints,
            search,
            conventional,
            points: Vec::new(),
            failed: 0,
            complete: false,
        }
    }

    /// Whether a checkpoint was produced by the same request.
    pub fn same_request(&self, other: &SweepSidecar) -> bool {
        self.crystal == other.crystal
            && self.pmf == other.pmf
            && self.lambdas_nm == other.lambdas_nm
            && self.constraints == other.constraints
            && self.search == other.search
            && self.conventional == other.conventional
    }

    /// Wavelengths without a stored result.
    pub fn pending(&self) -> Vec<f64> {
        self.lambdas_nm.iter().copied().filter(|l| !self.points.iter().any(|p| p.lambda_deg_nm == *l)).collect()
    }

    /// Add results and restore the wavelength order.
    pub fn record(&mut self, new: Vec<SweepPoint>) {
        let order: BTreeMap<u64, usize> = self.lambdas_nm.iter().enumerate().map(|(k, l)| (l.to_bits(), k)).collect();
        self.points.extend(new);
        self.points.sort_by_key(|p| order.get(&p.lambda_deg_nm.to_bits()).copied().unwrap_or(usize::MAX));
        self.points.dedup_by(|a, b| a.lambda_deg_nm == b.lambda_deg_nm);
        self.failed = self.points.iter().filter(|p| p.result.is_err()).count();
        self.complete = self.pending().is_empty();
    }

    pub fn success_fraction(&self) -> f64 {
        if self.lambdas_nm.is_empty() {
            return 1.0;
        }
        (self.points.len() - self.failed) as f64 / self.lambdas_nm.len() as f64
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_vec_pretty(self).map_err(json_err)?;
        write_atomic(path, &text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s: SweepSidecar = serde_json::from_slice(&fs::read(path)?).map_err(json_err)?;
        if s.format != SIDECAR_FORMAT || s.version != SIDECAR_VERSION {
            return Err(Error::Parse(format!("{} is not a v{SIDECAR_VERSION} sweep sidecar", path.display())));
        }
        Ok(s)
    }
}

fn result_column(points: Option<&[SweepPoint]>, lambda: f64, f: impl Fn(&SweepPoint) -> Option<f64>) -> Option<f64> {
    points?.iter().find(|p| p.lambda_deg_nm == lambda).and_then(f)
}

fn write_panel(dir: &Path, name: &str, header: &[&str], rows: &[Vec<Option<f64>>], labels: Option<&[Option<String>]>) -> Result<PathBuf> {
    let path = dir.join(format!("{name}.csv"));
    let mut out = csv::Writer::from_path(&path).map_err(csv_err)?;
    let mut head: Vec<&str> = header.to_vec();
    if labels.is_some() {
        head.push("config");
    }
    out.write_record(&head).map_err(csv_err)?;
    for (k, row) in rows.iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()).collect();
        if let Some(l) = labels {
            rec.push(l[k].clone().unwrap_or_default());
        }
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(path)
}

/// Figure numbers of the main and appendix panels for a crystal.
fn figure_numbers(crystal: Crystal) -> (u32, u32, char, (char, char)) {
    match crystal {
        Crystal::Ktp => (6, 8, 'a', ('a', 'b')),
        Crystal::Ln | Crystal::MgLn => (7, 9, 'b', ('c', 'd')),
    }
}

/// Per-panel CSVs from sinc and Gaussian sweeps over the same wavelengths.
/// Panels whose sweep is missing are written with empty columns.
pub fn write_figure_pack(dir: &Path, crystal: Crystal, sinc: Option<&[SweepPoint]>, gaussian: Option<&[SweepPoint]>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut lambdas: Vec<f64> = sinc.into_iter().chain(gaussian).flatten().map(|p| p.lambda_deg_nm).collect();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    let (main, appendix, reduced, (conv_s, conv_g)) = figure_numbers(crystal);
    let metric = |pts: Option<&[SweepPoint]>, l: f64, which: fn(&crate::metrics::MetricsReport) -> f64| {
        result_column(pts, l, |p| p.ok().map(|r| which(&r.best.evaluation.report)))
    };
    let conv = |l: f64, f: fn(&crate::source::ConventionalResult) -> f64| {
        result_column(sinc, l, |p| p.conventional_ok().map(f)).or_else(|| result_column(gaussian, l, |p| p.conventional_ok().map(f)))
    };
    let labels = |pts: Option<&[SweepPoint]>| -> Vec<Option<String>> {
        lambdas.iter().map(|&l| pts.and_then(|ps| ps.iter().find(|p| p.lambda_deg_nm == l)).and_then(|p| p.ok()).map(|r| r.best.config.roman().to_string())).collect()
    };
    let mut written = Vec::new();
    let three = ["lambda_deg_nm", "gaussian", "sinc", "conventional"];
    let rows = |g: fn(&crate::metrics::MetricsReport) -> f64, c: fn(&crate::source::ConventionalResult) -> f64| -> Vec<Vec<Option<f64>>> {
        lambdas.iter().map(|&l| vec![Some(l), metric(gaussian, l, g), metric(sinc, l, g), conv(l, c)]).collect()
    };
    written.push(write_panel(dir, &format!("fig{main}a"), &three, &rows(|m| m.purity, |c| c.sideband.purity), None)?);
    written.push(write_panel(dir, &format!("fig{main}b"), &three, &rows(|m| m.indistinguishability, |c| c.sideband.indistinguishability), None)?);
    written.push(write_panel(dir, &format!("fig{main}c"), &three, &rows(|m| m.heralding_efficiency, |c| c.sideband.heralding_efficiency), None)?);
    // design panels: (d) normalized bandwidths, (e) output interval, (f) poling periods
    let design = |pts: Option<&[SweepPoint]>, d: &str, e: &str, f: &str, written: &mut Vec<PathBuf>| -> Result<()> {
        let get = |l: f64| pts.and_then(|ps| ps.iter().find(|p| p.lambda_deg_nm == l)).and_then(|p| p.ok().cloned());
        let lab = labels(pts);
        let sig: Vec<Vec<Option<f64>>> = lambdas
            .iter()
            .map(|&l| {
                let r = get(l);
                let n = r.as_ref().map(|r| r.best.normalized);
                vec![Some(l), n.map(|n| n.sigma_p), n.map(|n| n.sigma_e), n.map(|n| n.sigma_phi), n.map(|n| n.sigma_psi)]
            })
            .collect();
        written.push(write_panel(dir, d, &["lambda_deg_nm", "sigma_p_norm", "sigma_e_norm", "sigma_phi_norm", "sigma_psi_norm"], &sig, Some(&lab))?);
        let out: Vec<Vec<Option<f64>>> = lambdas
            .iter()
            .map(|&l| {
                let r = get(l);
                vec![Some(l), r.as_ref().map(|r| r.best.output_interval.0), r.as_ref().map(|r| r.best.output_interval.1), r.as_ref().map(|r| r.best.evaluation.sigma_out)]
            })
            .collect();
        written.push(write_panel(dir, e, &["lambda_deg_nm", "sigma_out_min_rad_per_fs", "sigma_out_max_rad_per_fs", "sigma_out_rad_per_fs"], &out, Some(&lab))?);
        let per: Vec<Vec<Option<f64>>> = lambdas
            .iter()
            .map(|&l| {
                let r = get(l);
                vec![Some(l), r.as_ref().map(|r| r.spdc_period_um), r.as_ref().map(|r| r.sfc_period_um)]
            })
            .collect();
        written.push(write_panel(dir, f, &["lambda_deg_nm", "period_spdc_um", "period_sfc_um"], &per, Some(&lab))?);
        Ok(())
    };
    design(sinc, &format!("fig{main}d"), &format!("fig{main}e"), &format!("fig{main}f"), &mut written)?;
    design(gaussian, &format!("fig{appendix}a"), &format!("fig{appendix}b"), &format!("fig{appendix}c"), &mut written)?;
    let reduced_rows: Vec<Vec<Option<f64>>> =
        lambdas.iter().map(|&l| vec![Some(l), metric(gaussian, l, |m| m.purity), metric(sinc, l, |m| m.purity)]).collect();
    written.push(write_panel(dir, &format!("fig10{reduced}"), &["lambda_deg_nm", "gaussian", "sinc"], &reduced_rows, None)?);
    for (panel, pts) in [(conv_s, sinc), (conv_g, gaussian)] {
        let rows: Vec<Vec<Option<f64>>> = lambdas
            .iter()
            .map(|&l| vec![Some(l), result_column(pts, l, |p| p.ok().and_then(|r| r.best.evaluation.report.conversion_efficiency)), conv(l, |c| c.p_both)])
            .collect();
        let lab = labels(pts);
        written.push(write_panel(dir, &format!("fig11{panel}"), &["lambda_deg_nm", "eta_conv", "eta_filt"], &rows, Some(&lab))?);
    }
    Ok(written)
}
