//! Sellmeier dispersion of KTP, LN and MgLN and quasi-phase-matching periods.
//!
//! Coefficient sets come from `data/sellmeier.toml`, embedded at build time.
//! An external file with the same schema (TOML or JSON) can replace them.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::units::{nm_from_omega, omega_from_nm, C_UM_PER_FS};
use crate::{Error, Result};

const EMBEDDED_SELLMEIER: &str = include_str!("../data/sellmeier.toml");

/// Working temperature of every coefficient set.
pub const CRYSTAL_TEMPERATURE_C: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum Crystal {
    #[serde(rename = "KTP", alias = "ktp")]
    Ktp,
    #[serde(rename = "LN", alias = "ln")]
    Ln,
    #[serde(rename = "MgLN", alias = "mgln")]
    MgLn,
}

impl Crystal {
    pub const ALL: [Crystal; 3] = [Crystal::Ktp, Crystal::Ln, Crystal::MgLn];

    /// Uniaxial crystals only have ordinary (y) and extraordinary (z) axes.
    pub fn is_uniaxial(self) -> bool {
        !matches!(self, Crystal::Ktp)
    }

    pub fn name(self) -> &'static str {
        match self {
            Crystal::Ktp => "KTP",
            Crystal::Ln => "LN",
            Crystal::MgLn => "MgLN",
        }
    }
}

impl fmt::Display for Crystal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Crystal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ktp" => Ok(Crystal::Ktp),
            "ln" | "linbo3" => Ok(Crystal::Ln),
            "mgln" | "mgo:ln" => Ok(Crystal::MgLn),
            other => Err(Error::InvalidParameter(format!("unknown crystal '{other}'"))),
        }
    }
}

/// Crystallographic polarization axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }

    pub fn from_letter(c: char) -> Result<Self> {
        match c.to_ascii_lowercase() {
            'x' => Ok(Axis::X),
            'y' => Ok(Axis::Y),
            'z' => Ok(Axis::Z),
            other => Err(Error::InvalidParameter(format!("unknown axis '{other}'"))),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SellmeierForm {
    /// n^2 = A + B/(l^2 - C) + D/(l^2 - E)
    KatoTakaoka,
    /// n^2 - 1 = sum_j A_j l^2/(l^2 - B_j)
    Zelmon,
    /// n = A, a dispersionless test medium.
    Constant,
}

impl SellmeierForm {
    fn expected_len(self) -> usize {
        match self {
            SellmeierForm::KatoTakaoka => 5,
            SellmeierForm::Zelmon => 6,
            SellmeierForm::Constant => 1,
        }
    }
}

/// One row of the coefficient file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SellmeierEntry {
    pub crystal: Crystal,
    pub axis: Axis,
    #[serde(default)]
    pub form: Option<SellmeierForm>,
    pub coefficients: Vec<f64>,
    pub valid_range_nm: [f64; 2],
    #[serde(default)]
    pub measured_range_nm: Option<[f64; 2]>,
    pub cutoff_nm: f64,
    pub source_citation: String,
}

impl SellmeierEntry {
    fn resolved_form(&self) -> SellmeierForm {
        self.form.unwrap_or(match self.crystal {
            Crystal::Ktp => SellmeierForm::KatoTakaoka,
            Crystal::Ln | Crystal::MgLn => SellmeierForm::Zelmon,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SellmeierFile {
    #[allow(dead_code)]
    version: u32,
    #[serde(default)]
    temperature_c: Option<f64>,
    entry: Vec<SellmeierEntry>,
}

/// Evaluated Sellmeier model of one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisModel {
    pub form: SellmeierForm,
    pub coefficients: Vec<f64>,
    pub valid_range_nm: (f64, f64),
    pub measured_range_nm: (f64, f64),
    pub source_citation: String,
}

impl AxisModel {
    fn from_entry(e: &SellmeierEntry) -> Result<Self> {
        let form = e.resolved_form();
        if e.coefficients.len() != form.expected_len() {
            return Err(Error::Parse(format!(
                "{} {}: {:?} needs {} coefficients, got {}",
                e.crystal,
                e.axis,
                form,
                form.expected_len(),
                e.coefficients.len()
            )));
        }
        let [lo, hi] = e.valid_range_nm;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::Parse(format!("{} {}: bad valid range", e.crystal, e.axis)));
        }
        let measured = e.measured_range_nm.unwrap_or(e.valid_range_nm);
        Ok(Self {
            form,
            coefficients: e.coefficients.clone(),
            valid_range_nm: (lo, hi),
            measured_range_nm: (measured[0], measured[1]),
            source_citation: e.source_citation.clone(),
        })
    }

    #[inline]
    fn index_unchecked(&self, lambda_um: f64) -> f64 {
        let c = &self.coefficients;
        let l2 = lambda_um * lambda_um;
        match self.form {
            SellmeierForm::KatoTakaoka => (c[0] + c[1] / (l2 - c[2]) + c[3] / (l2 - c[4])).sqrt(),
            SellmeierForm::Zelmon => (1.0
                + c[0] * l2 / (l2 - c[1])
                + c[2] * l2 / (l2 - c[3])
                + c[4] * l2 / (l2 - c[5]))
                .sqrt(),
            SellmeierForm::Constant => c[0],
        }
    }
}

/// Dispersion of one crystal at 20 °C.
#[derive(Debug, Clone, PartialEq)]
pub struct CrystalDispersion {
    crystal: Crystal,
    axes: [AxisModel; 3],
    /// Axis X of a uniaxial crystal is an alias of the ordinary axis.
    x_is_alias: bool,
    strict_axes: bool,
    cutoff_nm: f64,
}

impl CrystalDispersion {
    /// Embedded coefficient set for `crystal`.
    pub fn builtin(crystal: Crystal) -> &'static CrystalDispersion {
        static CATALOG: OnceLock<Vec<CrystalDispersion>> = OnceLock::new();
        let all = CATALOG.get_or_init(|| {
            parse_catalog(EMBEDDED_SELLMEIER, Format::Toml).expect("embedded Sellmeier data is valid")
        });
        all.iter()
            .find(|d| d.crystal == crystal)
            .expect("every crystal has an embedded coefficient set")
    }

    /// Assemble a crystal from coefficient rows. Uniaxial crystals need y
    /// and z (x is aliased to y when absent); KTP needs all three.
    pub fn from_entries(crystal: Crystal, entries: &[SellmeierEntry]) -> Result<Self> {
        let find = |axis: Axis| entries.iter().find(|e| e.crystal == crystal && e.axis == axis);
        let y = find(Axis::Y).ok_or_else(|| Error::Parse(format!("{crystal}: missing axis y")))?;
        let z = find(Axis::Z).ok_or_else(|| Error::Parse(format!("{crystal}: missing axis z")))?;
        let (x, x_is_alias) = match find(Axis::X) {
            Some(x) if !crystal.is_uniaxial() => (x, false),
            None if crystal.is_uniaxial() => (y, true),
            Some(_) => (y, true),
            None => return Err(Error::Parse(format!("{crystal}: missing axis x"))),
        };
        Ok(Self {
            crystal,
            cutoff_nm: y.cutoff_nm.min(z.cutoff_nm).min(x.cutoff_nm),
            axes: [AxisModel::from_entry(x)?, AxisModel::from_entry(y)?, AxisModel::from_entry(z)?],
            x_is_alias,
            strict_axes: false,
        })
    }

    /// Reject axis X of uniaxial crystals instead of mapping it to the
    /// ordinary axis.
    pub fn with_strict_axes(mut self, strict: bool) -> Self {
        self.strict_axes = strict;
        self
    }

    pub fn crystal(&self) -> Crystal {
        self.crystal
    }

    pub fn axis_model(&self, axis: Axis) -> &AxisModel {
        &self.axes[axis.index()]
    }

    pub fn cutoff_nm(&self) -> f64 {
        self.cutoff_nm
    }

    /// Shortest degeneracy wavelength of the frequency-converted source,
    /// where the pump (at 3/4 lambda_deg) reaches the absorption edge.
    pub fn fc_lower_limit_nm(&self) -> f64 {
        self.cutoff_nm * 4.0 / 3.0
    }

    /// Shortest wavelength of conventional degenerate SPDC (pump at lambda/2).
    pub fn degenerate_lower_limit_nm(&self) -> f64 {
        self.cutoff_nm * 2.0
    }

    pub fn valid_range_nm(&self, axis: Axis) -> (f64, f64) {
        self.axes[axis.index()].valid_range_nm
    }

    pub fn is_extrapolated(&self, axis: Axis, lambda_nm: f64) -> bool {
        let (lo, hi) = self.axes[axis.index()].measured_range_nm;
        lambda_nm < lo || lambda_nm > hi
    }

    fn model(&self, axis: Axis) -> Result<&AxisModel> {
        if axis == Axis::X && self.x_is_alias && self.strict_axes {
            return Err(Error::UnknownAxis {
                crystal: self.crystal.to_string(),
                axis: axis.to_string(),
            });
        }
        Ok(&self.axes[axis.index()])
    }

    /// Refractive index at a vacuum wavelength in nm.
    pub fn refractive_index(&self, axis: Axis, lambda_nm: f64) -> Result<f64> {
        let m = self.model(axis)?;
        let (lo, hi) = m.valid_range_nm;
        if !(lambda_nm >= lo && lambda_nm <= hi) {
            return Err(Error::OutOfRange {
                crystal: self.crystal.to_string(),
                axis: axis.to_string(),
                wavelength_nm: lambda_nm,
                min_nm: lo,
                max_nm: hi,
            });
        }
        Ok(m.index_unchecked(lambda_nm * 1e-3))
    }

    /// Wave number k = 2 pi n / lambda in rad/µm.
    pub fn wave_number(&self, axis: Axis, lambda_nm: f64) -> Result<f64> {
        let n = self.refractive_index(axis, lambda_nm)?;
        Ok(2.0 * PI * n / (lambda_nm * 1e-3))
    }

    /// Wave number (rad/µm) at angular frequency `omega` (rad/fs).
    #[inline]
    pub fn wave_number_at(&self, axis: Axis, omega: f64) -> Result<f64> {
        let n = self.refractive_index(axis, nm_from_omega(omega))?;
        Ok(n * omega / C_UM_PER_FS)
    }

    /// Inverse group velocity k' = dk/domega (fs/µm) at a wavelength in nm.
    pub fn inverse_group_velocity(&self, axis: Axis, lambda_nm: f64) -> Result<f64> {
        self.inverse_group_velocity_at(axis, omega_from_nm(lambda_nm))
    }

    /// Inverse group velocity at angular frequency `omega`, from central
    /// differences with a step that is halved until successive Richardson
    /// estimates agree.
    pub fn inverse_group_velocity_at(&self, axis: Axis, omega: f64) -> Result<f64> {
        let k = |w: f64| self.wave_number_at(axis, w);
        let central = |h: f64| -> Result<f64> { Ok((k(omega + h)? - k(omega - h)?) / (2.0 * h)) };
        let mut h = 1e-3 * omega;
        let mut coarse = central(h)?;
        let mut previous: Option<f64> = None;
        for _ in 0..16 {
            h *= 0.5;
            let fine = central(h)?;
            let extrapolated = (4.0 * fine - coarse) / 3.0;
            if let Some(p) = previous {
                if (extrapolated - p).abs() <= 1e-12 * extrapolated.abs() {
                    return Ok(extrapolated);
                }
            }
            previous = Some(extrapolated);
            coarse = fine;
            if h < 1e-6 * omega {
                break;
            }
        }
        Ok(previous.unwrap_or(coarse))
    }
}

#[derive(Debug, Clone, Copy)]
enum Format {
    Toml,
    Json,
}

fn parse_catalog(text: &str, format: Format) -> Result<Vec<CrystalDispersion>> {
    let file: SellmeierFile = match format {
        Format::Toml => toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?,
        Format::Json => serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?,
    };
    if let Some(t) = file.temperature_c {
        if (t - CRYSTAL_TEMPERATURE_C).abs() > 1e-9 {
            return Err(Error::Parse(format!(
                "coefficients at {t} C are not supported; only {CRYSTAL_TEMPERATURE_C} C"
            )));
        }
    }
    let mut out = Vec::new();
    for crystal in Crystal::ALL {
        if file.entry.iter().any(|e| e.crystal == crystal) {
            out.push(CrystalDispersion::from_entries(crystal, &file.entry)?);
        }
    }
    Ok(out)
}

/// Load a coefficient file (TOML, or JSON when the extension is `.json`).
pub fn load_catalog(path: &Path) -> Result<Vec<CrystalDispersion>> {
    let text = std::fs::read_to_string(path)?;
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        _ => Format::Toml,
    };
    parse_catalog(&text, format)
}

/// Resolve a crystal from an optional coefficient file, falling back to the
/// embedded defaults when the file is absent or lacks that crystal.
pub fn resolve(crystal: Crystal, path: Option<&Path>) -> Result<CrystalDispersion> {
    if let Some(p) = path {
        if p.exists() {
            if let Some(d) = load_catalog(p)?.into_iter().find(|d| d.crystal == crystal) {
                return Ok(d);
            }
        }
    }
    Ok(CrystalDispersion::builtin(crystal).clone())
}

/// Direction of the poling grating vector relative to the beams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GratingOrientation {
    /// Grating momentum subtracts from k_high - k_low1 - k_low2.
    Forward,
    /// Grating momentum adds (the bare mismatch is negative).
    Reverse,
}

impl GratingOrientation {
    pub fn sign(self) -> f64 {
        match self {
            GratingOrientation::Forward => 1.0,
            GratingOrientation::Reverse => -1.0,
        }
    }
}

/// First-order quasi-phase-matching grating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpmGrating {
    pub period_um: f64,
    pub orientation: GratingOrientation,
}

impl QpmGrating {
    pub fn new(period_um: f64, orientation: GratingOrientation) -> Result<Self> {
        if !(period_um > 0.0 && period_um.is_finite()) {
            return Err(Error::InvalidParameter(format!("poling period {period_um} µm")));
        }
        Ok(Self { period_um, orientation })
    }

    /// Signed grating momentum 2 pi m / Lambda in rad/µm.
    pub fn momentum(&self) -> f64 {
        self.orientation.sign() * 2.0 * PI * f64::from(POLING_ORDER) / self.period_um
    }
}

pub const POLING_ORDER: u32 = 1;
pub const MIN_REGION_LENGTH_MM: f64 = 1.0;
pub const MAX_REGION_LENGTH_MM: f64 = 30.0;

/// A poled region: grating plus region length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolingSpec {
    pub grating: QpmGrating,
    pub order: u32,
    pub length_mm: f64,
}

impl PolingSpec {
    pub fn new(grating: QpmGrating, length_mm: f64) -> Result<Self> {
        if !(MIN_REGION_LENGTH_MM..=MAX_REGION_LENGTH_MM).contains(&length_mm) {
            return Err(Error::InvalidParameter(format!(
                "region length {length_mm} mm outside [{MIN_REGION_LENGTH_MM}, {MAX_REGION_LENGTH_MM}] mm"
            )));
        }
        Ok(Self { grating, order: POLING_ORDER, length_mm })
    }
}

/// A field taking part in a three-wave process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub axis: Axis,
    pub lambda_nm: f64,
}

/// Three-wave mixing with one high-frequency field and two low-frequency
/// fields, omega_high = omega_a + omega_b.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeWave {
    pub high: Wave,
    pub low_a: Wave,
    pub low_b: Wave,
}

impl ThreeWave {
    /// Relative energy-conservation residual.
    pub fn energy_residual(&self) -> f64 {
        let wh = 1.0 / self.high.lambda_nm;
        let sum = 1.0 / self.low_a.lambda_nm + 1.0 / self.low_b.lambda_nm;
        (wh - sum).abs() / wh
    }

    /// k_high - k_a - k_b without any grating contribution.
    pub fn bare_mismatch(&self, disp: &CrystalDispersion) -> Result<f64> {
        Ok(disp.wave_number(self.high.axis, self.high.lambda_nm)?
            - disp.wave_number(self.low_a.axis, self.low_a.lambda_nm)?
            - disp.wave_number(self.low_b.axis, self.low_b.lambda_nm)?)
    }
}

/// Grating that zeroes the mismatch of `process` at first order.
///
/// The grating orientation follows the sign of the bare mismatch, so any
/// nonzero bare mismatch can be compensated. A vanishing bare mismatch
/// (infinite period) is reported as `NoPhaseMatch`.
pub fn solve_poling_period(disp: &CrystalDispersion, process: &ThreeWave) -> Result<QpmGrating> {
    let residual = process.energy_residual();
    if residual > 1e-9 {
        return Err(Error::EnergyMismatch { residual });
    }
    let dk = process.bare_mismatch(disp)?;
    if !(dk.abs() > 1e-9) {
        return Err(Error::NoPhaseMatch(format!(
            "bare mismatch {dk:e} rad/µm needs no grating (infinite period)"
        )));
    }
    let orientation = if dk > 0.0 { GratingOrientation::Forward } else { GratingOrientation::Reverse };
    QpmGrating::new(2.0 * PI * f64::from(POLING_ORDER) / dk.abs(), orientation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ktp() -> &'static CrystalDispersion {
        CrystalDispersion::builtin(Crystal::Ktp)
    }

    fn ln() -> &'static CrystalDispersion {
        CrystalDispersion::builtin(Crystal::Ln)
    }

    // Independent re-evaluation of the published formulas.
    fn kato_z(l_um: f64) -> f64 {
        let l2 = l_um * l_um;
        (4.59423 + 0.06206 / (l2 - 0.04763) + 110.80672 / (l2 - 86.12171)).sqrt()
    }

    fn zelmon_o(l_um: f64) -> f64 {
        let l2 = l_um * l_um;
        (1.0 + 2.6734 * l2 / (l2 - 0.01764) + 1.2290 * l2 / (l2 - 0.05914) + 12.614 * l2 / (l2 - 474.60))
            .sqrt()
    }

    #[test]
    fn ktp_z_index_at_1064() {
        let n = ktp().refractive_index(Axis::Z, 1064.0).unwrap();
        assert_relative_eq!(n, kato_z(1.064), max_relative = 1e-14);
        assert!((n - 1.830).abs() < 2e-3, "n_z = {n}");
    }

    #[test]
    fn ln_ordinary_index_at_1064() {
        let n = ln().refractive_index(Axis::Y, 1064.0).unwrap();
        assert_relative_eq!(n, zelmon_o(1.064), max_relative = 1e-14);
        assert!((n - 2.232).abs() < 2e-3, "n_o = {n}");
        let ne = ln().refractive_index(Axis::Z, 1064.0).unwrap();
        assert!((ne - 2.156).abs() < 3e-3, "n_e = {ne}");
    }

    #[test]
    fn index_is_deterministic_and_above_one() {
        let a = ktp().refractive_index(Axis::Z, 1064.0).unwrap();
        let b = ktp().refractive_index(Axis::Z, 1064.0).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        for crystal in Crystal::ALL {
            let d = CrystalDispersion::builtin(crystal);
            for axis in [Axis::X, Axis::Y, Axis::Z] {
                let (lo, hi) = d.valid_range_nm(axis);
                let mut prev = f64::INFINITY;
                let mut l = lo;
                while l <= hi {
                    let n = d.refractive_index(axis, l).unwrap();
                    assert!(n > 1.0);
                    assert!(n < prev, "{crystal} {axis} not normal at {l}");
                    prev = n;
                    l += 25.0;
                }
            }
        }
    }

    #[test]
    fn out_of_range_is_rejected() {
        assert!(matches!(ktp().refractive_index(Axis::Y, 200.0), Err(Error::OutOfRange { .. })));
        assert!(matches!(ln().refractive_index(Axis::Y, 6000.0), Err(Error::OutOfRange { .. })));
        assert!(ktp().inverse_group_velocity(Axis::Y, 340.05).is_err());
    }

    #[test]
    fn uniaxial_x_aliases_ordinary_unless_strict() {
        let d = ln();
        assert_eq!(
            d.refractive_index(Axis::X, 900.0).unwrap(),
            d.refractive_index(Axis::Y, 900.0).unwrap()
        );
        let strict = d.clone().with_strict_axes(true);
        assert!(matches!(strict.refractive_index(Axis::X, 900.0), Err(Error::UnknownAxis { .. })));
        assert!(strict.refractive_index(Axis::Z, 900.0).is_ok());
    }

    #[test]
    fn wave_number_formula() {
        let n = ktp().refractive_index(Axis::Z, 1064.0).unwrap();
        let k = ktp().wave_number(Axis::Z, 1064.0).unwrap();
        assert_relative_eq!(k, 2.0 * PI * n / 1.064, max_relative = 1e-14);
    }

    fn constant_medium(n: f64) -> CrystalDispersion {
        let entry = |axis| SellmeierEntry {
            crystal: Crystal::Ktp,
            axis,
            form: Some(SellmeierForm::Constant),
            coefficients: vec![n],
            valid_range_nm: [200.0, 5000.0],
            measured_range_nm: None,
            cutoff_nm: 200.0,
            source_citation: "test medium".into(),
        };
        CrystalDispersion::from_entries(Crystal::Ktp, &[entry(Axis::X), entry(Axis::Y), entry(Axis::Z)])
            .unwrap()
    }

    #[test]
    fn dispersionless_and_doubled_index_media() {
        let one = constant_medium(2.0);
        // n = 2, lambda = 1000 nm -> k = 4 pi rad/µm
        assert_relative_eq!(one.wave_number(Axis::X, 1000.0).unwrap(), 4.0 * PI, max_relative = 1e-14);
        let kp = one.inverse_group_velocity(Axis::X, 1000.0).unwrap();
        assert_relative_eq!(kp, 2.0 / C_UM_PER_FS, max_relative = 1e-9);
        let two = constant_medium(4.0);
        assert_relative_eq!(
            two.wave_number(Axis::Y, 1300.0).unwrap(),
            2.0 * one.wave_number(Axis::Y, 1300.0).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn group_velocity_matches_five_point_stencil() {
        for (axis, l) in [(Axis::Y, 775.0), (Axis::Z, 1550.0), (Axis::X, 3000.0)] {
            let w = omega_from_nm(l);
            let h = 2e-3 * w;
            let k = |x: f64| ktp().wave_number_at(axis, x).unwrap();
            let stencil = (-k(w + 2.0 * h) + 8.0 * k(w + h) - 8.0 * k(w - h) + k(w - 2.0 * h)) / (12.0 * h);
            let kp = ktp().inverse_group_velocity(axis, l).unwrap();
            assert_relative_eq!(kp, stencil, max_relative = 1e-6);
        }
    }

    #[test]
    fn symmetric_gvm_near_telecom_degeneracy() {
        let kp = |a, l| ktp().inverse_group_velocity(a, l).unwrap();
        let pump = kp(Axis::Y, 787.5);
        let mean = 0.5 * (kp(Axis::Y, 1575.0) + kp(Axis::Z, 1575.0));
        assert!((pump - mean).abs() / pump < 0.01);
    }

    #[test]
    fn ppktp_type2_period() {
        let process = ThreeWave {
            high: Wave { axis: Axis::Y, lambda_nm: 775.0 },
            low_a: Wave { axis: Axis::Y, lambda_nm: 1550.0 },
            low_b: Wave { axis: Axis::Z, lambda_nm: 1550.0 },
        };
        let g = solve_poling_period(ktp(), &process).unwrap();
        assert!((g.period_um - 46.0).abs() < 2.0, "period {}", g.period_um);
        let residual = process.bare_mismatch(ktp()).unwrap() - g.momentum();
        assert!(residual.abs() < 1e-9);
    }

    #[test]
    fn energy_mismatch_is_rejected() {
        let process = ThreeWave {
            high: Wave { axis: Axis::Y, lambda_nm: 775.0 },
            low_a: Wave { axis: Axis::Y, lambda_nm: 1550.0 },
            low_b: Wave { axis: Axis::Z, lambda_nm: 1551.0 },
        };
        assert!(matches!(solve_poling_period(ktp(), &process), Err(Error::EnergyMismatch { .. })));
    }

    #[test]
    fn doubling_wave_numbers_halves_period() {
        let process = ThreeWave {
            high: Wave { axis: Axis::Z, lambda_nm: 600.0 },
            low_a: Wave { axis: Axis::Z, lambda_nm: 1200.0 },
            low_b: Wave { axis: Axis::Z, lambda_nm: 1200.0 },
        };
        let single = solve_poling_period(ktp(), &process).unwrap();
        let doubled = 2.0 * process.bare_mismatch(ktp()).unwrap();
        let period = 2.0 * PI / doubled.abs();
        assert_relative_eq!(period, single.period_um / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn poling_spec_length_bounds() {
        let g = QpmGrating::new(10.0, GratingOrientation::Forward).unwrap();
        assert!(PolingSpec::new(g, 0.5).is_err());
        assert!(PolingSpec::new(g, 31.0).is_err());
        assert_eq!(PolingSpec::new(g, 10.0).unwrap().order, 1);
        assert!(QpmGrating::new(-1.0, GratingOrientation::Forward).is_err());
    }

    #[test]
    fn catalog_file_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("coeffs.json");
        let text = r#"{"version":1,"entry":[
            {"crystal":"LN","axis":"y","coefficients":[2.6734,0.01764,1.2290,0.05914,12.614,474.60],
             "valid_range_nm":[400,5000],"cutoff_nm":400,"source_citation":"Zelmon"},
            {"crystal":"LN","axis":"z","coefficients":[2.9804,0.02047,0.5981,0.0666,8.9543,416.08],
             "valid_range_nm":[400,5000],"cutoff_nm":400,"source_citation":"Zelmon"}]}"#;
        std::fs::write(&path, text).unwrap();
        let d = resolve(Crystal::Ln, Some(&path)).unwrap();
        assert_eq!(
            d.refractive_index(Axis::Z, 1000.0).unwrap(),
            ln().refractive_index(Axis::Z, 1000.0).unwrap()
        );
        // missing file falls back to embedded data
        let fallback = resolve(Crystal::Ktp, Some(&dir.path().join("nope.toml"))).unwrap();
        assert_eq!(&fallback, ktp());
    }

    #[test]
    fn limits_follow_cutoffs() {
        assert!((ktp().fc_lower_limit_nm() - 466.0).abs() < 10.0);
        assert!((ln().fc_lower_limit_nm() - 534.0).abs() < 10.0);
        assert!((ktp().degenerate_lower_limit_nm() - 710.0).abs() < 15.0);
        assert!(ktp().is_extrapolated(Axis::Z, 4500.0));
        assert!(!ktp().is_extrapolated(Axis::Z, 1500.0));
    }
}
