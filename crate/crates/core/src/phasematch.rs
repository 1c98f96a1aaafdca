//! Phase-matching configurations, phase mismatch of the two processes and
//! group-velocity-matching loci.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dispersion::{solve_poling_period, Axis, Crystal, CrystalDispersion, QpmGrating, ThreeWave, Wave};
use crate::units::{nm_from_omega, omega_from_nm};
use crate::{Error, Result};

/// Row label of the configuration table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConfigId {
    I,
    II,
    III,
    IV,
    V,
    VI,
    VII,
    VIII,
}

impl ConfigId {
    pub const ALL: [ConfigId; 8] = [
        ConfigId::I,
        ConfigId::II,
        ConfigId::III,
        ConfigId::IV,
        ConfigId::V,
        ConfigId::VI,
        ConfigId::VII,
        ConfigId::VIII,
    ];

    pub fn roman(self) -> &'static str {
        match self {
            ConfigId::I => "I",
            ConfigId::II => "II",
            ConfigId::III => "III",
            ConfigId::IV => "IV",
            ConfigId::V => "V",
            ConfigId::VI => "VI",
            ConfigId::VII => "VII",
            ConfigId::VIII => "VIII",
        }
    }

    /// 1-based row number.
    pub fn number(self) -> usize {
        self as usize + 1
    }
}

impl fmt::Display for ConfigId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.roman())
    }
}

impl FromStr for ConfigId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        if let Ok(n) = upper.parse::<usize>() {
            if (1..=8).contains(&n) {
                return Ok(ConfigId::ALL[n - 1]);
            }
        }
        ConfigId::ALL
            .into_iter()
            .find(|c| c.roman() == upper)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown configuration '{s}'")))
    }
}

/// SPDC polarizations, pump -> idler + signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpdcAxes {
    pub pump: Axis,
    pub idler: Axis,
    pub signal: Axis,
}

/// SFC polarizations, escort + idler -> converted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SfcAxes {
    pub escort: Axis,
    pub idler: Axis,
    pub converted: Axis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseMatchConfig {
    pub id: ConfigId,
    pub spdc: SpdcAxes,
    pub sfc: SfcAxes,
}

impl PhaseMatchConfig {
    const fn row(id: ConfigId, spdc: [Axis; 3], sfc: [Axis; 3]) -> Self {
        Self {
            id,
            spdc: SpdcAxes { pump: spdc[0], idler: spdc[1], signal: spdc[2] },
            sfc: SfcAxes { escort: sfc[0], idler: sfc[1], converted: sfc[2] },
        }
    }

    /// The idler converted by the SFC stage is the SPDC idler, and the
    /// converted photon is orthogonal to the signal.
    pub fn is_consistent(&self) -> bool {
        self.spdc.idler == self.sfc.idler && self.sfc.converted != self.spdc.signal
    }

    pub fn spdc_label(&self) -> String {
        format!("{}->{}+{}", self.spdc.pump, self.spdc.idler, self.spdc.signal)
    }

    pub fn sfc_label(&self) -> String {
        format!("{}+{}->{}", self.sfc.escort, self.sfc.idler, self.sfc.converted)
    }
}

use Axis::{X, Y, Z};

const TABLE: [PhaseMatchConfig; 8] = [
    PhaseMatchConfig::row(ConfigId::I, [Y, Y, Z], [Z, Y, Y]),
    PhaseMatchConfig::row(ConfigId::II, [Y, Z, Y], [Z, Z, Z]),
    PhaseMatchConfig::row(ConfigId::III, [Z, Z, Z], [Y, Z, Y]),
    PhaseMatchConfig::row(ConfigId::IV, [Z, Y, Y], [Y, Y, Z]),
    PhaseMatchConfig::row(ConfigId::V, [X, X, Z], [Z, X, X]),
    PhaseMatchConfig::row(ConfigId::VI, [X, Z, X], [Z, Z, Z]),
    PhaseMatchConfig::row(ConfigId::VII, [Z, Z, Z], [X, Z, X]),
    PhaseMatchConfig::row(ConfigId::VIII, [Z, X, X], [X, X, Z]),
];

/// Admissible configurations: all eight rows for KTP, rows I-IV for the
/// uniaxial crystals.
pub fn list_configs(crystal: Crystal) -> Vec<PhaseMatchConfig> {
    let n = if crystal.is_uniaxial() { 4 } else { 8 };
    TABLE[..n].to_vec()
}

pub fn config(crystal: Crystal, id: ConfigId) -> Result<PhaseMatchConfig> {
    list_configs(crystal)
        .into_iter()
        .find(|c| c.id == id)
        .ok_or_else(|| Error::InvalidParameter(format!("configuration {id} is not admissible for {crystal}")))
}

/// Wavelengths of all five fields derived from the degeneracy wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRelations {
    pub lambda_deg_nm: f64,
}

impl FrequencyRelations {
    pub fn new(lambda_deg_nm: f64) -> Result<Self> {
        if !(lambda_deg_nm > 0.0 && lambda_deg_nm.is_finite()) {
            return Err(Error::InvalidParameter(format!("degeneracy wavelength {lambda_deg_nm} nm")));
        }
        Ok(Self { lambda_deg_nm })
    }

    /// Recover the degeneracy wavelength from a pump wavelength.
    pub fn from_pump_nm(lambda_p_nm: f64) -> Result<Self> {
        Self::new(lambda_p_nm * 4.0 / 3.0)
    }

    pub fn lambda_p_nm(&self) -> f64 {
        0.75 * self.lambda_deg_nm
    }
    pub fn lambda_s_nm(&self) -> f64 {
        self.lambda_deg_nm
    }
    pub fn lambda_i_nm(&self) -> f64 {
        3.0 * self.lambda_deg_nm
    }
    pub fn lambda_e_nm(&self) -> f64 {
        1.5 * self.lambda_deg_nm
    }
    pub fn lambda_fc_nm(&self) -> f64 {
        self.lambda_deg_nm
    }

    pub fn omega_p(&self) -> f64 {
        omega_from_nm(self.lambda_p_nm())
    }
    pub fn omega_s(&self) -> f64 {
        omega_from_nm(self.lambda_s_nm())
    }
    pub fn omega_i(&self) -> f64 {
        omega_from_nm(self.lambda_i_nm())
    }
    pub fn omega_e(&self) -> f64 {
        omega_from_nm(self.lambda_e_nm())
    }
    pub fn omega_fc(&self) -> f64 {
        omega_from_nm(self.lambda_fc_nm())
    }

    pub fn spdc_process(&self, cfg: &PhaseMatchConfig) -> ThreeWave {
        ThreeWave {
            high: Wave { axis: cfg.spdc.pump, lambda_nm: self.lambda_p_nm() },
            low_a: Wave { axis: cfg.spdc.signal, lambda_nm: self.lambda_s_nm() },
            low_b: Wave { axis: cfg.spdc.idler, lambda_nm: self.lambda_i_nm() },
        }
    }

    pub fn sfc_process(&self, cfg: &PhaseMatchConfig) -> ThreeWave {
        ThreeWave {
            high: Wave { axis: cfg.sfc.converted, lambda_nm: self.lambda_fc_nm() },
            low_a: Wave { axis: cfg.sfc.escort, lambda_nm: self.lambda_e_nm() },
            low_b: Wave { axis: cfg.sfc.idler, lambda_nm: self.lambda_i_nm() },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Leg {
    Spdc,
    Sfc,
}

/// Quasi-phase-matching gratings of both regions at one degeneracy point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gratings {
    pub spdc: QpmGrating,
    pub sfc: QpmGrating,
}

pub fn solve_gratings(disp: &CrystalDispersion, cfg: &PhaseMatchConfig, rel: &FrequencyRelations) -> Result<Gratings> {
    Ok(Gratings {
        spdc: solve_poling_period(disp, &rel.spdc_process(cfg))?,
        sfc: solve_poling_period(disp, &rel.sfc_process(cfg))?,
    })
}

/// SPDC mismatch k_p - k_s - k_i - K_grating (rad/µm).
pub fn spdc_mismatch(
    disp: &CrystalDispersion,
    cfg: &PhaseMatchConfig,
    omega_p: f64,
    omega_s: f64,
    omega_i: f64,
    grating: &QpmGrating,
) -> Result<f64> {
    check_positive(&[omega_p, omega_s, omega_i])?;
    Ok(disp.wave_number_at(cfg.spdc.pump, omega_p)?
        - disp.wave_number_at(cfg.spdc.signal, omega_s)?
        - disp.wave_number_at(cfg.spdc.idler, omega_i)?
        - grating.momentum())
}

/// SFC mismatch k_FC - k_e - k_i - K_grating (rad/µm).
pub fn sfc_mismatch(
    disp: &CrystalDispersion,
    cfg: &PhaseMatchConfig,
    omega_e: f64,
    omega_i: f64,
    omega_fc: f64,
    grating: &QpmGrating,
) -> Result<f64> {
    check_positive(&[omega_e, omega_i, omega_fc])?;
    Ok(disp.wave_number_at(cfg.sfc.converted, omega_fc)?
        - disp.wave_number_at(cfg.sfc.escort, omega_e)?
        - disp.wave_number_at(cfg.sfc.idler, omega_i)?
        - grating.momentum())
}

fn check_positive(omegas: &[f64]) -> Result<()> {
    if omegas.iter().all(|w| *w > 0.0 && w.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter("frequencies must be positive".into()))
    }
}

/// Inverse group velocities (fs/µm) of the five fields at the centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupDelays {
    pub pump: f64,
    pub signal: f64,
    pub idler: f64,
    pub escort: f64,
    pub converted: f64,
}

impl GroupDelays {
    pub fn evaluate(disp: &CrystalDispersion, cfg: &PhaseMatchConfig, rel: &FrequencyRelations) -> Result<Self> {
        let sfc_idler = disp.inverse_group_velocity(cfg.sfc.idler, rel.lambda_i_nm())?;
        let idler = disp.inverse_group_velocity(cfg.spdc.idler, rel.lambda_i_nm())?;
        debug_assert_eq!(sfc_idler, idler);
        Ok(Self {
            pump: disp.inverse_group_velocity(cfg.spdc.pump, rel.lambda_p_nm())?,
            signal: disp.inverse_group_velocity(cfg.spdc.signal, rel.lambda_s_nm())?,
            idler,
            escort: disp.inverse_group_velocity(cfg.sfc.escort, rel.lambda_e_nm())?,
            converted: disp.inverse_group_velocity(cfg.sfc.converted, rel.lambda_fc_nm())?,
        })
    }

    /// Gradient of the SPDC mismatch with respect to (omega_s, omega_i).
    pub fn spdc_gradient(&self) -> [f64; 2] {
        [self.pump - self.signal, self.pump - self.idler]
    }

    /// Gradient of the SFC mismatch with respect to (omega_i, omega_FC),
    /// with the escort frequency eliminated by energy conservation.
    pub fn sfc_gradient(&self) -> [f64; 2] {
        [self.escort - self.idler, self.converted - self.escort]
    }
}

/// Threshold below which a group-delay difference counts as zero (fs/µm).
pub const DEGENERATE_SLOPE_EPS: f64 = 1e-6;

/// Direction of the phase-matching ridge in the (omega_s, omega_i) plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Orientation {
    /// d(omega_i)/d(omega_s) along the ridge.
    Slope(f64),
    /// The ridge is vertical (k_p' = k_i').
    Vertical { sign: f64 },
}

impl Orientation {
    pub fn from_group_delays(kp: f64, ks: f64, ki: f64) -> Self {
        let num = kp - ks;
        let den = ki - kp;
        if den.abs() < DEGENERATE_SLOPE_EPS {
            let sign = if num * den >= 0.0 { 1.0 } else { -1.0 };
            Orientation::Vertical { sign }
        } else {
            Orientation::Slope(num / den)
        }
    }

    /// Angle of the ridge from the omega_s axis, in degrees within (-90, 90].
    pub fn angle_deg(&self) -> f64 {
        match *self {
            Orientation::Slope(m) => m.atan().to_degrees(),
            Orientation::Vertical { .. } => 90.0,
        }
    }
}

/// Ridge orientation of the SPDC phase-matching function at the centre.
pub fn jsa_orientation(disp: &CrystalDispersion, cfg: &PhaseMatchConfig, rel: &FrequencyRelations) -> Result<Orientation> {
    let g = GroupDelays::evaluate(disp, cfg, rel)?;
    Ok(Orientation::from_group_delays(g.pump, g.signal, g.idler))
}

/// Polarizations of a type-2 process, pump -> signal + idler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Type2Axes {
    pub pump: Axis,
    pub signal: Axis,
    pub idler: Axis,
}

impl Type2Axes {
    /// Pump and signal on the fast axis, idler on the slow axis.
    pub fn default_for(crystal: Crystal) -> Self {
        match crystal {
            Crystal::Ktp => Self { pump: Axis::Y, signal: Axis::Y, idler: Axis::Z },
            Crystal::Ln | Crystal::MgLn => Self { pump: Axis::Z, signal: Axis::Z, idler: Axis::Y },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GvmCondition {
    /// k_p' = k_i'
    Vertical,
    /// k_p' = (k_s' + k_i')/2
    Circular,
    /// k_p' = k_s'
    Horizontal,
}

impl GvmCondition {
    pub const ALL: [GvmCondition; 3] = [GvmCondition::Vertical, GvmCondition::Circular, GvmCondition::Horizontal];

    pub fn name(self) -> &'static str {
        match self {
            GvmCondition::Vertical => "vertical",
            GvmCondition::Circular => "circular",
            GvmCondition::Horizontal => "horizontal",
        }
    }

    pub fn residual(self, kp: f64, ks: f64, ki: f64) -> f64 {
        match self {
            GvmCondition::Vertical => kp - ki,
            GvmCondition::Circular => kp - 0.5 * (ks + ki),
            GvmCondition::Horizontal => kp - ks,
        }
    }
}

impl FromStr for GvmCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GvmCondition::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown GVM condition '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GvmPoint {
    pub lambda_s_nm: f64,
    pub lambda_i_nm: f64,
    pub lambda_p_nm: f64,
    /// Point on the degeneracy diagonal lambda_s = lambda_i.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GvmCurve {
    pub condition: GvmCondition,
    pub points: Vec<GvmPoint>,
}

impl GvmCurve {
    pub fn degeneracy_crossings(&self) -> impl Iterator<Item = &GvmPoint> {
        self.points.iter().filter(|p| p.degenerate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GvmScan {
    /// Number of signal wavelengths at which the idler locus is solved.
    pub signal_samples: usize,
    /// Idler scan step before bisection (nm).
    pub scan_step_nm: f64,
    /// Bisection stops once the bracket is narrower than this (nm).
    pub tolerance_nm: f64,
}

impl Default for GvmScan {
    fn default() -> Self {
        Self { signal_samples: 201, scan_step_nm: 1.0, tolerance_nm: 1e-4 }
    }
}

/// Loci of the three group-velocity-matching conditions for signal and idler
/// wavelengths in `[lo_nm, hi_nm]`, each with its crossings of the
/// degeneracy diagonal.
pub fn trace_gvm_curves(
    disp: &CrystalDispersion,
    axes: Type2Axes,
    range_nm: (f64, f64),
    scan: GvmScan,
) -> Result<Vec<GvmCurve>> {
    let (lo, hi) = range_nm;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!("empty wavelength range [{lo}, {hi}] nm")));
    }
    for axis in [axes.signal, axes.idler] {
        let (vlo, vhi) = disp.valid_range_nm(axis);
        if lo < vlo || hi > vhi {
            return Err(Error::OutOfRange {
                crystal: disp.crystal().to_string(),
                axis: axis.to_string(),
                wavelength_nm: if lo < vlo { lo } else { hi },
                min_nm: vlo,
                max_nm: vhi,
            });
        }
    }
    // the pump of the shortest pair must also be inside the table
    disp.inverse_group_velocity(axes.pump, lo / 2.0)?;
    let kprime = |axis: Axis, l: f64| disp.inverse_group_velocity(axis, l);
    let pump_of = |ls: f64, li: f64| nm_from_omega(omega_from_nm(ls) + omega_from_nm(li));

    let residual = |cond: GvmCondition, ls: f64, li: f64| -> Result<f64> {
        Ok(cond.residual(kprime(axes.pump, pump_of(ls, li))?, kprime(axes.signal, ls)?, kprime(axes.idler, li)?))
    };

    let steps = ((hi - lo) / scan.scan_step_nm).ceil() as usize;
    let idler_grid: Vec<f64> = (0..=steps).map(|j| (lo + j as f64 * scan.scan_step_nm).min(hi)).collect();
    let ki_grid: Vec<f64> = idler_grid.iter().map(|&l| kprime(axes.idler, l)).collect::<Result<_>>()?;
    let samples = scan.signal_samples.max(2);

    let mut curves = Vec::with_capacity(3);
    for cond in GvmCondition::ALL {
        let mut points = Vec::new();
        for n in 0..samples {
            let ls = lo + (hi - lo) * n as f64 / (samples - 1) as f64;
            let ks = kprime(axes.signal, ls)?;
            let mut prev: Option<(f64, f64)> = None;
            for (j, &li) in idler_grid.iter().enumerate() {
                let r = cond.residual(kprime(axes.pump, pump_of(ls, li))?, ks, ki_grid[j]);
                if let Some((lp, rp)) = prev {
                    if rp == 0.0 || rp.signum() != r.signum() {
                        let root = bisect(|x| residual(cond, ls, x), lp, li, rp, scan.tolerance_nm)?;
                        points.push(GvmPoint {
                            lambda_s_nm: ls,
                            lambda_i_nm: root,
                            lambda_p_nm: pump_of(ls, root),
                            degenerate: false,
                        });
                    }
                }
                prev = Some((li, r));
            }
        }
        // crossings with the diagonal
        let mut prev: Option<(f64, f64)> = None;
        for &l in &idler_grid {
            let r = residual(cond, l, l)?;
            if let Some((lp, rp)) = prev {
                if rp == 0.0 || rp.signum() != r.signum() {
                    let root = bisect(|x| residual(cond, x, x), lp, l, rp, scan.tolerance_nm)?;
                    points.push(GvmPoint { lambda_s_nm: root, lambda_i_nm: root, lambda_p_nm: root / 2.0, degenerate: true });
                }
            }
            prev = Some((l, r));
        }
        points.sort_by(|a, b| a.lambda_s_nm.total_cmp(&b.lambda_s_nm).then(a.lambda_i_nm.total_cmp(&b.lambda_i_nm)));
        curves.push(GvmCurve { condition: cond, points });
    }
    Ok(curves)
}

/// Bisection on a sign-changing bracket, finished with a secant step.
fn bisect(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, mut fa: f64, tol: f64) -> Result<f64> {
    if fa == 0.0 {
        return Ok(a);
    }
    let mut fb = f(b)?;
    while (b - a).abs() > tol {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    if fb != fa {
        Ok(a - fa * (b - a) / (fb - fa))
    } else {
        Ok(0.5 * (a + b))
    }
}
