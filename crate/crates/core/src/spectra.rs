//! Discretized spectral amplitudes: envelopes, phase-matching functions,
//! JSA, JCA, effective JSA and top-hat filters.
//!
//! A [`SpectralGrid`] has rows along `axis1` and columns along `axis2`. The
//! JSA lives on (omega_s, omega_i), the JCA on (omega_i, omega_FC) and the
//! effective JSA on (omega_s, omega_FC).

use nalgebra::{DMatrix, DVector, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::{CrystalDispersion, QpmGrating};
use crate::exec::Execution;
use crate::phasematch::{Leg, PhaseMatchConfig, SfcAxes, SpdcAxes};
use crate::units::{nm_from_omega, omega_from_nm};
use crate::{Error, Result};

pub const MIN_POINTS: usize = 64;
pub const DEFAULT_POINTS: usize = 512;

/// Uniform frequency axis (rad/fs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralAxis {
    pub center: f64,
    pub half_width: f64,
    pub points: usize,
}

impl SpectralAxis {
    pub fn new(center: f64, half_width: f64, points: usize) -> Result<Self> {
        if !(center > 0.0 && half_width > 0.0 && half_width < center && center.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "axis centre {center} rad/fs with half-width {half_width} rad/fs"
            )));
        }
        if points < 2 {
            return Err(Error::InvalidParameter(format!("axis needs at least 2 points, got {points}")));
        }
        Ok(Self { center, half_width, points })
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        self.center - self.half_width + i as f64 * self.step()
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.value(i)).collect()
    }

    pub fn min(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn max(&self) -> f64 {
        self.center + self.half_width
    }

    /// Same centre, step and point count to relative 1e-12.
    pub fn same_as(&self, other: &SpectralAxis) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        self.points == other.points && close(self.center, other.center) && close(self.step(), other.step())
    }

    /// Inclusive index range of grid points with lo <= omega <= hi.
    pub fn index_range(&self, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let step = self.step();
        let first = ((lo - self.min()) / step - 1e-9).ceil().max(0.0) as usize;
        let last_f = ((hi - self.min()) / step + 1e-9).floor();
        if last_f < 0.0 {
            return None;
        }
        let last = (last_f as usize).min(self.points - 1);
        (first <= last).then_some((first, last))
    }

    /// Sub-axis of the points `first..=last`.
    pub fn slice(&self, first: usize, last: usize) -> SpectralAxis {
        let lo = self.value(first);
        let hi = self.value(last);
        SpectralAxis { center: 0.5 * (lo + hi), half_width: 0.5 * (hi - lo), points: last - first + 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub axis1: SpectralAxis,
    pub axis2: SpectralAxis,
}

impl SpectralGrid {
    pub fn new(axis1: SpectralAxis, axis2: SpectralAxis) -> Result<Self> {
        if axis1.points < MIN_POINTS || axis2.points < MIN_POINTS {
            return Err(Error::InvalidParameter(format!(
                "grids need at least {MIN_POINTS} points per axis, got {}x{}",
                axis1.points, axis2.points
            )));
        }
        Ok(Self { axis1, axis2 })
    }

    /// Grid without the minimum-size check, for sub-blocks of a valid grid.
    pub(crate) fn block(axis1: SpectralAxis, axis2: SpectralAxis) -> Self {
        Self { axis1, axis2 }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.axis1.points, self.axis2.points)
    }

    pub fn cell_area(&self) -> f64 {
        self.axis1.step() * self.axis2.step()
    }

    /// Both axes coincide, so exchanging the two photons is meaningful.
    pub fn is_square(&self) -> bool {
        self.axis1.same_as(&self.axis2)
    }

    pub fn same_as(&self, other: &SpectralGrid) -> bool {
        self.axis1.same_as(&other.axis1) && self.axis2.same_as(&other.axis2)
    }
}

/// A real factor (envelope or phase-matching function) sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub grid: SpectralGrid,
    pub values: DMatrix<f64>,
}

impl Factor {
    pub fn from_fn(grid: SpectralGrid, exec: Execution, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        let (r, c) = grid.shape();
        let (a1, a2) = (grid.axis1, grid.axis2);
        let data = exec.fill_column_major(r, c, |i, j| f(a1.value(i), a2.value(j)));
        Self { grid, values: DMatrix::from_vec(r, c, data) }
    }

    pub fn ones(grid: SpectralGrid) -> Self {
        let (r, c) = grid.shape();
        Self { grid, values: DMatrix::from_element(r, c, 1.0) }
    }
}

#[inline]
fn gaussian(x: f64, sigma: f64) -> f64 {
    (-x * x / (2.0 * sigma * sigma)).exp()
}

#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

fn check_width(name: &str, sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {sigma}")))
    }
}

/// alpha(omega_1 + omega_2) on an (omega_s, omega_i) grid.
pub fn pump_envelope(grid: SpectralGrid, sigma_p: f64, omega_p: f64, exec: Execution) -> Result<Factor> {
    check_width("pump bandwidth", sigma_p)?;
    Ok(Factor::from_fn(grid, exec, |ws, wi| gaussian(ws + wi - omega_p, sigma_p)))
}

/// beta(omega_2 - omega_1) on an (omega_i, omega_FC) grid.
pub fn escort_envelope(grid: SpectralGrid, sigma_e: f64, omega_e: f64, exec: Execution) -> Result<Factor> {
    check_width("escort bandwidth", sigma_e)?;
    Ok(Factor::from_fn(grid, exec, |wi, wf| gaussian(wf - wi - omega_e, sigma_e)))
}

/// Polarizations of one poled region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LegAxes {
    Spdc(SpdcAxes),
    Sfc(SfcAxes),
}

/// One poled region: dispersion, polarizations and grating.
#[derive(Debug, Clone, Copy)]
pub struct PhaseMatchLeg<'a> {
    pub disp: &'a CrystalDispersion,
    pub axes: LegAxes,
    pub grating: QpmGrating,
}

impl<'a> PhaseMatchLeg<'a> {
    pub fn spdc(disp: &'a CrystalDispersion, config: &PhaseMatchConfig, grating: QpmGrating) -> Self {
        Self { disp, axes: LegAxes::Spdc(config.spdc), grating }
    }

    pub fn sfc(disp: &'a CrystalDispersion, config: &PhaseMatchConfig, grating: QpmGrating) -> Self {
        Self { disp, axes: LegAxes::Sfc(config.sfc), grating }
    }

    pub fn of(disp: &'a CrystalDispersion, config: &PhaseMatchConfig, leg: Leg, grating: QpmGrating) -> Self {
        match leg {
            Leg::Spdc => Self::spdc(disp, config, grating),
            Leg::Sfc => Self::sfc(disp, config, grating),
        }
    }

    /// Mismatch at grid coordinates: (omega_s, omega_i) for SPDC,
    /// (omega_i, omega_FC) for SFC.
    #[inline]
    pub fn mismatch(&self, w1: f64, w2: f64) -> Result<f64> {
        let d = self.disp;
        let bare = match self.axes {
            LegAxes::Spdc(a) => {
                d.wave_number_at(a.pump, w1 + w2)? - d.wave_number_at(a.signal, w1)? - d.wave_number_at(a.idler, w2)?
            }
            LegAxes::Sfc(a) => {
                d.wave_number_at(a.converted, w2)? - d.wave_number_at(a.escort, w2 - w1)? - d.wave_number_at(a.idler, w1)?
            }
        };
        Ok(bare - self.grating.momentum())
    }

    /// Gradient of the mismatch with respect to the two grid coordinates.
    pub fn gradient(&self, w1: f64, w2: f64) -> Result<[f64; 2]> {
        let d = self.disp;
        match self.axes {
            LegAxes::Spdc(a) => {
                let kp = d.inverse_group_velocity_at(a.pump, w1 + w2)?;
                Ok([kp - d.inverse_group_velocity_at(a.signal, w1)?, kp - d.inverse_group_velocity_at(a.idler, w2)?])
            }
            LegAxes::Sfc(a) => {
                let ke = d.inverse_group_velocity_at(a.escort, w2 - w1)?;
                Ok([
                    ke - d.inverse_group_velocity_at(a.idler, w1)?,
                    d.inverse_group_velocity_at(a.converted, w2)? - ke,
                ])
            }
        }
    }

    /// Mismatch sampled on every grid point.
    pub fn mismatch_grid(&self, grid: &SpectralGrid, exec: Execution) -> Result<DMatrix<f64>> {
        let (a1, a2) = (grid.axis1, grid.axis2);
        // every wave number is monotone in the grid coordinates, so the
        // corners bound the range of all frequencies involved
        for (i, j) in [(0, 0), (0, a2.points - 1), (a1.points - 1, 0), (a1.points - 1, a2.points - 1)] {
            self.mismatch(a1.value(i), a2.value(j))?;
        }
        let (r, c) = grid.shape();
        let data = exec.fill_column_major(r, c, |i, j| self.mismatch(a1.value(i), a2.value(j)).unwrap_or(f64::NAN));
        let m = DMatrix::from_vec(r, c, data);
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("phase mismatch is not finite on the grid".into()));
        }
        Ok(m)
    }
}

/// sinc(Delta k L / 2) for a uniformly poled region of `length_mm`.
pub fn pmf_sinc(grid: SpectralGrid, leg: &PhaseMatchLeg<'_>, length_mm: f64, exec: Execution) -> Result<Factor> {
    check_width("region length", length_mm)?;
    let half_l = 0.5 * length_mm * 1e3;
    let dk = leg.mismatch_grid(&grid, exec)?;
    Ok(Factor { grid, values: dk.map(|d| sinc(d * half_l)) })
}

/// Gaussian phase-matching function along the same ridge. `sigma` is the
/// standard deviation of the amplitude measured normal to the ridge in the
/// grid plane, exp(-d^2 / (2 sigma^2)).
pub fn pmf_gaussian(grid: SpectralGrid, leg: &PhaseMatchLeg<'_>, sigma: f64, exec: Execution) -> Result<Factor> {
    check_width("phase-matching bandwidth", sigma)?;
    let g = leg.gradient(grid.axis1.center, grid.axis2.center)?;
    let s = sigma * g[0].hypot(g[1]);
    if !(s > 0.0) {
        return Err(Error::DivisionByZero("phase mismatch has no frequency dependence".into()));
    }
    let dk = leg.mismatch_grid(&grid, exec)?;
    Ok(Factor { grid, values: dk.map(|d| gaussian(d, s)) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmplitudeKind {
    Jsa,
    Jca,
    Effective,
}

impl AmplitudeKind {
    pub fn name(self) -> &'static str {
        match self {
            AmplitudeKind::Jsa => "jsa",
            AmplitudeKind::Jca => "jca",
            AmplitudeKind::Effective => "effective",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Raw product of factors, peak near 1.
    Unnormalized,
    /// Largest singular value of the kernel sqrt(d1 d2) * values equals 1.
    UnitKernel,
    /// Contraction of a unit-kernel JCA with a JSA.
    Contracted,
}

/// A^H A over the smaller dimension.
fn gram<T: nalgebra::ComplexField>(m: &DMatrix<T>) -> DMatrix<T> {
    if m.nrows() >= m.ncols() {
        m.adjoint() * m
    } else {
        m * m.adjoint()
    }
}

/// Relative magnitude below which entries are dropped before an SVD.
const NEGLIGIBLE: f64 = 1e-150;

/// Amplitude storage. Real amplitudes take the fast paths.
#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

impl Values {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Values::Real(m) => m.shape(),
            Values::Complex(m) => m.shape(),
        }
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        match self {
            Values::Real(m) => m.map(|v| Complex64::new(v, 0.0)),
            Values::Complex(m) => m.clone(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        match self {
            Values::Real(m) => Complex64::new(m[(i, j)], 0.0),
            Values::Complex(m) => m[(i, j)],
        }
    }

    pub fn norm_squared(&self) -> f64 {
        match self {
            Values::Real(m) => m.iter().map(|v| v * v).sum(),
            Values::Complex(m) => m.iter().map(|v| v.norm_sqr()).sum(),
        }
    }

    /// |f|^2 at every point.
    pub fn intensity(&self) -> DMatrix<f64> {
        match self {
            Values::Real(m) => m.map(|v| v * v),
            Values::Complex(m) => m.map(|v| v.norm_sqr()),
        }
    }

    pub fn scale(&mut self, s: f64) {
        match self {
            Values::Real(m) => *m *= s,
            Values::Complex(m) => m.iter_mut().for_each(|v| *v *= s),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Values::Real(m) => m.iter().all(|v| v.is_finite()),
            Values::Complex(m) => m.iter().all(|v| v.re.is_finite() && v.im.is_finite()),
        }
    }

    /// Singular values, descending, or an error for zero or non-finite entries.
    ///
    /// Rare ill-conditioned inputs where the bidiagonal iteration stalls fall
    /// back to the eigenvalues of the Gram matrix.
    pub fn singular_values(&self) -> Result<DVector<f64>> {
        if !self.is_finite() {
            return Err(Error::InvalidParameter("amplitude has non-finite entries".into()));
        }
        let (r, c) = self.shape();
        let iters = 100 * r.max(c).max(1);
        // entries this small cannot be rescaled without overflow
        let tiny = 1e-280;
        let gram_sv = |ev: DVector<f64>| ev.map(|v| v.max(0.0).sqrt());
        let sv = match self {
            Values::Real(m) => {
                let a = m.amax();
                if !(a > tiny) {
                    return Err(Error::ZeroAmplitude);
                }
                // entries far below the peak only slow the iteration down
                let scaled = m.map(|v| if v.abs() > NEGLIGIBLE * a { v / a } else { 0.0 });
                let sv = SVD::try_new_unordered(scaled.clone(), false, false, f64::EPSILON, iters).map(|s| s.singular_values);
                sv.filter(|v| v.iter().all(|x| x.is_finite()))
                    .unwrap_or_else(|| gram_sv(gram(&scaled).symmetric_eigenvalues()))
                    * a
            }
            Values::Complex(m) => {
                let a = m.iter().map(|v| v.norm()).fold(0.0, f64::max);
                if !(a > tiny) {
                    return Err(Error::ZeroAmplitude);
                }
                let scaled = m.map(|v| if v.norm() > NEGLIGIBLE * a { v / a } else { Complex64::new(0.0, 0.0) });
                let sv = SVD::try_new_unordered(scaled.clone(), false, false, f64::EPSILON, iters).map(|s| s.singular_values);
                sv.filter(|v| v.iter().all(|x| x.is_finite()))
                    .unwrap_or_else(|| gram_sv(gram(&scaled).symmetric_eigenvalues()))
                    * a
            }
        };
        let mut sv = sv;
        if !sv.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("singular values are not finite".into()));
        }
        sv.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
        Ok(sv)
    }

    pub fn transpose(&self) -> Values {
        match self {
            Values::Real(m) => Values::Real(m.transpose()),
            Values::Complex(m) => Values::Complex(m.transpose()),
        }
    }

    fn view(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Values {
        match self {
            Values::Real(m) => Values::Real(m.view((r0, c0), (nr, nc)).into_owned()),
            Values::Complex(m) => Values::Complex(m.view((r0, c0), (nr, nc)).into_owned()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointAmplitude {
    pub grid: SpectralGrid,
    pub values: Values,
    pub kind: AmplitudeKind,
    pub normalization: Normalization,
}

impl JointAmplitude {
    pub fn new(grid: SpectralGrid, values: Values, kind: AmplitudeKind, normalization: Normalization) -> Result<Self> {
        if values.shape() != grid.shape() {
            return Err(Error::GridMismatch(format!(
                "values {:?} do not match grid {:?}",
                values.shape(),
                grid.shape()
            )));
        }
        if !values.is_finite() {
            return Err(Error::InvalidParameter("amplitude has non-finite entries".into()));
        }
        Ok(Self { grid, values, kind, normalization })
    }

    pub fn real(grid: SpectralGrid, values: DMatrix<f64>, kind: AmplitudeKind) -> Result<Self> {
        Self::new(grid, Values::Real(values), kind, Normalization::Unnormalized)
    }

    /// Squared norm including the quadrature weight of one grid cell.
    pub fn weighted_norm_squared(&self) -> f64 {
        self.values.norm_squared() * self.grid.cell_area()
    }

    pub fn is_zero(&self) -> bool {
        self.values.norm_squared() == 0.0
    }

    /// Exchange the roles of the two axes.
    pub fn transpose(&self) -> JointAmplitude {
        JointAmplitude {
            grid: SpectralGrid::block(self.grid.axis2, self.grid.axis1),
            values: self.values.transpose(),
            kind: self.kind,
            normalization: self.normalization,
        }
    }

    /// Rectangular sub-block, inclusive index ranges.
    pub fn block(&self, rows: (usize, usize), cols: (usize, usize)) -> JointAmplitude {
        let (r0, r1) = rows;
        let (c0, c1) = cols;
        JointAmplitude {
            grid: SpectralGrid::block(self.grid.axis1.slice(r0, r1), self.grid.axis2.slice(c0, c1)),
            values: self.values.view(r0, c0, r1 - r0 + 1, c1 - c0 + 1),
            kind: self.kind,
            normalization: self.normalization,
        }
    }
}

fn product(a: &Factor, b: &Factor, kind: AmplitudeKind) -> Result<JointAmplitude> {
    if !a.grid.same_as(&b.grid) {
        return Err(Error::GridMismatch(format!("cannot multiply {} factors on different grids", kind.name())));
    }
    JointAmplitude::real(a.grid, a.values.component_mul(&b.values), kind)
}

/// f_JSA = alpha * Phi.
pub fn jsa(alpha: &Factor, phi: &Factor) -> Result<JointAmplitude> {
    product(alpha, phi, AmplitudeKind::Jsa)
}

/// f_JCA = beta * Psi, rescaled to a unit-kernel conversion map.
pub fn jca(beta: &Factor, psi: &Factor) -> Result<JointAmplitude> {
    let mut f = product(beta, psi, AmplitudeKind::Jca)?;
    normalize_kernel(&mut f)?;
    Ok(f)
}


/// Largest singular value of sqrt(d1 d2) * values.
pub fn kernel_norm(f: &JointAmplitude) -> Result<f64> {
    Ok(f.grid.cell_area().sqrt() * f.values.singular_values()?.max())
}

/// Rescale so the largest kernel singular value is exactly 1; returns the
/// norm divided out.
pub fn normalize_kernel(f: &mut JointAmplitude) -> Result<f64> {
    let top = kernel_norm(f)?;
    if !(top > 0.0) {
        return Err(Error::ZeroAmplitude);
    }
    f.values.scale(1.0 / top);
    f.normalization = Normalization::UnitKernel;
    Ok(top)
}

/// f_JCA = beta * Psi divided by a kernel norm measured on another grid,
/// typically one covering the whole kernel.
pub fn jca_with_norm(beta: &Factor, psi: &Factor, top: f64) -> Result<JointAmplitude> {
    if !(top > 0.0 && top.is_finite()) {
        return Err(Error::ZeroAmplitude);
    }
    let mut f = product(beta, psi, AmplitudeKind::Jca)?;
    f.values.scale(1.0 / top);
    f.normalization = Normalization::UnitKernel;
    Ok(f)
}

/// f_eff(omega_s, omega_FC) = sum_i f_JSA(omega_s, omega_i) f_JCA(omega_i, omega_FC) d omega_i.
pub fn effective_jsa(f_jca: &JointAmplitude, f_jsa: &JointAmplitude) -> Result<JointAmplitude> {
    if !f_jsa.grid.axis2.same_as(&f_jca.grid.axis1) {
        return Err(Error::GridMismatch("JSA idler axis differs from JCA idler axis".into()));
    }
    let dw = f_jsa.grid.axis2.step();
    let values = match (&f_jsa.values, &f_jca.values) {
        (Values::Real(s), Values::Real(c)) => Values::Real((s * c) * dw),
        (s, c) => {
            let mut m = s.to_complex() * c.to_complex();
            m.iter_mut().for_each(|v| *v *= dw);
            Values::Complex(m)
        }
    };
    let grid = SpectralGrid::block(f_jsa.grid.axis1, f_jca.grid.axis2);
    JointAmplitude::new(grid, values, AmplitudeKind::Effective, Normalization::Contracted)
}

/// Closed wavelength interval (nm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo_nm: f64,
    pub hi_nm: f64,
}

impl Band {
    pub fn new(a: f64, b: f64) -> Self {
        Self { lo_nm: a.min(b), hi_nm: a.max(b) }
    }

    /// Band covering the frequency interval [lo, hi] (rad/fs).
    pub fn from_omegas(lo: f64, hi: f64) -> Self {
        Self::new(nm_from_omega(hi), nm_from_omega(lo))
    }

    pub fn omega_range(&self) -> (f64, f64) {
        (omega_from_nm(self.hi_nm), omega_from_nm(self.lo_nm))
    }

    pub fn full(axis: &SpectralAxis) -> Self {
        Self::from_omegas(axis.min(), axis.max())
    }
}

/// Rectangular pass band, one [`Band`] per grid axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TophatFilter {
    pub band1: Band,
    pub band2: Band,
}

impl TophatFilter {
    pub fn full_window(grid: &SpectralGrid) -> Self {
        Self { band1: Band::full(&grid.axis1), band2: Band::full(&grid.axis2) }
    }

    /// Inclusive index ranges of the pass band on `grid`.
    pub fn index_ranges(&self, grid: &SpectralGrid) -> Result<((usize, usize), (usize, usize))> {
        let (l1, h1) = self.band1.omega_range();
        let (l2, h2) = self.band2.omega_range();
        let r = grid.axis1.index_range(l1, h1).ok_or_else(|| Error::EmptyBand(format!("{:?}", self.band1)))?;
        let c = grid.axis2.index_range(l2, h2).ok_or_else(|| Error::EmptyBand(format!("{:?}", self.band2)))?;
        Ok((r, c))
    }
}

/// Zero the amplitude outside the pass band.
pub fn apply_tophat_filter(f: &JointAmplitude, filter: &TophatFilter) -> Result<JointAmplitude> {
    let ((r0, r1), (c0, c1)) = filter.index_ranges(&f.grid)?;
    let keep = |i: usize, j: usize| i >= r0 && i <= r1 && j >= c0 && j <= c1;
    let values = match &f.values {
        Values::Real(m) => Values::Real(DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| if keep(i, j) { m[(i, j)] } else { 0.0 })),
        Values::Complex(m) => Values::Complex(DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
            if keep(i, j) {
                m[(i, j)]
            } else {
                Complex64::new(0.0, 0.0)
            }
        })),
    };
    Ok(JointAmplitude { grid: f.grid, values, kind: f.kind, normalization: f.normalization })
}

/// Bandwidths of the four factors as Gaussian standard deviations (rad/fs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSet {
    pub sigma_p: f64,
    pub sigma_phi: f64,
    pub sigma_e: f64,
    pub sigma_psi: f64,
}

impl BandwidthSet {
    pub fn new(sigma_p: f64, sigma_phi: f64, sigma_e: f64, sigma_psi: f64) -> Result<Self> {
        let b = Self { sigma_p, sigma_phi, sigma_e, sigma_psi };
        if b.as_array().iter().all(|s| *s > 0.0 && s.is_finite()) {
            Ok(b)
        } else {
            Err(Error::InvalidParameter(format!("bandwidths must be positive: {b:?}")))
        }
    }

    pub fn from_array(a: [f64; 4]) -> Result<Self> {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.sigma_p, self.sigma_phi, self.sigma_e, self.sigma_psi]
    }

    pub fn scaled(&self, s: f64) -> Self {
        let a = self.as_array();
        Self { sigma_p: a[0] * s, sigma_phi: a[1] * s, sigma_e: a[2] * s, sigma_psi: a[3] * s }
    }

    /// Bandwidths divided by an output bandwidth.
    pub fn normalized(&self, sigma_out: f64) -> Self {
        self.scaled(1.0 / sigma_out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PmfKind {
    Sinc,
    Gaussian,
}

impl PmfKind {
    pub fn name(self) -> &'static str {
        match self {
            PmfKind::Sinc => "sinc",
            PmfKind::Gaussian => "gaussian",
        }
    }
}

impl std::str::FromStr for PmfKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sinc" => Ok(PmfKind::Sinc),
            "gaussian" | "gauss" => Ok(PmfKind::Gaussian),
            other => Err(Error::InvalidParameter(format!("unknown PMF kind '{other}'"))),
        }
    }
}
