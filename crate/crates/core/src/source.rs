//! Source designs: building the JSA, JCA and effective JSA of a
//! frequency-converted source, and the conventional degenerate source used
//! as a baseline.

use serde::{Deserialize, Serialize};

use crate::dispersion::{solve_poling_period, Crystal, CrystalDispersion, QpmGrating, ThreeWave, Wave};
use crate::exec::Execution;
use crate::gaussian::LinearModel;
use crate::metrics::{self, MetricsReport};
use crate::phasematch::{
    config, solve_gratings, ConfigId, FrequencyRelations, Gratings, GroupDelays, PhaseMatchConfig, SpdcAxes, Type2Axes,
};
use crate::spectra::{
    effective_jsa, escort_envelope, jca_with_norm, jsa, normalize_kernel, pmf_gaussian, pmf_sinc, pump_envelope, BandwidthSet, Factor,
    JointAmplitude, PhaseMatchLeg, PmfKind, SpectralAxis, SpectralGrid, DEFAULT_POINTS,
};
use crate::units::{length_for_pmf_width, omega_from_nm, pmf_width_for_length};
use crate::{Error, Result};

/// Discretization of a single evaluation.
///
/// Windows are given in marginal standard deviations of the linearized
/// model. Point counts start at `points` and grow, up to `max_points`, until
/// the narrowest feature on an axis spans `*_resolution` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridOptions {
    pub points: usize,
    pub max_points: usize,
    pub gaussian_window: f64,
    /// Wider than the Gaussian window because sinc sidebands decay slowly.
    pub sinc_window: f64,
    pub gaussian_resolution: f64,
    pub sinc_resolution: f64,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            points: DEFAULT_POINTS,
            max_points: 1024,
            gaussian_window: 5.0,
            sinc_window: 20.0,
            gaussian_resolution: 2.0,
            sinc_resolution: 4.0,
            exec: Execution::Sequential,
        }
    }
}

impl GridOptions {
    pub fn with_points(mut self, points: usize) -> Self {
        self.points = points;
        self.max_points = self.max_points.max(points);
        self
    }

    pub fn window(&self, pmf: PmfKind) -> f64 {
        match pmf {
            PmfKind::Gaussian => self.gaussian_window,
            PmfKind::Sinc => self.sinc_window,
        }
    }

    pub fn resolution(&self, pmf: PmfKind) -> f64 {
        match pmf {
            PmfKind::Gaussian => self.gaussian_resolution,
            PmfKind::Sinc => self.sinc_resolution,
        }
    }

    /// Points for an axis of the given half-width whose narrowest feature
    /// has amplitude width `feature`.
    fn points_for(&self, half_width: f64, feature: f64, pmf: PmfKind) -> usize {
        let cells = 2.0 * half_width * self.resolution(pmf) / feature;
        let need = if cells.is_finite() { cells.ceil() as usize + 1 } else { self.max_points };
        need.clamp(self.points, self.max_points.max(self.points))
    }
}

/// The grids of one design: JSA and JCA each on a window that covers them,
/// and the pair used for the contraction, sized on the output state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignGrids {
    pub jsa: SpectralGrid,
    pub jca: SpectralGrid,
    pub contraction_jsa: SpectralGrid,
    pub contraction_jca: SpectralGrid,
}

/// A region lengths pair in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionLengths {
    pub spdc_mm: f64,
    pub sfc_mm: f64,
}

/// The three amplitudes of one design.
#[derive(Debug, Clone)]
pub struct Amplitudes {
    pub jsa: JointAmplitude,
    pub jca: JointAmplitude,
    pub effective: JointAmplitude,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: MetricsReport,
    /// 1/e^2 half-width of the delivered output marginal along omega_s (rad/fs).
    pub sigma_out: f64,
    pub lengths: RegionLengths,
}

impl Evaluation {
    pub fn eta(&self) -> f64 {
        self.report.eta()
    }
}

/// Frequency-converted source at one degeneracy wavelength in one configuration.
#[derive(Debug, Clone)]
pub struct SourceModel {
    disp: CrystalDispersion,
    pub config: PhaseMatchConfig,
    pub relations: FrequencyRelations,
    pub gratings: Gratings,
    pub delays: GroupDelays,
    pub linear: LinearModel,
}

/// Reject degeneracy wavelengths whose pump (3/4 lambda_deg) is absorbed.
pub fn check_fc_limit(disp: &CrystalDispersion, lambda_deg_nm: f64) -> Result<()> {
    let limit = disp.fc_lower_limit_nm();
    if lambda_deg_nm < limit * (1.0 - 1e-9) {
        return Err(Error::BelowCutoff { crystal: disp.crystal().to_string(), lambda_deg_nm, limit_nm: limit });
    }
    Ok(())
}

impl SourceModel {
    pub fn new(disp: &CrystalDispersion, id: ConfigId, lambda_deg_nm: f64) -> Result<Self> {
        check_fc_limit(disp, lambda_deg_nm)?;
        let config = config(disp.crystal(), id)?;
        let relations = FrequencyRelations::new(lambda_deg_nm)?;
        let gratings = solve_gratings(disp, &config, &relations)?;
        let delays = GroupDelays::evaluate(disp, &config, &relations)?;
        let linear = LinearModel { spdc_gradient: delays.spdc_gradient(), sfc_gradient: delays.sfc_gradient() };
        Ok(Self { disp: disp.clone(), config, relations, gratings, delays, linear })
    }

    pub fn dispersion(&self) -> &CrystalDispersion {
        &self.disp
    }

    pub fn crystal(&self) -> Crystal {
        self.disp.crystal()
    }

    pub fn spdc_leg(&self) -> PhaseMatchLeg<'_> {
        PhaseMatchLeg::spdc(&self.disp, &self.config, self.gratings.spdc)
    }

    pub fn sfc_leg(&self) -> PhaseMatchLeg<'_> {
        PhaseMatchLeg::sfc(&self.disp, &self.config, self.gratings.sfc)
    }

    /// Region lengths whose sinc PMFs match the phase-matching bandwidths.
    pub fn lengths(&self, bw: &BandwidthSet) -> RegionLengths {
        RegionLengths {
            spdc_mm: length_for_pmf_width(bw.sigma_phi, self.linear.spdc_gradient_norm()) * 1e-3,
            sfc_mm: length_for_pmf_width(bw.sigma_psi, self.linear.sfc_gradient_norm()) * 1e-3,
        }
    }

    /// Grids sized from the linearized model. The contraction only needs
    /// f_JSA and f_JCA where the output lives; there the pump and escort
    /// envelopes confine the idler.
    pub fn grids(&self, bw: &BandwidthSet, pmf: PmfKind, opts: &GridOptions) -> Result<DesignGrids> {
        let lin = &self.linear;
        let not_local = || Error::InvalidParameter("amplitudes are not localized for these bandwidths".into());
        let w = opts.window(pmf);
        let ([a, b], [c, d]) = lin.ridge_normals();
        let across = |sigma: f64, n: f64| if n.abs() > 1e-12 { sigma / n.abs() } else { f64::INFINITY };
        let r = &self.relations;
        let build = |h1: f64, h2: f64, f1: f64, f2: f64, c1: f64, c2: f64| -> Result<SpectralGrid> {
            let (h1, h2) = self.clip_to_dispersion(h1, h2)?;
            SpectralGrid::new(
                SpectralAxis::new(c1, h1, opts.points_for(h1, f1, pmf))?,
                SpectralAxis::new(c2, h2, opts.points_for(h2, f2, pmf))?,
            )
        };

        let j = lin.jsa_marginals(bw).ok_or_else(not_local)?;
        let jsa_s = bw.sigma_p.min(across(bw.sigma_phi, a));
        let jsa_i = bw.sigma_p.min(across(bw.sigma_phi, b));
        let jsa_grid = build(w * j.axis1, w * j.axis2, jsa_s, jsa_i, r.omega_s(), r.omega_i())?;

        let k = lin.jca_marginals(bw).ok_or_else(not_local)?;
        let jca_i = bw.sigma_e.min(across(bw.sigma_psi, c));
        let jca_f = bw.sigma_e.min(across(bw.sigma_psi, d));
        let t = build(w * k.axis2, w * k.axis1, jca_f, jca_i, r.omega_fc(), r.omega_i())?;
        let jca_grid = SpectralGrid::new(t.axis2, t.axis1)?;

        let e = lin.output_marginals(bw).ok_or_else(not_local)?;
        let out = lin.output_feature_width(bw).ok_or_else(not_local)?;
        let hs = w * e.axis1.max(e.axis2);
        let hi = hs + opts.gaussian_window * bw.sigma_p.min(bw.sigma_e);
        let c = build(hs, hi, out, jsa_i.min(jca_i), r.omega_s(), r.omega_i())?;
        Ok(DesignGrids {
            jsa: jsa_grid,
            jca: jca_grid,
            contraction_jsa: c,
            contraction_jca: SpectralGrid::new(c.axis2, c.axis1)?,
        })
    }

    /// Shrink the half-widths so every wave on both grids stays inside the
    /// validity window of its dispersion model.
    fn clip_to_dispersion(&self, hs: f64, hi: f64) -> Result<(f64, f64)> {
        let r = &self.relations;
        let room = |axis, center: f64| {
            let (lo_nm, hi_nm) = self.disp.valid_range_nm(axis);
            (0.999 * (center - omega_from_nm(hi_nm)).min(omega_from_nm(lo_nm) - center)).max(0.0)
        };
        let (sp, sf) = (self.config.spdc, self.config.sfc);
        let hs = hs.min(room(sp.signal, r.omega_s())).min(room(sf.converted, r.omega_fc()));
        let hi = hi.min(room(sp.idler, r.omega_i())).min(room(sf.idler, r.omega_i()));
        let sum = room(sp.pump, r.omega_p()).min(room(sf.escort, r.omega_e()));
        let k = if hs + hi > sum { sum / (hs + hi) } else { 1.0 };
        if !(hs * k > 0.0 && hi * k > 0.0) {
            return Err(Error::InvalidParameter("no room for a spectral window inside the dispersion range".into()));
        }
        Ok((hs * k, hi * k))
    }

    fn jsa_on(&self, g: SpectralGrid, bw: &BandwidthSet, pmf: PmfKind, exec: Execution) -> Result<JointAmplitude> {
        let alpha = pump_envelope(g, bw.sigma_p, self.relations.omega_p(), exec)?;
        let phi = match pmf {
            PmfKind::Gaussian => pmf_gaussian(g, &self.spdc_leg(), bw.sigma_phi, exec)?,
            PmfKind::Sinc => pmf_sinc(g, &self.spdc_leg(), self.lengths(bw).spdc_mm, exec)?,
        };
        jsa(&alpha, &phi)
    }

    fn jca_factors(&self, g: SpectralGrid, bw: &BandwidthSet, pmf: PmfKind, exec: Execution) -> Result<(Factor, Factor)> {
        let beta = escort_envelope(g, bw.sigma_e, self.relations.omega_e(), exec)?;
        let psi = match pmf {
            PmfKind::Gaussian => pmf_gaussian(g, &self.sfc_leg(), bw.sigma_psi, exec)?,
            PmfKind::Sinc => pmf_sinc(g, &self.sfc_leg(), self.lengths(bw).sfc_mm, exec)?,
        };
        Ok((beta, psi))
    }

    /// JSA and unit-kernel JCA on their own grids, and the effective JSA.
    pub fn amplitudes(&self, bw: &BandwidthSet, pmf: PmfKind, opts: &GridOptions) -> Result<Amplitudes> {
        let g = self.grids(bw, pmf, opts)?;
        let exec = opts.exec;
        let f_jsa = self.jsa_on(g.jsa, bw, pmf, exec)?;
        let (beta, psi) = self.jca_factors(g.jca, bw, pmf, exec)?;
        let mut f_jca = jca_with_norm(&beta, &psi, 1.0)?;
        let top = normalize_kernel(&mut f_jca)?;
        let (beta, psi) = self.jca_factors(g.contraction_jca, bw, pmf, exec)?;
        let local_jca = jca_with_norm(&beta, &psi, top)?;
        let local_jsa = self.jsa_on(g.contraction_jsa, bw, pmf, exec)?;
        let effective = effective_jsa(&local_jca, &local_jsa)?;
        Ok(Amplitudes { jsa: f_jsa, jca: f_jca, effective })
    }

    /// Effective JSA only, with the JCA left unnormalized. Purity,
    /// indistinguishability and heralding do not depend on that scale.
    pub fn effective_unscaled(&self, bw: &BandwidthSet, pmf: PmfKind, opts: &GridOptions) -> Result<JointAmplitude> {
        let g = self.grids(bw, pmf, opts)?;
        let (beta, psi) = self.jca_factors(g.contraction_jca, bw, pmf, opts.exec)?;
        let local_jca = jca_with_norm(&beta, &psi, 1.0)?;
        let local_jsa = self.jsa_on(g.contraction_jsa, bw, pmf, opts.exec)?;
        effective_jsa(&local_jca, &local_jsa)
    }

    /// Like [`SourceModel::evaluate`] without the conversion efficiency.
    pub fn evaluate_output(&self, bw: &BandwidthSet, pmf: PmfKind, opts: &GridOptions) -> Result<Evaluation> {
        let f = self.effective_unscaled(bw, pmf, opts)?;
        evaluate_effective(&f, None, pmf, self.lengths(bw))
    }

    pub fn evaluate(&self, bw: &BandwidthSet, pmf: PmfKind, opts: &GridOptions) -> Result<Evaluation> {
        let amps = self.amplitudes(bw, pmf, opts)?;
        evaluate_amplitudes(&amps, pmf, self.lengths(bw))
    }
}

/// Metrics of a built design. Sinc designs are filtered just enough to
/// remove the sidebands of the effective JSA.
pub fn evaluate_amplitudes(amps: &Amplitudes, pmf: PmfKind, lengths: RegionLengths) -> Result<Evaluation> {
    evaluate_effective(&amps.effective, Some(&amps.jsa), pmf, lengths)
}

fn evaluate_effective(f: &JointAmplitude, jsa: Option<&JointAmplitude>, pmf: PmfKind, lengths: RegionLengths) -> Result<Evaluation> {
    let filter = match pmf {
        PmfKind::Sinc => Some(metrics::sideband_filter(f)),
        PmfKind::Gaussian => None,
    };
    let report = MetricsReport::evaluate(f, filter, jsa)?;
    let delivered = crate::spectra::apply_tophat_filter(f, &report.filter)?;
    Ok(Evaluation { sigma_out: output_bandwidth(&delivered), report, lengths })
}

/// 1/e^2 half-width of the intensity marginal along axis 1 (rad/fs).
pub fn output_bandwidth(f: &JointAmplitude) -> f64 {
    let intensity = f.values.intensity();
    let axis = f.grid.axis1;
    let marginal: Vec<f64> = intensity.row_iter().map(|r| r.sum()).collect();
    let total: f64 = marginal.iter().sum();
    let mean: f64 = marginal.iter().enumerate().map(|(k, w)| w * axis.value(k)).sum::<f64>() / total;
    let var: f64 = marginal.iter().enumerate().map(|(k, w)| w * (axis.value(k) - mean).powi(2)).sum::<f64>() / total;
    2.0 * var.sqrt()
}

/// Conventional degenerate type-2 SPDC, pump at lambda_deg / 2.
#[derive(Debug, Clone)]
pub struct DegenerateSource {
    disp: CrystalDispersion,
    pub axes: Type2Axes,
    pub lambda_deg_nm: f64,
    pub grating: QpmGrating,
    pub gradient: [f64; 2],
}

impl DegenerateSource {
    pub fn new(disp: &CrystalDispersion, axes: Type2Axes, lambda_deg_nm: f64) -> Result<Self> {
        let limit = disp.degenerate_lower_limit_nm();
        if lambda_deg_nm < limit * (1.0 - 1e-9) {
            return Err(Error::BelowCutoff { crystal: disp.crystal().to_string(), lambda_deg_nm, limit_nm: limit });
        }
        let process = ThreeWave {
            high: Wave { axis: axes.pump, lambda_nm: lambda_deg_nm / 2.0 },
            low_a: Wave { axis: axes.signal, lambda_nm: lambda_deg_nm },
            low_b: Wave { axis: axes.idler, lambda_nm: lambda_deg_nm },
        };
        let grating = solve_poling_period(disp, &process)?;
        let kp = disp.inverse_group_velocity(axes.pump, lambda_deg_nm / 2.0)?;
        let gradient = [
            kp - disp.inverse_group_velocity(axes.signal, lambda_deg_nm)?,
            kp - disp.inverse_group_velocity(axes.idler, lambda_deg_nm)?,
        ];
        Ok(Self { disp: disp.clone(), axes, lambda_deg_nm, grating, gradient })
    }

    fn spdc_axes(&self) -> SpdcAxes {
        SpdcAxes { pump: self.axes.pump, idler: self.axes.idler, signal: self.axes.signal }
    }

    pub fn gradient_norm(&self) -> f64 {
        self.gradient[0].hypot(self.gradient[1])
    }

    fn linear(&self) -> LinearModel {
        // no conversion stage; only the JSA part of the model is used
        LinearModel { spdc_gradient: self.gradient, sfc_gradient: [0.0, 1.0] }
    }

    /// Square grid centred on the degeneracy frequency with the given
    /// half-width.
    pub fn grid_with_half_width(&self, half_width: f64, points: usize) -> Result<SpectralGrid> {
        let a = SpectralAxis::new(omega_from_nm(self.lambda_deg_nm), half_width, points)?;
        SpectralGrid::new(a, a)
    }

    /// Square grid sized from the marginals of the matched Gaussian JSA.
    pub fn grid(&self, sigma_p: f64, sigma_phi: f64, pmf: PmfKind, opts: &GridOptions) -> Result<SpectralGrid> {
        let bw = BandwidthSet::new(sigma_p, sigma_phi, 1.0, 1.0)?;
        let m = self
            .linear()
            .jsa_marginals(&bw)
            .ok_or_else(|| Error::InvalidParameter("degenerate JSA is not localized".into()))?;
        self.grid_with_half_width(opts.window(pmf) * m.axis1.max(m.axis2), opts.points)
    }

    pub fn jsa(&self, grid: SpectralGrid, sigma_p: f64, length_mm: f64, pmf: PmfKind, exec: Execution) -> Result<JointAmplitude> {
        let leg = PhaseMatchLeg { disp: &self.disp, axes: crate::spectra::LegAxes::Spdc(self.spdc_axes()), grating: self.grating };
        let omega_p = omega_from_nm(self.lambda_deg_nm / 2.0);
        let alpha = pump_envelope(grid, sigma_p, omega_p, exec)?;
        let phi: Factor = match pmf {
            PmfKind::Sinc => pmf_sinc(grid, &leg, length_mm, exec)?,
            PmfKind::Gaussian => {
                pmf_gaussian(grid, &leg, pmf_width_for_length(length_mm * 1e3, self.gradient_norm()), exec)?
            }
        };
        jsa(&alpha, &phi)
    }

    pub fn sigma_phi(&self, length_mm: f64) -> f64 {
        pmf_width_for_length(length_mm * 1e3, self.gradient_norm())
    }
}

/// Conventional degenerate source with the purity-optimal pump bandwidth,
/// filtered to a target purity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConventionalResult {
    pub lambda_deg_nm: f64,
    pub length_mm: f64,
    pub sigma_p: f64,
    pub purity_unfiltered: f64,
    pub purity_filtered: f64,
    pub p_both: f64,
    pub heralding_efficiency: f64,
    pub indistinguishability: f64,
    /// Half-width of the identical top-hat bands (rad/fs); `None` when no
    /// filtering was needed.
    pub filter_half_width: Option<f64>,
    /// The same source filtered only enough to remove the sidebands.
    pub sideband: SidebandFiltered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandFiltered {
    pub purity: f64,
    pub indistinguishability: f64,
    pub heralding_efficiency: f64,
    pub p_both: f64,
}

/// Region length of the conventional baseline; the linearized state only
/// depends on the pump-to-PMF bandwidth ratio, so this fixes the scale.
pub const CONVENTIONAL_LENGTH_MM: f64 = 10.0;

/// Purity-optimal pump bandwidth ratio sigma_p / sigma_phi, by golden-section
/// search in log space.
pub fn optimal_pump_ratio(src: &DegenerateSource, length_mm: f64, pmf: PmfKind, points: usize) -> Result<f64> {
    let sigma_phi = src.sigma_phi(length_mm);
    let opts = GridOptions::default().with_points(points);
    let purity_at = |log_r: f64| -> Result<f64> {
        let sp = sigma_phi * log_r.exp();
        let grid = src.grid(sp, sigma_phi, pmf, &opts)?;
        metrics::purity(&src.jsa(grid, sp, length_mm, pmf, Execution::Sequential)?)
    };
    let (mut a, mut b) = ((0.05f64).ln(), (20.0f64).ln());
    let g = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = purity_at(x1)?;
    let mut f2 = purity_at(x2)?;
    while b - a > 1e-3 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = purity_at(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = purity_at(x1)?;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

/// Purity, pair-pass probability and heralding of the conventional source
/// filtered with the widest identical bands that reach `target` purity.
///
/// The band search starts on the full-window grid; the band edge is then
/// refined on grids restricted to the band so that narrow bands on
/// elongated states stay resolved.
pub fn conventional_baseline(
    disp: &CrystalDispersion,
    axes: Type2Axes,
    lambda_deg_nm: f64,
    target: f64,
    opts: &GridOptions,
) -> Result<ConventionalResult> {
    let pmf = PmfKind::Sinc;
    let src = DegenerateSource::new(disp, axes, lambda_deg_nm)?;
    let length_mm = CONVENTIONAL_LENGTH_MM;
    let sigma_phi = src.sigma_phi(length_mm);
    let ratio = optimal_pump_ratio(&src, length_mm, pmf, 128)?;
    let sigma_p = ratio * sigma_phi;
    let grid = src.grid(sigma_p, sigma_phi, pmf, opts)?;
    let full = src.jsa(grid, sigma_p, length_mm, pmf, opts.exec)?;
    let full_norm = full.weighted_norm_squared();
    let purity_unfiltered = metrics::purity(&full)?;
    let sb = MetricsReport::evaluate(&full, Some(metrics::sideband_filter(&full)), None)?;
    let base = ConventionalResult {
        lambda_deg_nm,
        length_mm,
        sigma_p,
        purity_unfiltered,
        purity_filtered: purity_unfiltered,
        p_both: 1.0,
        heralding_efficiency: 1.0,
        indistinguishability: metrics::indistinguishability(&full)?,
        filter_half_width: None,
        sideband: SidebandFiltered {
            purity: sb.purity,
            indistinguishability: sb.indistinguishability,
            heralding_efficiency: sb.heralding_efficiency,
            p_both: sb.p_both,
        },
    };
    if purity_unfiltered >= target {
        return Ok(base);
    }
    let coarse = metrics::minimal_filter_for_purity(&full, target);
    let step = grid.axis1.step();
    let (mut lo, mut hi) = match &coarse {
        Ok(c) => {
            let h = c.half_width.unwrap_or(grid.axis1.half_width);
            ((h - 2.0 * step).max(0.25 * step), h + 2.0 * step)
        }
        Err(_) => (0.05 * step, 2.0 * step),
    };
    let band_points = 128;
    let on_band = |h: f64| -> Result<JointAmplitude> {
        let g = src.grid_with_half_width(h, band_points)?;
        src.jsa(g, sigma_p, length_mm, pmf, opts.exec)
    };
    // widen the bracket until it straddles the target
    for _ in 0..20 {
        if metrics::purity(&on_band(lo)?)? >= target {
            break;
        }
        lo *= 0.5;
    }
    let p_lo = metrics::purity(&on_band(lo)?)?;
    if p_lo < target {
        return Err(Error::Unachievable { target, best: p_lo });
    }
    for _ in 0..20 {
        if metrics::purity(&on_band(hi)?)? < target || hi >= grid.axis1.half_width {
            break;
        }
        hi *= 1.5;
    }
    let hi = hi.min(grid.axis1.half_width);
    let (mut a, mut b) = (lo, hi);
    while b - a > 1e-3 * a {
        let m = 0.5 * (a + b);
        if metrics::purity(&on_band(m)?)? >= target {
            a = m;
        } else {
            b = m;
        }
    }
    let band = on_band(a)?;
    let p_both = (band.weighted_norm_squared() / full_norm).min(1.0);
    // heralding: fraction of the herald marginal inside its band
    let herald_grid = SpectralGrid::new(
        SpectralAxis::new(grid.axis1.center, a, band_points)?,
        SpectralAxis::new(grid.axis2.center, grid.axis2.half_width, opts.points)?,
    )?;
    let herald = src.jsa(herald_grid, sigma_p, length_mm, pmf, opts.exec)?;
    let herald_p = (herald.weighted_norm_squared() / full_norm).min(1.0);
    Ok(ConventionalResult {
        purity_filtered: metrics::purity(&band)?,
        p_both,
        heralding_efficiency: if herald_p > 0.0 { (p_both / herald_p).min(1.0) } else { 0.0 },
        indistinguishability: metrics::indistinguishability(&band)?,
        filter_half_width: Some(a),
        ..base
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasematch::spdc_mismatch;
    use crate::spectra::kernel_norm;
    use approx::assert_relative_eq;

    fn ktp() -> &'static CrystalDispersion {
        CrystalDispersion::builtin(Crystal::Ktp)
    }

    #[test]
    fn leg_mismatch_agrees_with_phasematch() {
        let m = SourceModel::new(ktp(), ConfigId::II, 780.0).unwrap();
        let r = m.relations;
        let (ws, wi) = (r.omega_s() * 1.003, r.omega_i() * 0.998);
        let a = m.spdc_leg().mismatch(ws, wi).unwrap();
        let b = spdc_mismatch(ktp(), &m.config, ws + wi, ws, wi, &m.gratings.spdc).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn below_cutoff_is_rejected() {
        assert!(matches!(SourceModel::new(ktp(), ConfigId::II, 460.0), Err(Error::BelowCutoff { .. })));
        let ln = CrystalDispersion::builtin(Crystal::Ln);
        assert!(matches!(SourceModel::new(ln, ConfigId::I, 530.0), Err(Error::BelowCutoff { .. })));
        assert!(SourceModel::new(ln, ConfigId::I, 540.0).is_ok());
        assert!(matches!(
            DegenerateSource::new(ktp(), Type2Axes::default_for(Crystal::Ktp), 690.0),
            Err(Error::BelowCutoff { .. })
        ));
    }

    #[test]
    fn gaussian_numeric_matches_linear_model() {
        let m = SourceModel::new(ktp(), ConfigId::II, 780.0).unwrap();
        let bw = BandwidthSet::new(0.004, 0.003, 0.004, 0.003).unwrap();
        let ev = m.evaluate(&bw, PmfKind::Gaussian, &GridOptions::default().with_points(128)).unwrap();
        assert!((ev.report.purity - m.linear.purity(&bw)).abs() < 5e-3);
        assert!((ev.report.indistinguishability - m.linear.indistinguishability(&bw)).abs() < 5e-3);
        assert_relative_eq!(ev.sigma_out, m.linear.output_bandwidth(&bw).unwrap(), max_relative = 0.02);
        assert_eq!(ev.report.heralding_efficiency, 1.0);
        let eta_c = ev.report.conversion_efficiency.unwrap();
        assert!(eta_c > 0.0 && eta_c <= 1.0 + 1e-12);
    }

    #[test]
    fn jca_is_unit_kernel_for_built_designs() {
        let m = SourceModel::new(ktp(), ConfigId::V, 900.0).unwrap();
        let bw = BandwidthSet::new(0.003, 0.004, 0.002, 0.003).unwrap();
        for pmf in [PmfKind::Gaussian, PmfKind::Sinc] {
            let a = m.amplitudes(&bw, pmf, &GridOptions::default().with_points(128)).unwrap();
            assert_relative_eq!(kernel_norm(&a.jca).unwrap(), 1.0, max_relative = 1e-9);
            let e = metrics::conversion_efficiency(&a.effective, &a.jsa).unwrap();
            assert!((0.0..=1.0 + 1e-9).contains(&e), "{pmf:?} {e}");
        }
    }

    #[test]
    fn lengths_follow_bandwidths() {
        let m = SourceModel::new(ktp(), ConfigId::II, 780.0).unwrap();
        let a = BandwidthSet::new(0.004, 0.003, 0.004, 0.003).unwrap();
        let l1 = m.lengths(&a);
        let l2 = m.lengths(&a.scaled(2.0));
        assert_relative_eq!(l1.spdc_mm, 2.0 * l2.spdc_mm, max_relative = 1e-12);
        assert_relative_eq!(l1.sfc_mm, 2.0 * l2.sfc_mm, max_relative = 1e-12);
    }
}
