//! Constrained maximization of eta = P x I over the four bandwidths,
//! configuration selection and wavelength sweeps.
//!
//! The search runs on normalized shapes: a shape u is mapped to
//! x = u / sigma_out(u) using the closed-form output bandwidth, so x is
//! normalized to unit output bandwidth. A common scale S then gives the
//! absolute bandwidths S x; the pulse-duration and region-length limits
//! become an interval of admissible S per shape.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dispersion::{Crystal, CrystalDispersion};
use crate::exec::Execution;
use crate::gaussian::LinearModel;
use crate::phasematch::{list_configs, ConfigId};
use crate::source::{check_fc_limit, conventional_baseline, ConventionalResult, Evaluation, GridOptions, RegionLengths, SourceModel};
use crate::spectra::{BandwidthSet, PmfKind};
use crate::units::{pmf_width_for_length, pulse_duration_fs, sigma_from_duration};
use crate::phasematch::Type2Axes;
use crate::{Error, Result};

pub const DEFAULT_SEED: u64 = 0x5eed_f0c5;

/// Log-position of the starting scale within the admissible interval.
const MID_SCALE: f64 = 0.5;
const SCALE_STEP: f64 = 0.2;

// Refinement grid: the sidebands far out barely move P and I.
const SEARCH_POINTS: usize = 64;
const SEARCH_MAX_POINTS: usize = 512;
const SEARCH_SINC_WINDOW: f64 = 8.0;

/// Bounds on the design; durations in fs, lengths in mm, bandwidths in rad/fs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizationConstraints {
    /// sigma_p / sigma_e and sigma_phi / sigma_psi (and inverses) may not exceed this.
    pub max_ratio: f64,
    pub normalized_min: f64,
    pub normalized_max: f64,
    pub min_duration_fs: f64,
    pub max_duration_fs: f64,
    pub min_length_mm: f64,
    pub max_length_mm: f64,
    /// Required output bandwidth; `None` lets the search choose it within the
    /// feasible interval.
    pub target_output_bandwidth: Option<f64>,
}

impl Default for OptimizationConstraints {
    fn default() -> Self {
        Self {
            max_ratio: 2.0,
            normalized_min: 0.1,
            normalized_max: 6.0,
            min_duration_fs: 5.0,
            max_duration_fs: 1e6,
            min_length_mm: crate::dispersion::MIN_REGION_LENGTH_MM,
            max_length_mm: crate::dispersion::MAX_REGION_LENGTH_MM,
            target_output_bandwidth: None,
        }
    }
}

/// Roundoff allowance at the boundaries of the constraint box.
const BOUND_SLACK: f64 = 1e-9;

impl OptimizationConstraints {
    pub fn validate(&self) -> Result<()> {
        let ordered = |name: &str, lo: f64, hi: f64| {
            if lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi {
                Ok(())
            } else {
                Err(Error::InfeasibleConstraints(format!("{name} bounds [{lo}, {hi}]")))
            }
        };
        if !(self.max_ratio >= 1.0) {
            return Err(Error::InfeasibleConstraints(format!("max_ratio {} < 1", self.max_ratio)));
        }
        ordered("normalized bandwidth", self.normalized_min, self.normalized_max)?;
        ordered("pulse duration", self.min_duration_fs, self.max_duration_fs)?;
        ordered("region length", self.min_length_mm, self.max_length_mm)?;
        if let Some(t) = self.target_output_bandwidth {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InfeasibleConstraints(format!("target output bandwidth {t}")));
            }
        }
        Ok(())
    }

    pub fn ratios_ok(&self, bw: &BandwidthSet) -> bool {
        let r = self.max_ratio * (1.0 + BOUND_SLACK);
        bw.sigma_p <= r * bw.sigma_e
            && bw.sigma_e <= r * bw.sigma_p
            && bw.sigma_phi <= r * bw.sigma_psi
            && bw.sigma_psi <= r * bw.sigma_phi
    }

    fn in_box(&self, x: f64) -> bool {
        x >= self.normalized_min * (1.0 - BOUND_SLACK) && x <= self.normalized_max * (1.0 + BOUND_SLACK)
    }

    /// Absolute bounds on (sigma_p, sigma_phi, sigma_e, sigma_psi) implied by the
    /// pulse-duration and region-length limits.
    pub fn absolute_bounds(&self, model: &LinearModel) -> [(f64, f64); 4] {
        let pulse = (sigma_from_duration(self.max_duration_fs), sigma_from_duration(self.min_duration_fs));
        let pmf = |g: f64| {
            (pmf_width_for_length(self.max_length_mm * 1e3, g), pmf_width_for_length(self.min_length_mm * 1e3, g))
        };
        [pulse, pmf(model.spdc_gradient_norm()), pulse, pmf(model.sfc_gradient_norm())]
    }

    /// Every stated constraint on an absolute design. The normalization uses
    /// the closed-form output bandwidth.
    pub fn check(&self, model: &LinearModel, bw: &BandwidthSet) -> std::result::Result<(), String> {
        if !self.ratios_ok(bw) {
            return Err(format!("ratio bound violated by {:?}", bw.as_array()));
        }
        let sigma_out = model.output_bandwidth(bw).ok_or("output bandwidth undefined")?;
        for (k, v) in bw.as_array().iter().enumerate() {
            if !self.in_box(v / sigma_out) {
                return Err(format!("normalized bandwidth {k} = {} outside the box", v / sigma_out));
            }
        }
        for s in [bw.sigma_p, bw.sigma_e] {
            let d = pulse_duration_fs(s);
            if d < self.min_duration_fs * (1.0 - BOUND_SLACK) || d > self.max_duration_fs * (1.0 + BOUND_SLACK) {
                return Err(format!("pulse duration {d} fs outside the limits"));
            }
        }
        let lin_len = |s: f64, g: f64| crate::units::length_for_pmf_width(s, g) * 1e-3;
        for l in [lin_len(bw.sigma_phi, model.spdc_gradient_norm()), lin_len(bw.sigma_psi, model.sfc_gradient_norm())] {
            if l < self.min_length_mm * (1.0 - BOUND_SLACK) || l > self.max_length_mm * (1.0 + BOUND_SLACK) {
                return Err(format!("region length {l} mm outside the limits"));
            }
        }
        if let Some(t) = self.target_output_bandwidth {
            if ((sigma_out - t) / t).abs() > 1e-6 {
                return Err(format!("output bandwidth {sigma_out} differs from target {t}"));
            }
        }
        Ok(())
    }
}

/// A shape normalized to unit output bandwidth and its admissible scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedShape {
    pub x: [f64; 4],
    pub scale_min: f64,
    pub scale_max: f64,
}

impl NormalizedShape {
    pub fn at_scale(&self, s: f64) -> BandwidthSet {
        let x = self.x;
        BandwidthSet { sigma_p: s * x[0], sigma_phi: s * x[1], sigma_e: s * x[2], sigma_psi: s * x[3] }
    }

    /// Scale at log-position `frac` in the admissible interval.
    pub fn scale_at(&self, frac: f64) -> f64 {
        self.scale_min * (self.scale_max / self.scale_min).powf(frac.clamp(0.0, 1.0))
    }

    /// Scale used for evaluation: the target if given, else the scale at
    /// log-position `frac`.
    pub fn working_scale(&self, c: &OptimizationConstraints, frac: f64) -> f64 {
        c.target_output_bandwidth.unwrap_or_else(|| self.scale_at(frac))
    }
}

/// Normalize a shape and intersect it with the constraints; `None` if infeasible.
pub fn normalize_shape(model: &LinearModel, c: &OptimizationConstraints, u: &BandwidthSet) -> Option<NormalizedShape> {
    if !c.ratios_ok(u) {
        return None;
    }
    let so = model.output_bandwidth(u)?;
    let a = u.as_array();
    let x = [a[0] / so, a[1] / so, a[2] / so, a[3] / so];
    if !x.iter().all(|&v| c.in_box(v)) {
        return None;
    }
    let bounds = c.absolute_bounds(model);
    let mut lo = 0.0f64;
    let mut hi = f64::INFINITY;
    for (k, (b_lo, b_hi)) in bounds.iter().enumerate() {
        lo = lo.max(b_lo / x[k]);
        hi = hi.min(b_hi / x[k]);
    }
    if !(lo <= hi) {
        return None;
    }
    if let Some(t) = c.target_output_bandwidth {
        if t < lo * (1.0 - BOUND_SLACK) || t > hi * (1.0 + BOUND_SLACK) {
            return None;
        }
    }
    Some(NormalizedShape { x, scale_min: lo, scale_max: hi })
}

/// Output bandwidths reachable with the given design shape under all
/// constraints (rad/fs).
pub fn feasible_output_bandwidths(model: &LinearModel, c: &OptimizationConstraints, shape: &BandwidthSet) -> Result<(f64, f64)> {
    let relaxed = OptimizationConstraints { target_output_bandwidth: None, ..*c };
    normalize_shape(model, &relaxed, shape)
        .map(|n| (n.scale_min, n.scale_max))
        .ok_or_else(|| Error::EmptyInterval("no output bandwidth satisfies the constraints for this shape".into()))
}

fn shape_from_log(v: &[f64; 4]) -> BandwidthSet {
    BandwidthSet { sigma_p: v[0].exp(), sigma_phi: v[1].exp(), sigma_e: v[2].exp(), sigma_psi: v[3].exp() }
}

/// Result of a derivative-free minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum<const N: usize = 4> {
    pub x: [f64; N],
    pub value: f64,
    pub evaluations: usize,
}

/// Nelder-Mead simplex minimization.
pub fn nelder_mead<const N: usize>(
    f: &mut dyn FnMut(&[f64; N]) -> f64,
    start: [f64; N],
    steps: [f64; N],
    max_evals: usize,
    xtol: f64,
    ftol: f64,
) -> Minimum<N> {
    let mut evals = 0usize;
    let mut eval = |p: &[f64; N], evals: &mut usize| {
        *evals += 1;
        let v = f(p);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
    simplex.push((start, eval(&start, &mut evals)));
    for k in 0..N {
        let mut p = start;
        p[k] += steps[k];
        let v = eval(&p, &mut evals);
        simplex.push((p, v));
    }
    let comb = |a: &[f64; N], b: &[f64; N], t: f64| -> [f64; N] { std::array::from_fn(|k| a[k] + t * (b[k] - a[k])) };
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[N].1);
        let size = simplex[1..]
            .iter()
            .map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size < xtol && (worst - best).abs() <= ftol * (1.0 + best.abs()) {
            break;
        }
        let centroid: [f64; N] = std::array::from_fn(|k| simplex[..N].iter().map(|(p, _)| p[k]).sum::<f64>() / N as f64);
        let w = simplex[N].0;
        let r = comb(&centroid, &w, -1.0);
        let fr = eval(&r, &mut evals);
        if fr < simplex[0].1 {
            let e = comb(&centroid, &w, -2.0);
            let fe = eval(&e, &mut evals);
            simplex[N] = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < simplex[N - 1].1 {
            simplex[N] = (r, fr);
        } else {
            let (c, fc) = if fr < simplex[N].1 {
                let c = comb(&centroid, &r, 0.5);
                (c, eval(&c, &mut evals))
            } else {
                let c = comb(&centroid, &w, 0.5);
                (c, eval(&c, &mut evals))
            };
            if fc < simplex[N].1.min(fr) {
                simplex[N] = (c, fc);
            } else {
                let b = simplex[0].0;
                for item in simplex.iter_mut().skip(1) {
                    let p = comb(&b, &item.0, 0.5);
                    *item = (p, eval(&p, &mut evals));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    Minimum { x: simplex[0].0, value: simplex[0].1, evaluations: evals }
}

/// Grid-scan-then-refine maximization of `f` over log-space points; returns
/// the refined local maxima, best first, deduplicated.
///
/// `f` returns `None` for rejected points.
pub fn multistart_maximize(
    f: &mut dyn FnMut(&[f64; 4]) -> Option<f64>,
    lo: f64,
    hi: f64,
    per_axis: usize,
    starts: usize,
    max_evals: usize,
) -> Vec<Minimum> {
    let axis: Vec<f64> = (0..per_axis)
        .map(|k| lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (per_axis.max(2) - 1) as f64)
        .collect();
    let mut scored: Vec<([f64; 4], f64)> = Vec::new();
    for a in &axis {
        for b in &axis {
            for c in &axis {
                for d in &axis {
                    let p = [*a, *b, *c, *d];
                    if let Some(v) = f(&p) {
                        scored.push((p, v));
                    }
                }
            }
        }
    }
    // stable: ties keep grid order
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut out: Vec<Minimum> = Vec::new();
    for (p, _) in scored.into_iter().take(starts) {
        let mut neg = |q: &[f64; 4]| f(q).map_or(f64::INFINITY, |v| -v);
        let m = nelder_mead(&mut neg, p, [0.25; 4], max_evals, 1e-7, 1e-12);
        out.push(Minimum { value: -m.value, ..m });
    }
    out.sort_by(|a, b| b.value.total_cmp(&a.value));
    dedupe(out, 0.05)
}

fn dedupe(list: Vec<Minimum>, radius: f64) -> Vec<Minimum> {
    let mut kept: Vec<Minimum> = Vec::new();
    for m in list {
        let close = kept.iter().any(|k| k.x.iter().zip(&m.x).all(|(a, b)| (a - b).abs() < radius));
        if !close && m.value.is_finite() {
            kept.push(m);
        }
    }
    kept
}

/// Search settings; everything here is deterministic given `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchOptions {
    pub grid_per_axis: usize,
    pub starts: usize,
    /// Numerical refinement budget per start.
    pub polish_evals: usize,
    /// Configurations refined numerically in [`select_configuration`].
    pub polish_configs: usize,
    /// Minimum grid points per axis during the numerical refinement.
    pub search_points: Option<usize>,
    pub scale_iterations: usize,
    pub seed: u64,
    /// Discretization of the reported evaluation.
    pub grid: GridOptions,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            grid_per_axis: 7,
            starts: 5,
            polish_evals: 80,
            polish_configs: 3,
            search_points: None,
            scale_iterations: 5,
            seed: DEFAULT_SEED,
            grid: GridOptions::default(),
        }
    }
}

impl SearchOptions {
    fn search_grid(&self) -> GridOptions {
        let points = self.search_points.unwrap_or(SEARCH_POINTS).min(self.grid.points);
        GridOptions {
            points,
            max_points: SEARCH_MAX_POINTS.max(points).min(self.grid.max_points),
            sinc_window: self.grid.sinc_window.min(SEARCH_SINC_WINDOW),
            exec: Execution::Sequential,
            ..self.grid
        }
    }
}
// Optimized design of one configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Optimum {
    pub config: ConfigId,
    /// Absolute bandwidths (rad/fs).
    pub bandwidths: BandwidthSet,
    /// Bandwidths divided by the delivered output bandwidth.
    pub normalized: BandwidthSet,
    pub evaluation: Evaluation,
    /// Closed-form eta of the chosen shape.
    pub model_eta: f64,
    /// Output bandwidths reachable with this shape (rad/fs).
    pub output_interval: (f64, f64),
}

impl Optimum {
    pub fn eta(&self) -> f64 {
        self.evaluation.eta()
    }
}

/// Closed-form stage: local maxima of the linearized eta over shapes.
fn model_candidates(model: &LinearModel, c: &OptimizationConstraints, opts: &SearchOptions) -> Vec<Minimum> {
    let mut f = |p: &[f64; 4]| {
        let u = shape_from_log(p);
        normalize_shape(model, c, &u).map(|_| model.eta(&u))
    };
    multistart_maximize(&mut f, c.normalized_min, c.normalized_max, opts.grid_per_axis, opts.starts, 3000)
}

fn evaluate_shape(src: &SourceModel, c: &OptimizationConstraints, pmf: PmfKind, grid: &GridOptions, p: &[f64; 4], frac: f64) -> Option<Evaluation> {
    if !(0.0..=1.0).contains(&frac) {
        return None;
    }
    let shape = normalize_shape(&src.linear, c, &shape_from_log(p))?;
    let bw = shape.at_scale(shape.working_scale(c, frac));
    src.evaluate_output(&bw, pmf, grid).ok()
}

/// A refined shape with the log-position of its scale.
#[derive(Debug, Clone, Copy)]
struct Refined {
    x: [f64; 4],
    frac: f64,
    value: f64,
}

/// Numerical refinement of closed-form candidates, best first. Without a
/// target output bandwidth the scale is refined together with the shape.
fn polish(src: &SourceModel, c: &OptimizationConstraints, pmf: PmfKind, opts: &SearchOptions, starts: &[Minimum]) -> Vec<Refined> {
    let grid = opts.search_grid();
    let mut out: Vec<Refined> = starts
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let steps: [f64; 4] = std::array::from_fn(|_| 0.1 * rng.gen_range(0.8..1.2));
            if c.target_output_bandwidth.is_some() {
                let mut f = |p: &[f64; 4]| evaluate_shape(src, c, pmf, &grid, p, MID_SCALE).map_or(f64::INFINITY, |e| -e.eta());
                let r = nelder_mead(&mut f, m.x, steps, opts.polish_evals, 1e-4, 1e-9);
                Refined { x: r.x, frac: MID_SCALE, value: -r.value }
            } else {
                let mut f = |q: &[f64; 5]| {
                    let p = [q[0], q[1], q[2], q[3]];
                    evaluate_shape(src, c, pmf, &grid, &p, q[4]).map_or(f64::INFINITY, |e| -e.eta())
                };
                let start = [m.x[0], m.x[1], m.x[2], m.x[3], MID_SCALE];
                let steps5 = [steps[0], steps[1], steps[2], steps[3], SCALE_STEP];
                let r = nelder_mead(&mut f, start, steps5, opts.polish_evals * 3 / 2, 1e-4, 1e-9);
                Refined { x: [r.x[0], r.x[1], r.x[2], r.x[3]], frac: r.x[4], value: -r.value }
            }
        })
        .filter(|m| m.value.is_finite())
        .collect();
    out.sort_by(|a, b| b.value.total_cmp(&a.value));
    out
}

/// Final evaluation of a shape: the scale is iterated so the delivered output
/// bandwidth reaches the working target, then evaluated on the full grid.
fn finalize(src: &SourceModel, c: &OptimizationConstraints, pmf: PmfKind, opts: &SearchOptions, p: &[f64; 4], frac: f64) -> Result<Optimum> {
    let shape = normalize_shape(&src.linear, c, &shape_from_log(p))
        .ok_or_else(|| Error::InfeasibleConstraints("refined shape left the feasible set".into()))?;
    let target = shape.working_scale(c, frac);
    let small = opts.search_grid();
    let mut s = target;
    for _ in 0..opts.scale_iterations {
        let e = src.evaluate_output(&shape.at_scale(s), pmf, &small)?;
        let r = target / e.sigma_out;
        if (r - 1.0).abs() < 1e-3 {
            break;
        }
        s = (s * r).clamp(shape.scale_min, shape.scale_max);
    }
    let bw = shape.at_scale(s);
    let evaluation = src.evaluate(&bw, pmf, &GridOptions { exec: Execution::Sequential, ..opts.grid })?;
    let so = evaluation.sigma_out;
    let u = shape_from_log(p);
    Ok(Optimum {
        config: src.config.id,
        normalized: BandwidthSet { sigma_p: bw.sigma_p / so, sigma_phi: bw.sigma_phi / so, sigma_e: bw.sigma_e / so, sigma_psi: bw.sigma_psi / so },
        bandwidths: bw,
        evaluation,
        model_eta: src.linear.eta(&u),
        output_interval: (shape.scale_min, shape.scale_max),
    })
}

fn optimize_from(src: &SourceModel, pmf: PmfKind, c: &OptimizationConstraints, opts: &SearchOptions, candidates: &[Minimum]) -> Result<Optimum> {
    if candidates.is_empty() {
        return Err(Error::InfeasibleConstraints(format!(
            "no feasible bandwidths for config {} at {} nm",
            src.config.id.roman(),
            src.relations.lambda_deg_nm
        )));
    }
    let polished = polish(src, c, pmf, opts, candidates);
    let mut last_err = None;
    let fallback = candidates.iter().map(|m| Refined { x: m.x, frac: MID_SCALE, value: m.value });
    for m in polished.into_iter().chain(fallback) {
        match finalize(src, c, pmf, opts, &m.x, m.frac) {
            Ok(o) => return Ok(o),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::InfeasibleConstraints("no candidate could be evaluated".into())))
}

/// Best bandwidths for one configuration.
pub fn optimize_bandwidths(src: &SourceModel, pmf: PmfKind, c: &OptimizationConstraints, opts: &SearchOptions) -> Result<Optimum> {
    c.validate()?;
    let candidates = model_candidates(&src.linear, c, opts);
    optimize_from(src, pmf, c, opts, &candidates)
}

/// What happened to one configuration during selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub config: ConfigId,
    /// Closed-form eta of the best shape.
    pub model_eta: Option<f64>,
    /// Eta of the full evaluation, when the configuration was refined.
    pub eta: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub lambda_deg_nm: f64,
    pub crystal: Crystal,
    pub pmf: PmfKind,
    pub best: Optimum,
    pub spdc_period_um: f64,
    pub sfc_period_um: f64,
    pub lengths: RegionLengths,
    pub records: Vec<ConfigRecord>,
}

impl SweepResult {
    pub fn eta(&self) -> f64 {
        self.best.eta()
    }
}

/// Optimize every admissible configuration and keep the best by eta; ties go
/// to the lower configuration number.
pub fn select_configuration(disp: &CrystalDispersion, lambda_deg_nm: f64, pmf: PmfKind, c: &OptimizationConstraints, opts: &SearchOptions) -> Result<SweepResult> {
    c.validate()?;
    check_fc_limit(disp, lambda_deg_nm)?;
    let mut records = Vec::new();
    let mut ranked: Vec<(SourceModel, Vec<Minimum>)> = Vec::new();
    for cfg in list_configs(disp.crystal()) {
        match SourceModel::new(disp, cfg.id, lambda_deg_nm) {
            Ok(src) => {
                let cands = model_candidates(&src.linear, c, opts);
                records.push(ConfigRecord {
                    config: cfg.id,
                    model_eta: cands.first().map(|m| m.value),
                    eta: None,
                    error: cands.is_empty().then(|| "no feasible bandwidths".to_string()),
                });
                if !cands.is_empty() {
                    ranked.push((src, cands));
                }
            }
            Err(e) => records.push(ConfigRecord { config: cfg.id, model_eta: None, eta: None, error: Some(e.to_string()) }),
        }
    }
    // screen by the closed form; stable sort keeps lower ids first on ties
    ranked.sort_by(|a, b| b.1[0].value.total_cmp(&a.1[0].value));
    let mut best: Option<(Optimum, SourceModel)> = None;
    for (src, cands) in ranked.into_iter().take(opts.polish_configs.max(1)) {
        let rec = records.iter_mut().find(|r| r.config == src.config.id).expect("record exists");
        match optimize_from(&src, pmf, c, opts, &cands) {
            Ok(o) => {
                rec.eta = Some(o.eta());
                let better = match &best {
                    None => true,
                    Some((b, _)) => o.eta() > b.eta() || (o.eta() == b.eta() && o.config.number() < b.config.number()),
                };
                if better {
                    best = Some((o, src));
                }
            }
            Err(e) => rec.error = Some(e.to_string()),
        }
    }
    let (best, src) = best.ok_or_else(|| {
        let why: Vec<String> = records.iter().filter_map(|r| r.error.as_ref().map(|e| format!("{}: {e}", r.config.roman()))).collect();
        Error::InfeasibleConstraints(format!("no configuration could be optimized at {lambda_deg_nm} nm ({})", why.join("; ")))
    })?;
    Ok(SweepResult {
        lambda_deg_nm,
        crystal: disp.crystal(),
        pmf,
        spdc_period_um: src.gratings.spdc.period_um,
        sfc_period_um: src.gratings.sfc.period_um,
        lengths: best.evaluation.lengths,
        best,
        records,
    })
}

/// One wavelength of a sweep; failures are kept, not propagated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda_deg_nm: f64,
    pub result: std::result::Result<SweepResult, String>,
    /// Conventional degenerate source, when its pump is not absorbed.
    pub conventional: Option<std::result::Result<ConventionalResult, String>>,
}

impl SweepPoint {
    pub fn ok(&self) -> Option<&SweepResult> {
        self.result.as_ref().ok()
    }

    pub fn conventional_ok(&self) -> Option<&ConventionalResult> {
        self.conventional.as_ref().and_then(|r| r.as_ref().ok())
    }
}

/// Purity target of the filtered conventional baseline.
pub const CONVENTIONAL_TARGET_PURITY: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings {
    pub pmf: PmfKind,
    pub constraints: OptimizationConstraints,
    pub search: SearchOptions,
    /// Also compute the conventional degenerate baseline.
    pub conventional: bool,
    /// Parallelism across wavelengths; each point runs sequentially.
    pub exec: Execution,
}

/// Evenly spaced wavelengths from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Wavelengths from `lo` to `hi` with `step`, the last point clamped to `hi`.
pub fn stepped(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|k| (lo + step * k as f64).min(hi)).collect()
}

pub fn sweep_point(disp: &CrystalDispersion, lambda: f64, s: &SweepSettings) -> SweepPoint {
    let result = select_configuration(disp, lambda, s.pmf, &s.constraints, &s.search).map_err(|e| e.to_string());
    let conventional = (s.conventional && lambda >= disp.degenerate_lower_limit_nm()).then(|| {
        let grid = GridOptions { exec: Execution::Sequential, ..s.search.grid };
        conventional_baseline(disp, Type2Axes::default_for(disp.crystal()), lambda, CONVENTIONAL_TARGET_PURITY, &grid)
            .map_err(|e| e.to_string())
    });
    SweepPoint { lambda_deg_nm: lambda, result, conventional }
}

/// Sweep over wavelengths, ordered as given regardless of completion order.
pub fn sweep(disp: &CrystalDispersion, lambdas: &[f64], s: &SweepSettings) -> Vec<SweepPoint> {
    s.exec.map(lambdas, |&l| sweep_point(disp, l, s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ktp() -> &'static CrystalDispersion {
        CrystalDispersion::builtin(Crystal::Ktp)
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let mut f = |p: &[f64; 4]| p.iter().enumerate().map(|(k, v)| (k as f64 + 1.0) * (v - 0.3 * k as f64).powi(2)).sum();
        let m = nelder_mead(&mut f, [1.0; 4], [0.5; 4], 5000, 1e-9, 1e-15);
        for k in 0..4 {
            assert!((m.x[k] - 0.3 * k as f64).abs() < 1e-5, "{:?}", m.x);
        }
    }

    #[test]
    fn multistart_reaches_known_optimum() {
        // separable peak with value 1 inside the box
        let peak = [0.5f64.ln(), 1.5f64.ln(), 2.0f64.ln(), 0.8f64.ln()];
        let mut f = |p: &[f64; 4]| Some((-p.iter().zip(&peak).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).exp());
        let best = multistart_maximize(&mut f, 0.1, 6.0, 7, 5, 3000);
        assert!(best[0].value >= 0.999, "{}", best[0].value);
    }

    #[test]
    fn circular_design_reaches_unit_eta() {
        // gradients allowing a circular output with ideal symmetry
        let model = LinearModel { spdc_gradient: [1.0, -1.0], sfc_gradient: [1.0, 1.0] };
        let c = OptimizationConstraints { min_length_mm: 1e-6, max_length_mm: 1e6, ..Default::default() };
        let cands = model_candidates(&model, &c, &SearchOptions::default());
        assert!(cands[0].value >= 0.999, "{}", cands[0].value);
    }

    #[test]
    fn normalized_shapes_satisfy_constraints() {
        let src = SourceModel::new(ktp(), ConfigId::II, 780.0).unwrap();
        let c = OptimizationConstraints::default();
        let cands = model_candidates(&src.linear, &c, &SearchOptions::default());
        assert!(!cands.is_empty());
        for m in &cands {
            let n = normalize_shape(&src.linear, &c, &shape_from_log(&m.x)).unwrap();
            for s in [n.scale_min, n.working_scale(&c, 0.5), n.scale_max] {
                c.check(&src.linear, &n.at_scale(s)).unwrap();
            }
        }
    }

    #[test]
    fn ratio_violations_are_rejected() {
        let src = SourceModel::new(ktp(), ConfigId::II, 780.0).unwrap();
        let c = OptimizationConstraints::default();
        let bad = BandwidthSet::new(1.0, 1.0, 0.4, 1.0).unwrap();
        assert!(normalize_shape(&src.linear, &c, &bad).is_none());
    }

    #[test]
    fn output_interval_scales_with_length_limit() {
        let src = SourceModel::new(ktp(), ConfigId::II, 780.0).unwrap();
        let shape = BandwidthSet::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let c = OptimizationConstraints::default();
        let (lo, hi) = feasible_output_bandwidths(&src.linear, &c, &shape).unwrap();
        assert!(lo < hi);
        let long = OptimizationConstraints { max_length_mm: 60.0, ..c };
        let (lo2, _) = feasible_output_bandwidths(&src.linear, &long, &shape).unwrap();
        assert!(lo2 < lo);
        let none = OptimizationConstraints { target_output_bandwidth: Some(1e3), ..c };
        assert!(normalize_shape(&src.linear, &none, &shape).is_none());
    }

    #[test]
    fn stepped_and_linspace() {
        assert_eq!(stepped(500.0, 530.0, 10.0), vec![500.0, 510.0, 520.0, 530.0]);
        assert_eq!(linspace(1.0, 2.0, 3), vec![1.0, 1.5, 2.0]);
    }

    #[test]
    fn optimization_is_deterministic() {
        let src = SourceModel::new(ktp(), ConfigId::II, 780.0).unwrap();
        let opts = SearchOptions { polish_evals: 20, grid: GridOptions::default().with_points(64), ..Default::default() };
        let c = OptimizationConstraints::default();
        let a = optimize_bandwidths(&src, PmfKind::Gaussian, &c, &opts).unwrap();
        let b = optimize_bandwidths(&src, PmfKind::Gaussian, &c, &opts).unwrap();
        assert_eq!(a.bandwidths.as_array(), b.bandwidths.as_array());
        assert!(a.eta() > 0.97, "{}", a.eta());
    }
}
