//! Schmidt decomposition and scalar figures of merit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::spectra::{apply_tophat_filter, Band, JointAmplitude, SpectralAxis, SpectralGrid, TophatFilter, Values};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtSpectrum {
    /// Descending, with sum of squares equal to 1.
    pub coefficients: Vec<f64>,
    pub schmidt_number: f64,
}

impl SchmidtSpectrum {
    pub fn purity(&self) -> f64 {
        1.0 / self.schmidt_number
    }
}

pub fn schmidt_decompose(f: &JointAmplitude) -> Result<SchmidtSpectrum> {
    if f.is_zero() {
        return Err(Error::ZeroAmplitude);
    }
    let s = f.values.singular_values()?;
    let norm2: f64 = s.iter().map(|v| v * v).sum();
    let mut coefficients: Vec<f64> = s.iter().map(|v| v / norm2.sqrt()).collect();
    coefficients.sort_by(|a, b| b.total_cmp(a));
    let p: f64 = coefficients.iter().map(|l| l.powi(4)).sum();
    Ok(SchmidtSpectrum { coefficients, schmidt_number: 1.0 / p })
}

pub fn purity(f: &JointAmplitude) -> Result<f64> {
    Ok(schmidt_decompose(f)?.purity())
}

/// Overlap of f with its exchanged conjugate, |sum f_qr f*_rq| / sum |f_qr|^2.
pub fn indistinguishability(f: &JointAmplitude) -> Result<f64> {
    if !f.grid.is_square() {
        return Err(Error::NonSquareGrid);
    }
    if f.is_zero() {
        return Err(Error::ZeroAmplitude);
    }
    let overlap = match &f.values {
        Values::Real(m) => Complex64::new(m.iter().zip(m.transpose().iter()).map(|(a, b)| a * b).sum(), 0.0),
        Values::Complex(m) => m.iter().zip(m.transpose().iter()).map(|(a, b)| a * b.conj()).sum(),
    };
    Ok(overlap.norm() / f.values.norm_squared())
}

/// Fraction of pairs with both photons inside the pass band.
pub fn pair_pass_probability(f: &JointAmplitude, filter: &TophatFilter) -> Result<f64> {
    let total = f.values.norm_squared();
    if total == 0.0 {
        return Err(Error::ZeroAmplitude);
    }
    Ok(apply_tophat_filter(f, filter)?.values.norm_squared() / total)
}

/// Fraction of pairs whose axis-1 photon passes its band, whatever its partner does.
pub fn herald_pass_probability(f: &JointAmplitude, filter: &TophatFilter) -> Result<f64> {
    let total = f.values.norm_squared();
    if total == 0.0 {
        return Err(Error::ZeroAmplitude);
    }
    let ((r0, r1), _) = filter.index_ranges(&f.grid)?;
    let intensity = f.values.intensity();
    let passed: f64 = intensity.rows(r0, r1 - r0 + 1).iter().sum();
    Ok(passed / total)
}

/// Probability that the partner passes its filter given that the axis-1
/// photon passed and was detected.
pub fn heralding_efficiency(f: &JointAmplitude, filter: &TophatFilter) -> Result<f64> {
    let herald = herald_pass_probability(f, filter)?;
    if herald == 0.0 {
        return Err(Error::DivisionByZero("herald photon never passes its filter".into()));
    }
    Ok(pair_pass_probability(f, filter)? / herald)
}

/// Ratio of output to generated joint spectral intensity.
pub fn conversion_efficiency(f_eff: &JointAmplitude, f_jsa: &JointAmplitude) -> Result<f64> {
    let generated = f_jsa.weighted_norm_squared();
    if generated == 0.0 {
        return Err(Error::ZeroAmplitude);
    }
    Ok(f_eff.weighted_norm_squared() / generated)
}

/// Centre index of an axis: peak of the marginal intensity.
fn marginal_peaks(f: &JointAmplitude) -> (usize, usize) {
    let intensity = f.values.intensity();
    let argmax = |v: Vec<f64>| v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    let rows: Vec<f64> = intensity.row_iter().map(|r| r.sum()).collect();
    let cols: Vec<f64> = intensity.column_iter().map(|c| c.sum()).collect();
    (argmax(rows), argmax(cols))
}

fn band_around(axis: &SpectralAxis, centre: usize, half_width: f64) -> Band {
    let c = axis.value(centre);
    let step = axis.step();
    // half a step of slack keeps the edge points inside the band
    Band::from_omegas(c - half_width - 0.5 * step, c + half_width + 0.5 * step)
}

/// Symmetric band of the given frequency half-width around both marginal peaks.
pub fn symmetric_filter(f: &JointAmplitude, half_width: f64) -> TophatFilter {
    let (c1, c2) = marginal_peaks(f);
    TophatFilter {
        band1: band_around(&f.grid.axis1, c1, half_width),
        band2: band_around(&f.grid.axis2, c2, half_width),
    }
}

/// Purity of the part of `f` inside the pass band.
pub fn filtered_purity(f: &JointAmplitude, filter: &TophatFilter) -> Result<f64> {
    let (rows, cols) = filter.index_ranges(&f.grid)?;
    purity(&f.block(rows, cols))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSearch {
    pub filter: TophatFilter,
    /// Frequency half-width of both bands (rad/fs); `None` for the full window.
    pub half_width: Option<f64>,
    pub purity: f64,
    pub p_both: f64,
}

/// Widest symmetric band, identical on both axes, whose filtered purity
/// reaches `target`, resolved to one grid step by bisection.
pub fn minimal_filter_for_purity(f: &JointAmplitude, target: f64) -> Result<FilterSearch> {
    let full = TophatFilter::full_window(&f.grid);
    let p_full = purity(f)?;
    if p_full >= target {
        return Ok(FilterSearch { filter: full, half_width: None, purity: p_full, p_both: 1.0 });
    }
    let step = f.grid.axis1.step().max(f.grid.axis2.step());
    let p_at = |k: usize| -> Result<f64> { filtered_purity(f, &symmetric_filter(f, k as f64 * step)) };
    let reach = f.grid.axis1.half_width.max(f.grid.axis2.half_width);
    let mut hi = (reach / step).ceil() as usize + 1;
    let mut lo = 1usize;
    let p_lo = p_at(lo)?;
    if p_lo < target {
        return Err(Error::Unachievable { target, best: p_lo });
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if p_at(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let filter = symmetric_filter(f, lo as f64 * step);
    Ok(FilterSearch {
        filter,
        half_width: Some(lo as f64 * step),
        purity: filtered_purity(f, &filter)?,
        p_both: pair_pass_probability(f, &filter)?,
    })
}

/// Relative height a secondary maximum needs to count as a sideband.
pub const SIDEBAND_THRESHOLD: f64 = 1e-3;

/// Index of the first local minimum of `cut` walking outward from `peak`
/// in direction `dir`, provided a sideband follows it.
fn first_sideband_edge(cut: &[f64], peak: usize, dir: isize) -> Option<usize> {
    let top = cut[peak];
    let n = cut.len() as isize;
    let mut k = peak as isize + dir;
    while k + dir >= 0 && k + dir < n {
        let (prev, here, next) = (cut[(k - dir) as usize], cut[k as usize], cut[(k + dir) as usize]);
        if here <= prev && here < next {
            let mut j = k + dir;
            while j >= 0 && j < n {
                if cut[j as usize] >= SIDEBAND_THRESHOLD * top {
                    return Some(k as usize);
                }
                j += dir;
            }
            return None;
        }
        k += dir;
    }
    None
}

/// Band that stops at the first minimum of |f| on either side of the peak,
/// along cuts through the peak on both axes. Axes without sidebands keep
/// the full window.
pub fn sideband_filter(f: &JointAmplitude) -> TophatFilter {
    let intensity = f.values.intensity();
    let (mut pi, mut pj) = (0, 0);
    let mut best = f64::MIN;
    for j in 0..intensity.ncols() {
        for i in 0..intensity.nrows() {
            if intensity[(i, j)] > best {
                best = intensity[(i, j)];
                pi = i;
                pj = j;
            }
        }
    }
    let row_cut: Vec<f64> = (0..intensity.nrows()).map(|i| intensity[(i, pj)].sqrt()).collect();
    let col_cut: Vec<f64> = (0..intensity.ncols()).map(|j| intensity[(pi, j)].sqrt()).collect();
    let edges = |axis: &SpectralAxis, cut: &[f64], peak: usize| {
        let step = axis.step();
        let lo = first_sideband_edge(cut, peak, -1).map_or(axis.min(), |k| axis.value(k) - 0.25 * step);
        let hi = first_sideband_edge(cut, peak, 1).map_or(axis.max(), |k| axis.value(k) + 0.25 * step);
        Band::from_omegas(lo, hi)
    };
    TophatFilter { band1: edges(&f.grid.axis1, &row_cut, pi), band2: edges(&f.grid.axis2, &col_cut, pj) }
}

/// Figures of merit of one output state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub purity: f64,
    pub schmidt_number: f64,
    pub indistinguishability: f64,
    pub heralding_efficiency: f64,
    pub conversion_efficiency: Option<f64>,
    pub p_both: f64,
    /// Pass band used for the filtered quantities, in nm.
    pub filter: TophatFilter,
    pub filtered: bool,
    /// Grid of the evaluated amplitude; frequencies in rad/fs.
    pub grid: SpectralGrid,
}

impl MetricsReport {
    /// Metrics of `f` after `filter`, with the optional unfiltered JSA for
    /// the conversion efficiency.
    pub fn evaluate(f: &JointAmplitude, filter: Option<TophatFilter>, jsa: Option<&JointAmplitude>) -> Result<Self> {
        let full = TophatFilter::full_window(&f.grid);
        let (filter, filtered) = match filter {
            Some(flt) => (flt, flt != full),
            None => (full, false),
        };
        let (rows, cols) = filter.index_ranges(&f.grid)?;
        let inside = f.block(rows, cols);
        let schmidt = schmidt_decompose(&inside)?;
        let indist = if filtered {
            indistinguishability(&apply_tophat_filter(f, &filter)?)?
        } else {
            indistinguishability(f)?
        };
        Ok(Self {
            purity: schmidt.purity(),
            schmidt_number: schmidt.schmidt_number,
            indistinguishability: indist,
            heralding_efficiency: heralding_efficiency(f, &filter)?,
            conversion_efficiency: jsa.map(|j| conversion_efficiency(f, j)).transpose()?,
            p_both: pair_pass_probability(f, &filter)?,
            filter,
            filtered,
            grid: f.grid,
        })
    }

    pub fn eta(&self) -> f64 {
        self.purity * self.indistinguishability
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{AmplitudeKind, Normalization, SpectralAxis};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn square_grid(n: usize) -> SpectralGrid {
        let a = SpectralAxis::new(2.0, 0.1, n).unwrap();
        SpectralGrid::new(a, a).unwrap()
    }

    fn amp(grid: SpectralGrid, f: impl Fn(f64, f64) -> f64) -> JointAmplitude {
        let (r, c) = grid.shape();
        let m = DMatrix::from_fn(r, c, |i, j| f(grid.axis1.value(i) - 2.0, grid.axis2.value(j) - 2.0));
        JointAmplitude::real(grid, m, AmplitudeKind::Jsa).unwrap()
    }

    /// Tr[(f f^dagger)^2] / (Tr f f^dagger)^2 by explicit sums.
    fn trace_purity(f: &JointAmplitude) -> f64 {
        let (n, m) = f.values.shape();
        let mut rho = vec![Complex64::new(0.0, 0.0); n * n];
        for q in 0..n {
            for q2 in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 0..m {
                    acc += f.values.get(q, r) * f.values.get(q2, r).conj();
                }
                rho[q * n + q2] = acc;
            }
        }
        let tr: f64 = (0..n).map(|q| rho[q * n + q].re).sum();
        let tr2: f64 = rho.iter().map(|v| v.norm_sqr()).sum();
        tr2 / (tr * tr)
    }

    fn tilted_gaussian(grid: SpectralGrid, major: f64, minor: f64, angle: f64) -> JointAmplitude {
        let (c, s) = (angle.cos(), angle.sin());
        amp(grid, |x, y| {
            let u = c * x + s * y;
            let v = -s * x + c * y;
            (-(u * u) / (2.0 * major * major) - v * v / (2.0 * minor * minor)).exp()
        })
    }

    #[test]
    fn separable_state() {
        let f = amp(square_grid(64), |x, y| (-x * x / 0.002).exp() * (-y * y / 0.0005).exp());
        let s = schmidt_decompose(&f).unwrap();
        assert!((s.schmidt_number - 1.0).abs() < 1e-6);
        assert!((s.coefficients[0] - 1.0).abs() < 1e-9);
        let norm: f64 = s.coefficients.iter().map(|l| l * l).sum();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_mode_superposition() {
        let g = square_grid(64);
        let (r, c) = g.shape();
        let mut m = DMatrix::zeros(r, c);
        m[(3, 7)] = 1.0;
        m[(40, 20)] = 1.0;
        let f = JointAmplitude::real(g, m, AmplitudeKind::Jsa).unwrap();
        let s = schmidt_decompose(&f).unwrap();
        assert_relative_eq!(s.schmidt_number, 2.0, max_relative = 1e-12);
        assert_relative_eq!(s.coefficients[0], 0.5f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn tilted_gaussian_purity_matches_closed_form_and_trace() {
        let g = square_grid(64);
        let r = 3.0;
        let f = tilted_gaussian(g, 0.02, 0.02 / 3.0, std::f64::consts::FRAC_PI_4);
        let p = purity(&f).unwrap();
        assert_relative_eq!(p, 2.0 * r / (1.0 + r * r), max_relative = 1e-6);
        assert_relative_eq!(p, trace_purity(&f), max_relative = 1e-6);
    }

    #[test]
    fn vertical_ellipse_indistinguishability() {
        let g = square_grid(64);
        let f = tilted_gaussian(g, 0.02, 0.02 / 3.0, std::f64::consts::FRAC_PI_2);
        let i = indistinguishability(&f).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for q in 0..64 {
            for r in 0..64 {
                num += f.values.get(q, r).re * f.values.get(r, q).re;
                den += f.values.get(q, r).norm_sqr();
            }
        }
        assert_relative_eq!(i, num / den, max_relative = 1e-12);
        // two Gaussians of widths (a, b) and (b, a): 2ab/(a^2+b^2)
        assert_relative_eq!(i, 0.6, max_relative = 1e-6);
        let sym = tilted_gaussian(g, 0.03, 0.01, std::f64::consts::FRAC_PI_4);
        assert_relative_eq!(indistinguishability(&sym).unwrap(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn non_square_and_zero_amplitudes() {
        let a = SpectralAxis::new(2.0, 0.1, 64).unwrap();
        let b = SpectralAxis::new(2.0, 0.2, 64).unwrap();
        let g = SpectralGrid::new(a, b).unwrap();
        let f = JointAmplitude::real(g, DMatrix::from_element(64, 64, 1.0), AmplitudeKind::Jsa).unwrap();
        assert!(matches!(indistinguishability(&f), Err(Error::NonSquareGrid)));
        let z = JointAmplitude::real(square_grid(64), DMatrix::zeros(64, 64), AmplitudeKind::Jsa).unwrap();
        assert!(matches!(schmidt_decompose(&z), Err(Error::ZeroAmplitude)));
    }

    #[test]
    fn full_window_filter_is_neutral() {
        let f = tilted_gaussian(square_grid(64), 0.03, 0.01, 0.3);
        let full = TophatFilter::full_window(&f.grid);
        assert_relative_eq!(pair_pass_probability(&f, &full).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(heralding_efficiency(&f, &full).unwrap(), 1.0, max_relative = 1e-15);
        let search = minimal_filter_for_purity(&amp(square_grid(64), |x, y| (-(x * x + y * y) / 0.001).exp()), 0.99)
            .unwrap();
        assert_eq!(search.half_width, None);
        assert_eq!(search.p_both, 1.0);
    }

    fn erf(x: f64) -> f64 {
        // Abramowitz-Stegun 7.1.26 is too coarse; integrate instead
        let n = 20_000;
        let h = x / n as f64;
        let f = |t: f64| (-t * t).exp();
        let mut s = f(0.0) + f(x);
        for k in 1..n {
            s += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0 * 2.0 / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn circular_gaussian_pass_probability_is_product_of_erfs() {
        let n = 401;
        let g = square_grid(n);
        let sigma = 0.02;
        let f = amp(g, |x, y| (-(x * x + y * y) / (2.0 * sigma * sigma)).exp());
        let half = 0.025;
        let filter = TophatFilter {
            band1: Band::from_omegas(2.0 - half, 2.0 + half),
            band2: Band::from_omegas(2.0 - half, 2.0 + half),
        };
        // the amplitude intensity has standard deviation sigma / sqrt(2)
        let one_d = erf(half / sigma);
        let expected = one_d * one_d;
        let got = pair_pass_probability(&f, &filter).unwrap();
        // discrete band edges: one grid step of the 0.2-wide window
        assert!((got - expected).abs() < 0.02, "{got} vs {expected}");
        let h = heralding_efficiency(&f, &filter).unwrap();
        assert_relative_eq!(h, one_d, max_relative = 0.02);
    }

    fn sinc_ridge(n: usize) -> JointAmplitude {
        // antidiagonal envelope times a diagonal sinc ridge
        amp(square_grid(n), |x, y| {
            let a = (-(x + y).powi(2) / (2.0 * 0.01f64.powi(2))).exp();
            let z = (x - y) / 0.004;
            let s = if z.abs() < 1e-12 { 1.0 } else { z.sin() / z };
            a * s
        })
    }

    #[test]
    fn minimal_filter_reaches_target_and_width_curve_is_monotone() {
        let f = sinc_ridge(128);
        let p0 = purity(&f).unwrap();
        assert!(p0 < 0.99);
        let search = minimal_filter_for_purity(&f, 0.99).unwrap();
        assert!(search.purity >= 0.99);
        assert!(search.p_both < 1.0 && search.p_both > 0.0);
        // one more grid step fails
        let step = f.grid.axis1.step();
        let wider = symmetric_filter(&f, search.half_width.unwrap() + step);
        assert!(filtered_purity(&f, &wider).unwrap() < 0.99);
        let mut prev_purity = f64::INFINITY;
        let mut prev_norm = 0.0;
        for k in 0..50 {
            let w = (k as f64 + 2.0) * step;
            let flt = symmetric_filter(&f, w);
            let p = filtered_purity(&f, &flt).unwrap();
            let pb = pair_pass_probability(&f, &flt).unwrap();
            assert!(p <= prev_purity + 1e-9, "purity rose at width {k}");
            assert!(pb >= prev_norm);
            prev_purity = p;
            prev_norm = pb;
        }
    }

    #[test]
    fn sideband_filter_stops_at_first_zero() {
        let f = sinc_ridge(256);
        let flt = sideband_filter(&f);
        let full = TophatFilter::full_window(&f.grid);
        assert_ne!(flt, full);
        let raw = purity(&f).unwrap();
        assert!(filtered_purity(&f, &flt).unwrap() > raw);
        // Gaussian states keep the whole window
        let g = tilted_gaussian(square_grid(128), 0.02, 0.01, 0.4);
        assert_eq!(sideband_filter(&g), TophatFilter::full_window(&g.grid));
    }

    #[test]
    fn report_of_symmetric_gaussian() {
        let f = tilted_gaussian(square_grid(64), 0.02, 0.02, 0.0);
        let r = MetricsReport::evaluate(&f, None, Some(&f)).unwrap();
        assert_relative_eq!(r.purity, 1.0, max_relative = 1e-9);
        assert_relative_eq!(r.purity * r.schmidt_number, 1.0, max_relative = 1e-12);
        assert_eq!(r.heralding_efficiency, 1.0);
        assert_eq!(r.conversion_efficiency, Some(1.0));
        assert!(!r.filtered);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"purity\""));
    }

    fn random_amplitude(seed: Vec<f64>, complex: bool) -> JointAmplitude {
        let n = 64;
        let g = square_grid(n);
        let values = if complex {
            Values::Complex(DMatrix::from_fn(n, n, |i, j| {
                let k = (i * n + j) % seed.len();
                Complex64::new(seed[k] * ((i + 1) as f64).sin(), seed[(k + 1) % seed.len()] * ((j + 2) as f64).cos())
            }))
        } else {
            Values::Real(DMatrix::from_fn(n, n, |i, j| {
                let k = (i * 7 + j * 13) % seed.len();
                seed[k] * (0.3 * i as f64 - 0.2 * j as f64).cos()
            }))
        };
        JointAmplitude::new(g, values, AmplitudeKind::Jsa, Normalization::Unnormalized).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn svd_purity_matches_trace_oracle(seed in prop::collection::vec(0.1f64..1.0, 17..40), complex in any::<bool>()) {
            let f = random_amplitude(seed, complex);
            let s = schmidt_decompose(&f).unwrap();
            let norm: f64 = s.coefficients.iter().map(|l| l * l).sum();
            prop_assert!((norm - 1.0).abs() < 1e-9);
            prop_assert!(s.schmidt_number >= 1.0 - 1e-12);
            prop_assert!((s.purity() - trace_purity(&f)).abs() < 1e-6);
            prop_assert!(s.coefficients.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn transpose_and_scale_invariance(seed in prop::collection::vec(0.1f64..1.0, 17..40), scale in 0.01f64..100.0) {
            let f = random_amplitude(seed, false);
            let t = f.transpose();
            prop_assert!((purity(&f).unwrap() - purity(&t).unwrap()).abs() < 1e-10);
            prop_assert!((indistinguishability(&f).unwrap() - indistinguishability(&t).unwrap()).abs() < 1e-12);
            let mut scaled = f.clone();
            scaled.values.scale(scale);
            prop_assert!((purity(&f).unwrap() - purity(&scaled).unwrap()).abs() < 1e-10);
            prop_assert!((indistinguishability(&f).unwrap() - indistinguishability(&scaled).unwrap()).abs() < 1e-12);
            let i = indistinguishability(&f).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&i));
        }

        #[test]
        fn rank_one_states_are_pure(u in prop::collection::vec(-1.0f64..1.0, 64), v in prop::collection::vec(-1.0f64..1.0, 64)) {
            prop_assume!(u.iter().any(|x| x.abs() > 0.1) && v.iter().any(|x| x.abs() > 0.1));
            let g = square_grid(64);
            let m = DMatrix::from_fn(64, 64, |i, j| u[i] * v[j]);
            let f = JointAmplitude::real(g, m, AmplitudeKind::Jsa).unwrap();
            prop_assert!((schmidt_decompose(&f).unwrap().schmidt_number - 1.0).abs() < 1e-6);
        }

        #[test]
        fn symmetric_states_are_indistinguishable(seed in prop::collection::vec(0.1f64..1.0, 17..40)) {
            let f = random_amplitude(seed, false);
            let Values::Real(m) = &f.values else { unreachable!() };
            let sym = JointAmplitude::real(f.grid, m + m.transpose(), AmplitudeKind::Jsa).unwrap();
            prop_assert!((indistinguishability(&sym).unwrap() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn filter_norm_is_monotone_in_width(k1 in 1usize..30, k2 in 1usize..30) {
            let f = sinc_ridge(64);
            let step = f.grid.axis1.step();
            let (a, b) = (k1.min(k2) as f64 * step, k1.max(k2) as f64 * step);
            let pa = pair_pass_probability(&f, &symmetric_filter(&f, a)).unwrap();
            let pb = pair_pass_probability(&f, &symmetric_filter(&f, b)).unwrap();
            prop_assert!(pa <= pb + 1e-15);
        }
    }
}
