//! Unit conventions: angular frequency in rad/fs, wavelength in nm at the
//! API surface (µm inside Sellmeier formulas), wave numbers in rad/µm and
//! inverse group velocities in fs/µm.

use std::f64::consts::PI;

/// Speed of light in µm/fs.
pub const C_UM_PER_FS: f64 = 0.299_792_458;

/// Angular frequency (rad/fs) of a vacuum wavelength in nm.
#[inline]
pub fn omega_from_nm(lambda_nm: f64) -> f64 {
    2.0 * PI * C_UM_PER_FS * 1e3 / lambda_nm
}

/// Vacuum wavelength in nm of an angular frequency in rad/fs.
#[inline]
pub fn nm_from_omega(omega: f64) -> f64 {
    2.0 * PI * C_UM_PER_FS * 1e3 / omega
}

/// FWHM of a Gaussian exp(-x^2 / 2 sigma^2) in units of sigma.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Time-bandwidth product of a transform-limited Gaussian pulse.
pub const TIME_BANDWIDTH: f64 = 0.44;

/// FWHM pulse duration (fs) of a transform-limited pulse whose spectral
/// amplitude envelope has standard deviation `sigma` (rad/fs).
pub fn pulse_duration_fs(sigma: f64) -> f64 {
    TIME_BANDWIDTH / (FWHM_PER_SIGMA * sigma)
}

/// Inverse of [`pulse_duration_fs`].
pub fn sigma_from_duration(duration_fs: f64) -> f64 {
    TIME_BANDWIDTH / (FWHM_PER_SIGMA * duration_fs)
}

/// Coefficient of the Gaussian that best matches sinc(x) near its peak:
/// sinc(x) ~ exp(-SINC_GAUSS_GAMMA x^2).
pub const SINC_GAUSS_GAMMA: f64 = 0.193;

/// Crystal length (µm) whose sinc phase-matching function has the same
/// ridge-normal width `sigma` (rad/fs) as a Gaussian PMF, for a phase
/// mismatch gradient of magnitude `grad` (fs/µm).
pub fn length_for_pmf_width(sigma: f64, grad: f64) -> f64 {
    (2.0 / SINC_GAUSS_GAMMA).sqrt() / (sigma * grad)
}

/// Inverse of [`length_for_pmf_width`].
pub fn pmf_width_for_length(length_um: f64, grad: f64) -> f64 {
    (2.0 / SINC_GAUSS_GAMMA).sqrt() / (length_um * grad)
}
