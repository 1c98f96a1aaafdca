//! Run configuration: defaults, then the TOML file, then command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use fcspdc::dispersion::Crystal;
use fcspdc::optimizer::{OptimizationConstraints, DEFAULT_SEED};
use fcspdc::spectra::{PmfKind, MIN_POINTS};

use crate::InputError;

/// Upper end of the wavelength range the dispersion data support.
pub const MAX_LAMBDA_NM: f64 = 1600.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub crystal: Crystal,
    pub pmf: PmfKind,
    pub grid_points: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Sellmeier coefficient file; the embedded tables are used otherwise.
    pub coefficients: Option<PathBuf>,
    pub sweep: SweepRange,
    /// Run sweep points in parallel.
    pub parallel: bool,
    /// Compute the conventional degenerate baseline next to each sweep point.
    pub conventional: bool,
    pub constraints: OptimizationConstraints,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepRange {
    pub lambda_min_nm: f64,
    pub lambda_max_nm: f64,
    pub step_nm: f64,
    /// Evenly spaced point count; overrides `step_nm` when set.
    pub points: Option<usize>,
}

impl Default for SweepRange {
    fn default() -> Self {
        Self { lambda_min_nm: 466.0, lambda_max_nm: 1500.0, step_nm: 10.0, points: None }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            crystal: Crystal::Ktp,
            pmf: PmfKind::Sinc,
            grid_points: fcspdc::spectra::DEFAULT_POINTS,
            seed: DEFAULT_SEED,
            out_dir: PathBuf::from("out"),
            coefficients: None,
            sweep: SweepRange::default(),
            parallel: true,
            conventional: true,
            constraints: OptimizationConstraints::default(),
        }
    }
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub crystal: Option<Crystal>,
    pub pmf: Option<PmfKind>,
    pub grid_points: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| InputError(format!("config file: {e}")).into())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
            .map_err(|e| InputError(format!("{e:#}")))?;
        Self::from_toml(&text)
    }

    pub fn resolve(file: Option<&Path>, o: &Overrides) -> Result<Self> {
        let mut c = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(v) = o.crystal {
            c.crystal = v;
        }
        if let Some(v) = o.pmf {
            c.pmf = v;
        }
        if let Some(v) = o.grid_points {
            c.grid_points = v;
        }
        if let Some(v) = o.seed {
            c.seed = v;
        }
        if let Some(v) = &o.out_dir {
            c.out_dir = v.clone();
        }
        c.validate()?;
        Ok(c)
    }

    /// Checks that need no physics; wavelength limits are checked by the
    /// commands that use them.
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < MIN_POINTS {
            return Err(InputError(format!("grid points must be at least {MIN_POINTS}, got {}", self.grid_points)).into());
        }
        let r = &self.sweep;
        if !(r.lambda_min_nm > 0.0 && r.lambda_max_nm >= r.lambda_min_nm) {
            return Err(InputError(format!("empty sweep range {}..{} nm", r.lambda_min_nm, r.lambda_max_nm)).into());
        }
        if r.lambda_max_nm > MAX_LAMBDA_NM {
            return Err(InputError(format!("sweep range ends above {MAX_LAMBDA_NM} nm")).into());
        }
        if r.points.is_none() && !(r.step_nm > 0.0) {
            return Err(InputError(format!("sweep step must be positive, got {} nm", r.step_nm)).into());
        }
        if r.points == Some(0) {
            return Err(InputError("sweep needs at least one point".into()).into());
        }
        self.constraints.validate().map_err(|e| InputError(format!("constraints: {e}")))?;
        Ok(())
    }

    pub fn lambdas(&self) -> Vec<f64> {
        let r = &self.sweep;
        match r.points {
            Some(n) => fcspdc::optimizer::linspace(r.lambda_min_nm, r.lambda_max_nm, n),
            None => fcspdc::optimizer::stepped(r.lambda_min_nm, r.lambda_max_nm, r.step_nm),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("crystal = \"ktp\"\nbogus = 1\n").is_err());
        assert!(RunConfig::from_toml("[sweep]\nlambda_min = 500\n").is_err());
    }

    #[test]
    fn file_values_and_overrides() {
        let c = RunConfig::from_toml("crystal = \"ln\"\npmf = \"gaussian\"\ngrid_points = 128\n[sweep]\npoints = 3\n").unwrap();
        assert_eq!(c.crystal, Crystal::Ln);
        assert_eq!(c.pmf, PmfKind::Gaussian);
        assert_eq!(c.lambdas().len(), 3);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "grid_points = 128\n").unwrap();
        let o = Overrides { grid_points: Some(256), crystal: Some(Crystal::Ln), ..Default::default() };
        let r = RunConfig::resolve(Some(&p), &o).unwrap();
        assert_eq!((r.grid_points, r.crystal), (256, Crystal::Ln));
    }

    #[test]
    fn invalid_values_fail_validation() {
        let mut c = RunConfig { grid_points: 8, ..Default::default() };
        assert!(c.validate().is_err());
        c.grid_points = 128;
        c.sweep.lambda_max_nm = 2000.0;
        assert!(c.validate().is_err());
    }
}
