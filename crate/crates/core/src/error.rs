use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("wavelength {wavelength_nm} nm is outside the {crystal} {axis} Sellmeier window [{min_nm}, {max_nm}] nm")]
    OutOfRange {
        crystal: String,
        axis: String,
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },
    #[error("axis {axis} is not an independent axis of {crystal} (strict-axis mode)")]
    UnknownAxis { crystal: String, axis: String },
    #[error("no first-order quasi-phase-matching solution: {0}")]
    NoPhaseMatch(String),
    #[error("wavelengths violate energy conservation (relative residual {residual:e})")]
    EnergyMismatch { residual: f64 },
    #[error("amplitude grids are incompatible: {0}")]
    GridMismatch(String),
    #[error("filter band does not intersect the grid: {0}")]
    EmptyBand(String),
    #[error("amplitude is identically zero")]
    ZeroAmplitude,
    #[error("indistinguishability needs a square grid with identical axes")]
    NonSquareGrid,
    #[error("division by zero: {0}")]
    DivisionByZero(String),
    #[error("target purity {target} is unachievable; narrowest band reaches {best}")]
    Unachievable { target: f64, best: f64 },
    #[error("constraints are infeasible: {0}")]
    InfeasibleConstraints(String),
    #[error("lambda_deg = {lambda_deg_nm} nm is below the absorption limit {limit_nm:.1} nm for {crystal}")]
    BelowCutoff {
        crystal: String,
        lambda_deg_nm: f64,
        limit_nm: f64,
    },
    #[error("feasible interval is empty: {0}")]
    EmptyInterval(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed data: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by the physics of the requested point rather
    /// than by malformed input.
    pub fn is_physics(&self) -> bool {
        matches!(
            self,
            Error::NoPhaseMatch(_)
                | Error::BelowCutoff { .. }
                | Error::InfeasibleConstraints(_)
                | Error::EmptyInterval(_)
                | Error::Unachievable { .. }
        )
    }
}
