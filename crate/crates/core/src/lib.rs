//! Simulation and optimization of frequency-converted SPDC photon-pair sources.
//!
//! A nonlinear crystal is split into a down-conversion region and a
//! sum-frequency region. The idler of each pair is up-converted onto the
//! signal frequency by an escort pulse, and the four bandwidths (pump,
//! escort and the two phase-matching functions) are tuned so that the
//! output pair is degenerate, indistinguishable and spectrally pure.
//!
//! Module map:
//!
//! * [`dispersion`]: Sellmeier indices, wave numbers, group velocities and
//!   quasi-phase-matching periods.
//! * [`phasematch`]: the polarization configuration catalog, phase
//!   mismatch, JSA orientation and group-velocity-matching loci.
//! * [`spectra`]: discretized envelopes, phase-matching functions, JSA,
//!   JCA, the effective JSA and top-hat filtering.
//! * [`metrics`]: Schmidt decomposition and all scalar figures of merit.
//! * [`optimizer`]: constrained four-bandwidth optimization, configuration
//!   selection and wavelength sweeps.
//! * [`io`]: CSV/JSON/binary serialization of amplitudes, loci and sweeps.

pub mod dispersion;
pub mod error;
pub mod exec;
pub mod gaussian;
pub mod io;
pub mod metrics;
pub mod optimizer;
pub mod phasematch;
pub mod source;
pub mod spectra;
pub mod units;

pub use error::{Error, Result};
