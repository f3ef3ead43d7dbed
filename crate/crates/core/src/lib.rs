//! Simulation and calibration toolkit for time-bin photonic qudits.
//!
//! The crate covers the whole desk-scale calibration loop:
//!
//! * [`state`]: time-bin states, diagonal phase unitaries, density matrices and the DFT basis.
//! * [`umzi`]: state generation by cascaded unbalanced Mach–Zehnder stages with single-port
//!   post-selection.
//! * [`interferometer`]: ideal and shot-noise fringe scans of bin pairs.
//! * [`estimation`]: first-harmonic fringe fitting and adjacent-bin relative phases.
//! * [`correction`]: phase budgets, cumulative feed-forward plans and the closed loop.
//! * [`tomography`]: density-matrix reconstruction from pairwise fringes with a Fourier-basis
//!   cross-check.
//! * [`dynamics`]: driven spin-½ propagation and total/dynamical/geometric phase separation.

pub mod correction;
pub mod dynamics;
mod error;
pub mod estimation;
pub mod interferometer;
pub mod phase;
pub mod serde_complex;
pub mod state;
pub mod tomography;
pub mod umzi;

pub use error::{Error, Result};
pub use num_complex::Complex64;
