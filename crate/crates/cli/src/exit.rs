use timebin_core::Error;

use crate::config::ConfigError;

pub const OTHER: u8 = 1;
pub const CONFIG_PARSE: u8 = 2;
pub const FRINGE_FLAT: u8 = 3;
pub const VERIFICATION_FAILED: u8 = 4;
pub const NUMERICAL_GUARD: u8 = 5;
pub const POPULATION_MISMATCH: u8 = 6;

pub fn code_for(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return CONFIG_PARSE;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::FringeFlat { .. }) => FRINGE_FLAT,
        Some(Error::VerificationFailed { .. }) => VERIFICATION_FAILED,
        Some(Error::PopulationMismatch { .. }) => POPULATION_MISMATCH,
        Some(e) if e.is_numerical_guard() => NUMERICAL_GUARD,
        _ => OTHER,
    }
}
