use std::fmt;

use basin_forge::integrator::IntegratorError;
use basin_forge::ode_system::FieldError;
use basin_forge::planar::PlanarError;
use basin_forge::robust_map::RobustMapError;
use basin_forge::tm::TmError;

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

pub const EXIT_IO: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_INTEGRATOR: u8 = 3;
pub const EXIT_INCOMPLETE: u8 = 4;

impl Failure {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Self { code: EXIT_INVALID, msg: msg.into() }
    }

    pub fn io(path: &std::path::Path, e: impl fmt::Display) -> Self {
        Self { code: EXIT_IO, msg: format!("{}: {e}", path.display()) }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<TmError> for Failure {
    fn from(e: TmError) -> Self {
        Self::invalid(e.to_string())
    }
}

impl From<FieldError> for Failure {
    fn from(e: FieldError) -> Self {
        Self::invalid(e.to_string())
    }
}

impl From<RobustMapError> for Failure {
    fn from(e: RobustMapError) -> Self {
        Self::invalid(e.to_string())
    }
}

impl From<IntegratorError> for Failure {
    fn from(e: IntegratorError) -> Self {
        Self { code: EXIT_INTEGRATOR, msg: format!("integration failed: {e}") }
    }
}

impl From<PlanarError> for Failure {
    fn from(e: PlanarError) -> Self {
        let code = match e {
            PlanarError::IncompleteInventory { .. } => EXIT_INCOMPLETE,
            PlanarError::Integrator(_) => EXIT_INTEGRATOR,
            _ => EXIT_INVALID,
        };
        Self { code, msg: e.to_string() }
    }
}
