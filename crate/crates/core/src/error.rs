use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unit index {index} out of range for {n} units")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("assignment is not in the support of the mechanism")]
    NotInSupport,

    #[error("infeasible constraint: {0}")]
    Infeasible(String),

    #[error("low acceptance rate: no admissible assignment after {attempts} attempts")]
    LowAcceptance { attempts: u64 },

    #[error("inconsistent exposure specification: {0}")]
    Specification(String),

    #[error("no candidate focal units with kappa = {kappa}")]
    EmptyDesign { kappa: usize },

    #[error("degenerate design: {focals} focal units for kappa = {kappa}")]
    DegenerateDesign { focals: usize, kappa: usize },

    #[error("no biclique with at least {min_units} units and {min_assignments} assignments")]
    NoAdequateBiclique { min_units: usize, min_assignments: usize },

    #[error("degenerate statistic: {0}")]
    DegenerateStatistic(&'static str),

    #[error("enumeration of {size} assignments exceeds the cap of {cap}")]
    EnumerationCap { size: u128, cap: u128 },
}

impl Error {
    /// True for errors that mean the focal design could not be built.
    pub fn is_degenerate_design(&self) -> bool {
        matches!(self, Error::EmptyDesign { .. } | Error::DegenerateDesign { .. } | Error::NoAdequateBiclique { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
