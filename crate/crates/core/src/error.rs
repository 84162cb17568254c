use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{name} = {value} is outside {range}")]
    Domain { name: &'static str, value: f64, range: &'static str },

    #[error("invalid mode pair ({0}, {1})")]
    InvalidModePair(usize, usize),

    #[error("mode index {index} out of range for {num_modes} modes")]
    ModeOutOfRange { index: usize, num_modes: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular matrix in {context}")]
    Singular { context: &'static str },

    #[error("branch ({i},{j}) is singular: {context}")]
    BranchSingular { i: u8, j: u8, context: &'static str },

    #[error("degenerate photon-subtraction branch: tau product {0} <= 0")]
    DegenerateBranch(f64),

    #[error("conditioning event has zero probability (signed weight {0:e})")]
    ZeroSuccessProbability(f64),

    #[error("non-finite density matrix element at cutoff {cutoff}")]
    CutoffOverflow { cutoff: usize },

    #[error("eigensolver failed on {dim}x{dim} matrix: {detail}")]
    Eigensolver { dim: usize, detail: String },

    #[error("parameter `{axis}` does not apply to {protocol}")]
    InvalidAxis { axis: &'static str, protocol: &'static str },
}

/// Checks that `value` lies in the closed unit interval.
pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::Domain { name, value, range: "[0, 1]" })
    }
}

pub(crate) fn check_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain { name, value, range: "finite reals" })
    }
}
