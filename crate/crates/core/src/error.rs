use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised while building channels or evaluating the analytical
/// quantities.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// A probability parameter fell outside its admissible range.
    InvalidProbability { name: &'static str, value: f64 },
    /// Channel memory outside `0..=MAX_ORDER`.
    InvalidOrder(u32),
    /// The transition matrix does not have `2^l` rows of `2^l` entries.
    DimensionMismatch { expected: usize, found: usize },
    /// A row of the transition matrix does not sum to one.
    NotStochastic { row: usize, sum: f64 },
    /// Nonzero probability on a transition that is not a one-slot shift.
    IllegalTransition { from: usize, to: usize },
    /// The chain has a state that cannot reach (or be reached from) state 0.
    Reducible,
    /// The chain is irreducible but has period greater than one.
    Periodic(u64),
    /// An iterative method hit its iteration cap.
    NonConvergence { what: &'static str, iterations: u64 },
    /// A tilt parameter beyond the `exp` overflow guard.
    TiltOutOfRange(f64),
    /// An argument outside the operation's domain.
    OutOfDomain { name: &'static str, value: f64 },
    /// An operation needs a Gilbert-Elliott (order 0 or 1) channel.
    UnsupportedOrder(u32),
    /// `n`, `k` or a trial budget below its minimum.
    InvalidCount { name: &'static str, value: u64 },
    /// An explicit initial-state vector of the wrong length or order.
    InitMismatch { expected: usize, found: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidProbability { name, value } => {
                write!(f, "probability `{name}` out of range: {value}")
            }
            Error::InvalidOrder(l) => write!(f, "channel order {l} not supported (max 16)"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "transition matrix dimension {found}, expected {expected}")
            }
            Error::NotStochastic { row, sum } => write!(f, "row {row} sums to {sum}, not 1"),
            Error::IllegalTransition { from, to } => {
                write!(f, "transition {from} -> {to} is not a one-slot shift but has nonzero probability")
            }
            Error::Reducible => f.write_str("transition matrix is reducible"),
            Error::Periodic(p) => write!(f, "transition matrix is periodic with period {p}"),
            Error::NonConvergence { what, iterations } => {
                write!(f, "{what} did not converge after {iterations} iterations")
            }
            Error::TiltOutOfRange(theta) => write!(f, "tilt {theta} exceeds |theta| <= 700"),
            Error::OutOfDomain { name, value } => write!(f, "`{name}` = {value} is outside the domain"),
            Error::UnsupportedOrder(l) => {
                write!(f, "operation requires a Gilbert-Elliott channel, got order {l}")
            }
            Error::InvalidCount { name, value } => write!(f, "`{name}` = {value} is too small"),
            Error::InitMismatch { expected, found } => {
                write!(f, "initial state vector has {found} entries, expected {expected}")
            }
        }
    }
}

impl core::error::Error for Error {}
