use thiserror::Error;

/// Errors raised by the analytic core and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid scale specification: {0}")]
    SpecInvalid(String),
    #[error("unknown catalog kernel `{0}`")]
    UnknownKernel(String),
    #[error("integrability condition fails: {0}")]
    IntegrabilityViolation(String),
    #[error("quadrature could not converge: {0}")]
    QuadratureFailure(String),
    #[error("range too narrow for scaling estimate: {0}")]
    RangeTooNarrow(String),
    #[error("argument {value} outside trusted range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("lower scaling index too small for running supremum: {0}")]
    LowerIndexTooSmall(String),
    #[error("missing table: {0}")]
    MissingTable(String),
    #[error("dimension {d} must exceed {bound}")]
    DimensionTooSmall { d: usize, bound: f64 },
    #[error("regime violation: {0}")]
    RegimeViolation(String),
    #[error("checkpoint t={0} was not recorded")]
    CheckpointMissing(f64),
    #[error("horizon too short: censored fraction {censored:.4} at radius {radius}")]
    HorizonTooShort { radius: f64, censored: f64 },
    #[error("process is not transient: d={d} <= {bound}")]
    NotTransient { d: usize, bound: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn out_of_range(value: f64, lo: f64, hi: f64) -> Self {
        Error::OutOfRange { value, lo, hi }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
