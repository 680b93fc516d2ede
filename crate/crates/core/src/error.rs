use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("spinor amplitudes r1 and r2 are both zero")]
    ZeroState,
    #[error("spinor amplitude must be non-negative and finite, got {0}")]
    InvalidAmplitude(f64),
    #[error("invalid field configuration: {0}")]
    InvalidField(String),
    #[error("RF amplitude is zero")]
    NoRFField,
    #[error("rotation axis is not a unit vector (|u|^2 = {0})")]
    NonUnitAxis(f64),
    #[error("effective frequency is zero")]
    DegenerateDelta,
    #[error("frequency must be non-zero")]
    ZeroFrequency,

    #[error("step too large: dt*|H|/hbar = {0} exceeds 0.1")]
    StepTooLarge(f64),
    #[error("invalid integration range: {0}")]
    InvalidStep(String),
    #[error("Hamiltonian sample at t = {0} is not Hermitian")]
    NonHermitianSample(f64),

    #[error("matrix is not square ({0}x{1})")]
    NonSquare(usize, usize),
    #[error("empty list of Hamiltonians")]
    EmptyList,
    #[error("{0} spins exceeds the dense limit of 12")]
    TooManySpins(usize),
    #[error("length mismatch: {0} states, {1} propagators")]
    LengthMismatch(usize, usize),

    #[error("invalid timing: {0}")]
    InvalidTiming(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("phantom size {0} must be a power of two and at least 32")]
    BadSize(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("region of interest is empty")]
    EmptyROI,
    #[error("signal and noise regions overlap")]
    OverlappingROI,
    #[error("noise region has zero standard deviation")]
    NoNoise,
}

pub type Result<T> = std::result::Result<T, Error>;
