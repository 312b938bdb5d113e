use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid too coarse: sigma = {sigma} but dx = {dx} (need sigma >= 3 dx)")]
    GridTooCoarse { sigma: f64, dx: f64 },

    #[error("wavepacket clipped by grid boundary: {mass:e} of |psi|^2 lies outside the grid")]
    SupportClipped { mass: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("duplicate factor label `{0}`")]
    DuplicateFactorLabel(String),

    #[error("unknown factor `{0}`")]
    UnknownFactor(String),

    #[error("state spaces do not match: {0}")]
    SpaceMismatch(String),

    #[error("time step {dt} violates the spectral stability bound (|dt| * T_max / hbar = {ratio} > pi)")]
    CflViolation { dt: f64, ratio: f64 },

    #[error("operator `{0}` is not Hermitian")]
    NonHermitian(String),

    #[error("state has no centre-of-mass coordinate factor `{0}`")]
    MissingCenterOfMassFactor(String),

    #[error("invalid bipartition: {0}")]
    InvalidBipartition(String),

    #[error("input state is not normalized (norm = {0})")]
    UnnormalizedInput(f64),

    #[error("decomposition has no coefficients")]
    EmptyDecomposition,

    #[error("factor `{0}` is not a tensor factor of the branch state")]
    FactorNotInBranch(String),

    #[error("invalid keep set: {0}")]
    InvalidKeepSet(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("overlap with the centre-of-mass packet vanished (weight = {0:e}); the product form has broken down")]
    VanishingOverlap(f64),

    #[error("interaction not negligible in the {period} period (magnitude {value:e} at t = {time})")]
    InteractionNotNegligible {
        period: &'static str,
        value: f64,
        time: f64,
    },

    #[error("components of particle a are not separated (overlap {0:e})")]
    ComponentsNotSeparated(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
