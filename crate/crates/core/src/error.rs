use crate::trajectory::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("k1*k2 must equal 4, got k1 = {k1}, k2 = {k2} (product {product})")]
    CoefficientProduct { k1: f64, k2: f64, product: f64 },

    #[error("gradient of custom potential disagrees with finite differences at {at:?} (max error {error:e})")]
    GradientMismatch { at: [f64; 3], error: f64 },

    #[error("degenerate potential: all {points} quadrature points have a vanishing gradient")]
    DegeneratePotential { points: u64 },

    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64, partial: Box<Trajectory> },

    #[error("trajectories do not share a time range")]
    DisjointTimeRanges,

    #[error("trajectory csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
