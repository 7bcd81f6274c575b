use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("window [{start}, {end}) exceeds the cocycle horizon {horizon}")]
    OutOfHorizon {
        start: usize,
        end: usize,
        horizon: usize,
    },

    #[error("operation requires a splitting with nonempty {0} block")]
    MissingSplitting(&'static str),

    #[error("factor {index} mixes blocks of the splitting (off-diagonal mass {defect:e})")]
    NotBlockRespecting { index: usize, defect: f64 },

    #[error("horizon too short: need {needed} steps, have {available}")]
    HorizonTooShort { needed: usize, available: usize },

    #[error("cocycle is neither constant nor periodic; universal quantifier cannot be evaluated")]
    NotPeriodic,

    #[error("exponent clusters separated by {gap:e} < 2 * gap_tol = {:e}", 2.0 * gap_tol)]
    ClusterAmbiguity { gap: f64, gap_tol: f64 },

    #[error("exponent {exponent} lies within gap_tol = {gap_tol} of the band edge {eps}")]
    BandEdgeAmbiguity {
        exponent: f64,
        eps: f64,
        gap_tol: f64,
    },

    #[error(
        "flag level {level} cannot be aligned by a symplectic orthogonal map (defect {defect:e})"
    )]
    FlagAlignment { level: usize, defect: f64 },

    #[error("odd number ({count}) of in-band eigenvalues for a symplectic product")]
    ParityViolation { count: usize },

    #[error("exponents violate the splitting gaps: {0}")]
    SplittingGapViolation(String),

    #[error("symplectic shortcut disagrees with the two-sided test: {0}")]
    SymplecticShortcutMismatch(String),

    #[error("certification failed: {}", .0.join("; "))]
    CertificationFailure(Vec<String>),
}

impl Error {
    /// True for failures caused by floating-point conditioning rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalFailure(_)
                | Error::ClusterAmbiguity { .. }
                | Error::BandEdgeAmbiguity { .. }
                | Error::FlagAlignment { .. }
                | Error::ParityViolation { .. }
                | Error::SymplecticShortcutMismatch(_)
                | Error::CertificationFailure(_)
        )
    }
}
