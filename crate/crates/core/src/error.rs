use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in `{array}`: expected {expected}, got {actual}")]
    DimensionMismatch {
        array: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("growth basis of subject {subject} is rank deficient (time values do not vary)")]
    RankDeficientBasis { subject: usize },

    #[error("at least {required} time points are required, got {actual}")]
    TooFewTimePoints { required: usize, actual: usize },

    #[error("at least 2 subjects are required for centering, got {0}")]
    TooFewSubjects(usize),

    #[error("requested {requested} region pairs but only {available} exist")]
    TooManyPairs { requested: usize, available: usize },

    #[error("every selected region pair fell below the denominator floor {floor:e}")]
    NoUsablePairs { floor: f64 },

    #[error("kappa denominator is not positive ({0:e}); temporal estimate is not positive definite along the annihilator directions")]
    NonPositiveKappaDenominator(f64),

    #[error("non-finite value in {component}")]
    NonFinite { component: &'static str },

    #[error("block {subject} of region {region} is not positive definite")]
    NotPositiveDefinite { region: usize, subject: usize },

    #[error("normal equations of region {region} are singular (condition number {condition:e})")]
    SingularNormalEquations { region: usize, condition: f64 },

    #[error("zero variance for coefficient {coefficient} of region {region}")]
    ZeroVariance { region: usize, coefficient: usize },

    #[error("{step}: {source}")]
    Step {
        step: &'static str,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_step(self, step: &'static str) -> Error {
        Error::Step {
            step,
            source: alloc::boxed::Box::new(self),
        }
    }

    /// Innermost error, skipping step annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            other => other,
        }
    }
}
