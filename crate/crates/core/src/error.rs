use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty vocabulary")]
    EmptyVocabulary,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("degenerate hyperparameters (mu = {mu}, gamma = {gamma})")]
    DegenerateHyperparameters { mu: f64, gamma: f64 },

    #[error("collapsed solution: {0}")]
    CollapsedSolution(&'static str),

    #[error("degenerate deflation direction")]
    DegenerateDeflationDirection,

    #[error("degenerate dual deflation")]
    DegenerateDualDeflation,

    #[error("non-invertible deflation basis (condition number {0:e})")]
    NonInvertibleBasis(f64),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("empty reference document")]
    EmptyReferenceDocument,

    #[error("leave-one-out needs at least two paired documents")]
    LeaveOneOutTooSmall,

    #[error("singular regularized kernel block; use kappa > 0")]
    SingularKernelBlock,

    #[error("unknown model '{0}'")]
    UnknownModel(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("missing artifact {0}; run the preceding step first")]
    MissingArtifact(String),

    #[error("artifact mismatch: {0}")]
    ArtifactMismatch(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable snake_case tag for machine-readable reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyCorpus => "empty_corpus",
            Error::EmptyVocabulary => "empty_vocabulary",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::InvalidSplit(_) => "invalid_split",
            Error::DegenerateHyperparameters { .. } => "degenerate_hyperparameters",
            Error::CollapsedSolution(_) => "collapsed_solution",
            Error::DegenerateDeflationDirection => "degenerate_deflation_direction",
            Error::DegenerateDualDeflation => "degenerate_dual_deflation",
            Error::NonInvertibleBasis(_) => "non_invertible_basis",
            Error::Stage { source, .. } => source.kind(),
            Error::EmptyReferenceDocument => "empty_reference_document",
            Error::LeaveOneOutTooSmall => "leave_one_out_too_small",
            Error::SingularKernelBlock => "singular_kernel_block",
            Error::UnknownModel(_) => "unknown_model",
            Error::Parse { .. } => "parse",
            Error::MissingArtifact(_) => "missing_artifact",
            Error::ArtifactMismatch(_) => "artifact_mismatch",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn at_stage(self, stage: usize) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
