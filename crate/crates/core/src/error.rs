use thiserror::Error;

/// Errors raised by model construction and the numerical pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("truncation K = {k} is below the coefficient support radius {support}")]
    TruncationTooSmall { k: usize, support: usize },

    #[error("non-Hermitian assembly: residual {residual:.3e} exceeds {tolerance:.1e}")]
    NonHermitian { residual: f64, tolerance: f64 },

    #[error("incompatible models: {0}")]
    Incompatible(String),

    #[error("eigensolver failed at node {node}")]
    Eigensolver { node: usize },

    #[error("gap inconsistency: {0}")]
    GapInconsistent(String),

    #[error("projector rank varies across the grid ({min}..={max}); lambda0 is not in a gap")]
    RankVaries { min: usize, max: usize },

    #[error("under-resolved Chern integral: raw value {raw:.6} is {residual:.3} from the nearest integer")]
    UnderResolved { raw: f64, residual: f64 },

    #[error("singular link overlap at plaquette ({a}, {b}); refine the grid")]
    SingularOverlap { a: usize, b: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("range inclusion violated: leakage {leakage:.3e}")]
    RangeLeakage { leakage: f64 },

    #[error("invalid contour: {0}")]
    InvalidContour(String),

    #[error("hopping range {range} too large for strip width {width}")]
    HoppingRange { range: usize, width: usize },

    #[error("ambiguous eigenvalue matching on zeta interval [{lo:.6}, {hi:.6}]")]
    AmbiguousMatching { lo: f64, hi: f64 },

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("gap not certified: {0}")]
    GapNotCertified(String),

    #[error("partial eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Tags an error with the pipeline stage that produced it.
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
