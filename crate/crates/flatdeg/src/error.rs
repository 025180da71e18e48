//! One error type for the whole library. Variant names follow the
//! operation contracts; `msg` carries the human-readable specifics.

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("gluing mismatch: {0}")]
    GluingMismatch(String),
    #[error("angle error: {0}")]
    AngleError(String),
    #[error("not connected: {0}")]
    NotConnected(String),
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("degenerate matrix: {0}")]
    DegenerateMatrix(String),
    #[error("already orientable: {0}")]
    AlreadyOrientable(String),
    #[error("involution mismatch: {0}")]
    InvolutionMismatch(String),
    #[error("not a product: {0}")]
    NotProduct(String),
    #[error("not periodic: {0}")]
    NotPeriodic(String),
    #[error("bad direction: {0}")]
    BadDirection(String),
    #[error("not parallel: {0}")]
    NotParallel(String),
    #[error("not generic: {0}")]
    NotGeneric(String),
    #[error("bad pivot: {0}")]
    BadPivot(String),
    #[error("no degeneration: {0}")]
    NoDegeneration(String),
    #[error("no collapse: {0}")]
    NoCollapse(String),
    #[error("whole surface collapses: {0}")]
    WholeSurface(String),
    #[error("dichotomy violation: {0}")]
    DichotomyViolation(String),
    #[error("first return hits singularity: {0}")]
    FirstReturnHitsSingularity(String),
    #[error("not purely relative: {0}")]
    NotRel(String),
    #[error("star not embedded: {0}")]
    StarNotEmbedded(String),
    #[error("stars overlap: {0}")]
    StarsOverlap(String),
    #[error("not rank reducing: {0}")]
    NotReducing(String),
    #[error("assumption fails: {0}")]
    AssumptionFails(String),
    #[error("no certificate: {0}")]
    NoCertificate(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("syntax error at line {line}: {msg}")]
    SyntaxError { line: usize, msg: String },
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine name of the variant, used in JSON reports.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            GluingMismatch(_) => "GluingMismatch",
            AngleError(_) => "AngleError",
            NotConnected(_) => "NotConnected",
            InvalidPolygon(_) => "InvalidPolygon",
            DegenerateMatrix(_) => "DegenerateMatrix",
            AlreadyOrientable(_) => "AlreadyOrientable",
            InvolutionMismatch(_) => "InvolutionMismatch",
            NotProduct(_) => "NotProduct",
            NotPeriodic(_) => "NotPeriodic",
            BadDirection(_) => "BadDirection",
            NotParallel(_) => "NotParallel",
            NotGeneric(_) => "NotGeneric",
            BadPivot(_) => "BadPivot",
            NoDegeneration(_) => "NoDegeneration",
            NoCollapse(_) => "NoCollapse",
            WholeSurface(_) => "WholeSurface",
            DichotomyViolation(_) => "DichotomyViolation",
            FirstReturnHitsSingularity(_) => "FirstReturnHitsSingularity",
            NotRel(_) => "NotRel",
            StarNotEmbedded(_) => "StarNotEmbedded",
            StarsOverlap(_) => "StarsOverlap",
            NotReducing(_) => "NotReducing",
            AssumptionFails(_) => "AssumptionFails",
            NoCertificate(_) => "NoCertificate",
            DimensionMismatch(_) => "DimensionMismatch",
            SyntaxError { .. } => "SyntaxError",
            Internal(_) => "InternalError",
        }
    }
}
