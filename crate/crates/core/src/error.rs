use thiserror::Error;

/// Errors raised by chain construction, norm solvers, grids and the
/// singular-set extractor.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coefficient group: {0}")]
    InvalidGroup(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("atom at {point:?} is within {tolerance:e} of the boundary of the index region")]
    BoundaryContact { point: Vec<f64>, tolerance: f64 },

    #[error("dipole offset has length {length} > 1")]
    OffsetTooLong { length: f64 },

    #[error("chain has {atoms} atoms, exhaustive search is limited to {limit}")]
    TooLarge { atoms: usize, limit: usize },

    #[error("solver requires the integers with a linear norm, got {0}")]
    WrongGroup(String),

    #[error("point {point:?} lies within {tolerance:e} of the (n-1)-skeleton of the grid")]
    OnSkeleton { point: Vec<f64>, tolerance: f64 },

    #[error("lattice cannot certify a homotopy class{}: {detail}", cube_suffix(.cube))]
    InsufficientResolution { cube: Option<Vec<i64>>, detail: String },

    #[error("degree sum {raw} is not close to an integer{}", cube_suffix(.cube))]
    NonIntegral { cube: Option<Vec<i64>>, raw: f64 },

    #[error("defects {a:?} and {b:?} are closer than {min_separation}")]
    DefectTooClose { a: Vec<f64>, b: Vec<f64>, min_separation: f64 },

    #[error("tube of radius {radius} around the segment leaves the domain")]
    TubeOutsideDomain { radius: f64 },

    #[error("tube radius {radius} is below 8 lattice spacings ({spacing})")]
    TubeTooThin { radius: f64, spacing: f64 },

    #[error("boundary samples are degenerate: {0}")]
    DegenerateBoundary(String),

    #[error("chains live on different domains")]
    DomainMismatch,

    #[error("chains use different coefficient groups")]
    GroupMismatch,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn cube_suffix(cube: &Option<Vec<i64>>) -> String {
    match cube {
        Some(z) => format!(" in cube {z:?}"),
        None => String::new(),
    }
}

impl Error {
    /// Variant name, printed by the CLI on domain errors.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidGroup(_) => "InvalidGroup",
            Error::InvalidDomain(_) => "InvalidDomain",
            Error::BoundaryContact { .. } => "BoundaryContact",
            Error::OffsetTooLong { .. } => "OffsetTooLong",
            Error::TooLarge { .. } => "TooLarge",
            Error::WrongGroup(_) => "WrongGroup",
            Error::OnSkeleton { .. } => "OnSkeleton",
            Error::InsufficientResolution { .. } => "InsufficientResolution",
            Error::NonIntegral { .. } => "NonIntegral",
            Error::DefectTooClose { .. } => "DefectTooClose",
            Error::TubeOutsideDomain { .. } => "TubeOutsideDomain",
            Error::TubeTooThin { .. } => "TubeTooThin",
            Error::DegenerateBoundary(_) => "DegenerateBoundary",
            Error::DomainMismatch => "DomainMismatch",
            Error::GroupMismatch => "GroupMismatch",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
