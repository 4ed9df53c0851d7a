use thiserror::Error;

#[derive(Debug, Error)]
pub enum JchError {
    #[error("empty sector: L={sites}, N={charge}, n_max={n_max} admits no configuration")]
    EmptySector { sites: usize, charge: usize, n_max: usize },

    #[error("basis too large to index: local dimension {local_dim} over {sites} sites overflows 64-bit codes")]
    BasisOverflow { local_dim: usize, sites: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension guard: {what} ({size}) exceeds the limit {limit}")]
    ResourceGuard { what: &'static str, size: usize, limit: usize },

    #[error("energy table has no entry for N={0}")]
    MissingEnergy(usize),

    #[error("site index {site} out of range for L={sites}")]
    SiteOutOfRange { site: usize, sites: usize },

    #[error("states orthogonal (overlap {overlap:e}): δκ too large or level crossing")]
    OrthogonalStates { overlap: f64 },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("not converged: {0}")]
    NotConverged(String),
}

pub type Result<T> = std::result::Result<T, JchError>;
