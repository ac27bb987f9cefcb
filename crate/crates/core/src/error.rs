use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed document: {0}")]
    Malformed(String),

    #[error("unknown site `{0}`")]
    UnknownSite(String),

    #[error("unknown spin `{spin}` for site `{site}`")]
    UnknownSpin { site: String, spin: String },

    #[error("site `{0}` has an empty spin list")]
    EmptySpins(String),

    #[error("all facet weights are zero")]
    AllZeroWeights,

    #[error("empty link: the face has zero probability")]
    EmptyLink,

    #[error("codimension {codim} out of range 0..={d}")]
    CodimOutOfRange { codim: usize, d: usize },

    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    #[error("generator failed: {0}")]
    Generator(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("graph is not bipartite with respect to the given parts")]
    NotBipartite,

    #[error("invalid walk graph: {0}")]
    InvalidWalk(String),

    #[error("singular fundamental matrix (walk graph is not absorbing)")]
    Singular,

    #[error("system is not connected: {0}")]
    Disconnected(String),

    #[error("no spectral gap: largest eigenvalue of the spectral influence matrix is {0}")]
    NoSpectralGap(f64),

    #[error("power iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("{0}")]
    Precondition(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
