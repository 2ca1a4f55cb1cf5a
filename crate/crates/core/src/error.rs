use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("overlay failure: {0}")]
    OverlayFailure(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported geometry {kind:?} in feature {index}")]
    UnsupportedGeometry { index: usize, kind: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("no anchor candidates with dtb <= {max_dtb} m")]
    NoAnchors { max_dtb: f64 },

    #[error("warp distortion bound violated after {rounds} damping rounds; worst plot {plot_id}")]
    DistortionBound { plot_id: String, rounds: usize },

    #[error("too few sites for a partition: {0} (need at least 2)")]
    TooFewSites(usize),

    #[error("duplicate id {0}")]
    DuplicateId(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
