use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("too many spatial streams: {total} requested, at most {max} supported")]
    TooManyStreams { total: usize, max: usize },

    #[error("channel is rank deficient: rank {rank} < {requested} requested streams")]
    RankDeficient { rank: usize, requested: usize },

    #[error("steering matrix columns are not orthonormal (deviation {0:.3e})")]
    NotOrthonormal(f64),

    #[error("malformed beamforming report: {0}")]
    MalformedReport(String),

    #[error("LoS regime requires distance {distance_m} m below the {breakpoint_m} m breakpoint")]
    RegimeViolation { distance_m: f64, breakpoint_m: f64 },

    #[error("empty capacity trace")]
    EmptyTrace,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
