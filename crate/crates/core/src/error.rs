use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounding box: {0}")]
    InvalidBox(String),

    #[error("invalid mean object size {0}; must be finite and > 0")]
    InvalidMeanSize(f64),

    #[error("mean size undefined; supply S override")]
    EmptyGroundTruth,

    #[error("{reason} at line {line}: `{text}`")]
    Parse { line: usize, text: String, reason: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("unknown {kind} id {id} referenced")]
    UnknownReference { kind: &'static str, id: i64 },

    #[error("duplicate (frame {frame}, track {track_id}) in sequence `{sequence}`")]
    DuplicateTrackFrame {
        sequence: String,
        frame: usize,
        track_id: u32,
    },

    #[error("singular affine transform for frame {frame} (determinant {det})")]
    SingularAffine { frame: usize, det: f64 },

    #[error("frame {got} presented after frame {last}; frames must be strictly increasing")]
    FrameOrder { last: usize, got: usize },

    #[error("fusion weights sum to {0}, expected 1")]
    WeightSum(f64),

    #[error("no detections from any detector; nothing to fuse")]
    NoDetections,

    #[error("sequence pairing failed: {0}")]
    Pairing(String),

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("matrix {rows}x{cols} too large for exhaustive matching (max 6x6)")]
    MatrixTooLarge { rows: usize, cols: usize },

    #[error("MOTA undefined: no ground-truth detections")]
    NoGroundTruth,

    #[error("{path}: {source}")]
    InFile {
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for gt/pred pairing and cross-file consistency failures.
    pub fn is_pairing(&self) -> bool {
        match self {
            Error::Pairing(_) => true,
            Error::InFile { source, .. } => source.is_pairing(),
            _ => false,
        }
    }

    pub fn in_file(self, path: impl AsRef<std::path::Path>) -> Self {
        Error::InFile {
            path: path.as_ref().display().to_string(),
            source: Box::new(self),
        }
    }
}
