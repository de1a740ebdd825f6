use thiserror::Error;

/// Crate-wide error type. Variants carry enough context to name the failing
/// stage when surfaced by the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("depth image is {got:?} but camera expects {expected:?}")]
    DimensionMismatch {
        got: (usize, usize),
        expected: (usize, usize),
    },

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("mesh has zero extent along axis {axis}; cannot scale to box")]
    DegenerateMesh { axis: usize },

    #[error("invalid grid config: {0}")]
    InvalidGrid(String),

    #[error("no object of major category `{0}` in annotation; cannot align")]
    NoMajorObject(String),

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("tensor shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid layer configuration: {0}")]
    InvalidLayer(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("training stage `{stage}` requires `{missing}` weights; run that stage first")]
    StageOrder { stage: String, missing: String },

    #[error("volume grid {got:?} does not match the model's grid {expected:?}")]
    GridMismatch {
        got: [usize; 3],
        expected: [usize; 3],
    },

    #[error("scene generation failed: {0}")]
    SceneGen(String),

    #[error("evaluation input invalid: {0}")]
    EvalInput(String),

    #[error("parse error in {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("png error on {path}: {detail}")]
    Png { path: String, detail: String },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn json(path: impl AsRef<std::path::Path>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
