use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,

    #[error("{role} label {label} at row {row} is out of range (must be < {bound})")]
    LabelOutOfRange {
        role: &'static str,
        row: usize,
        label: usize,
        bound: usize,
    },

    #[error("input shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("length mismatch: {inputs} inputs but {labels} labels")]
    LengthMismatch { inputs: usize, labels: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("unsupported architecture: {0}")]
    UnsupportedArchitecture(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("layer {layer} has zero spectral norm; capacity term undefined")]
    SingularLayer { layer: usize },

    #[error("patch norm B_{index} is zero but appears in a denominator")]
    DegenerateActivation { index: usize },

    #[error("margin {gamma} is outside (0, {gamma_bar}] allowed by the assumption check")]
    GammaOutOfRange { gamma: f64, gamma_bar: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("task {task}: {source}")]
    Task {
        task: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Strips any task annotations and returns the innermost error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Task { source, .. } => source.root(),
            other => other,
        }
    }
}
