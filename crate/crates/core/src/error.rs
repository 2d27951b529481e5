use thiserror::Error;

pub type Result<T> = std::result::Result<T, FdiError>;

#[derive(Debug, Error)]
pub enum FdiError {
    #[error("non-physical state at {station}: {detail}")]
    Domain { station: &'static str, detail: String },

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("integration blow-up at t={t:.3} s (dt={dt}): {detail}")]
    IntegrationBlowup { t: f64, dt: f64, detail: String },

    #[error("steady-state search did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("config parse error at line {line}: {detail}")]
    ConfigParse { line: usize, detail: String },

    #[error("fault misuse: {0}")]
    FaultMisuse(String),

    #[error("invalid fault schedule: {0}")]
    Schedule(String),

    #[error("data quality: {0}")]
    DataQuality(String),

    #[error("stratification: {0}")]
    Stratification(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("configuration: {0}")]
    Configuration(String),

    #[error("shape mismatch: expected {expected} features, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("label {label} at index {index} out of range for {n_class} classes")]
    LabelOutOfRange { index: usize, label: usize, n_class: usize },

    #[error("model load: {0}")]
    ModelLoad(String),

    #[error("run {run_id}: {source}")]
    Run { run_id: u32, source: Box<FdiError> },

    #[error("fold {fold}: {source}")]
    Fold { fold: usize, source: Box<FdiError> },

    #[error("bank entry '{entry}': {detail}")]
    Bank { entry: String, detail: String },

    #[error("stream: {0}")]
    Stream(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
