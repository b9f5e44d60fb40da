use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("point {point:?} lies outside the chart validity region")]
    InvalidChartPoint { point: Vec<f64> },

    #[error("chart distance {rho:.6} reaches the cap limit pi/(2 sqrt(d)) = {limit:.6}")]
    OutOfCap { rho: f64, limit: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("node {node} is not active")]
    InactiveNode { node: usize },

    #[error("radius {r} exceeds the grid region")]
    RadiusOutOfRange { r: f64 },

    #[error("chart exit at node {node}, position {position:?}, value {value:?}")]
    ChartExit {
        node: usize,
        position: Vec<f64>,
        value: Vec<f64>,
    },

    #[error("unstable at step {step}: energy rose by {increase:.3e}, allowed {allowed:.3e}")]
    Unstable {
        step: u64,
        increase: f64,
        allowed: f64,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl LabError {
    /// Process exit code for the CLI; distinct per failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Parse(_) => 2,
            LabError::Config(_)
            | LabError::InvalidChartPoint { .. }
            | LabError::OutOfCap { .. }
            | LabError::RadiusOutOfRange { .. }
            | LabError::InactiveNode { .. } => 3,
            LabError::ChartExit { .. } => 4,
            LabError::Unstable { .. } => 5,
            LabError::Io(_) => 6,
        }
    }
}
