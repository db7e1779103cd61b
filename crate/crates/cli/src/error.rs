use diffcoarsen::coarsen::CoarsenError;
use diffcoarsen::fvm::SimError;
use diffcoarsen::geometry::GeometryError;
use diffcoarsen::pooling::PoolingError;
use diffcoarsen::scenarios::ScenarioError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("gradient check failed: max relative error {0:e} exceeds {1:e}")]
    Gradient(f64, f64),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl CliError {
    /// Process exit status: 2 config, 3 instability, 4 geometry,
    /// 5 gradient check, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Simulation(e) => match e {
                SimError::Instability { .. } | SimError::UnstableTimeStep { .. } => 3,
                SimError::Geometry(_) => 4,
                SimError::InvalidConfig(_) | SimError::IndexOutOfRange { .. } => 2,
            },
            CliError::Geometry(_) => 4,
            CliError::Gradient(..) => 5,
            CliError::Io { .. } => 1,
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Geometry(g) => CliError::Geometry(g),
            ScenarioError::Simulation(s) => CliError::Simulation(s),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<PoolingError> for CliError {
    fn from(e: PoolingError) -> Self {
        match e {
            PoolingError::Geometry(g) => CliError::Geometry(g),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<CoarsenError> for CliError {
    fn from(e: CoarsenError) -> Self {
        match e {
            CoarsenError::Simulation(s) => CliError::Simulation(s),
            CoarsenError::Pooling(p) => p.into(),
            CoarsenError::Geometry(g) => CliError::Geometry(g),
            other => CliError::Config(other.to_string()),
        }
    }
}
