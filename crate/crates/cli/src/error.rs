use windcast::data::DataError;
use windcast::eval::EvalError;
use windcast::models::ModelError;
use windcast::pipeline::PipelineError;
use windcast::report::ReportError;

/// Exit status: 1 usage, 2 data, 3 runtime or convergence.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Data(m) => write!(f, "data error: {m}"),
            Self::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        Self::Runtime(e.to_string())
    }
}

fn pipeline_is_data(e: &PipelineError) -> bool {
    match e {
        PipelineError::TooShort { .. } | PipelineError::Data(_) => true,
        PipelineError::InCycle { source, .. } => pipeline_is_data(source),
        _ => false,
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match &e {
            PipelineError::Plan(_) => Self::Usage(e.to_string()),
            _ if pipeline_is_data(&e) => Self::Data(e.to_string()),
            _ => Self::Runtime(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Pipeline(p) => p.into(),
            EvalError::Config(m) => Self::Usage(m),
            other => Self::Runtime(other.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Io(_) => Self::Runtime(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}
