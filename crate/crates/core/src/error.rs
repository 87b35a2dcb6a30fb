use thiserror::Error;

/// Everything that can go wrong while configuring or running an experiment.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("observable returned non-finite value {value} at t = {time}")]
    Evaluation { time: f64, value: f64 },

    #[error("time step dt = {dt} exceeds dt_max = {dt_max}")]
    StepTooLarge { dt: f64, dt_max: f64 },

    #[error("numerical blow-up: non-finite state at t = {time}")]
    BlowUp { time: f64 },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("scheme violation: {0}")]
    SchemeViolation(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("degenerate section: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the command line tool: 1 for anything the user
    /// can fix in the configuration, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Unsupported(_) | Error::Precondition(_) | Error::StepTooLarge { .. } => 1,
            Error::Io(_) => 1,
            _ => 2,
        }
    }

    pub fn is_numerical(&self) -> bool {
        self.exit_code() == 2
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
