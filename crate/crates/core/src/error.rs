use thiserror::Error;

/// Errors produced by the solver, the simulator and the scenario loader.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical or physical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A special-function value does not fit in an `f64`.
    #[error("range error: {0}")]
    Range(String),

    #[error("invalid layer {layer}: {reason}")]
    InvalidLayer { layer: usize, reason: String },

    /// The point source sits exactly on a layer interface.
    #[error("source radius {r0} lies on the interface at R = {radius} (interface {interface}); a point source must be interior to a layer")]
    SourceOnInterface { r0: f64, radius: f64, interface: usize },

    #[error("interface system for order n = {n}, s = {s_re:+e}{s_im:+e}i is ill-conditioned (condition number {condition:e})")]
    IllConditioned {
        n: usize,
        s_re: f64,
        s_im: f64,
        condition: f64,
    },

    #[error("harmonic series did not converge after {terms} terms (last term magnitude {last_term:e}, partial sum magnitude {partial_sum:e})")]
    NonConvergence {
        terms: usize,
        last_term: f64,
        partial_sum: f64,
    },

    #[error("observation point coincides with the source")]
    ObservationAtSource,

    #[error("particle crossed {0} interfaces in one step; the time step is too large for this geometry")]
    TooManyCrossings(usize),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// Every problem found while validating a scenario file.
    #[error("{}", format_violations(.0))]
    Invalid(Vec<Violation>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// One problem in a scenario file, located by its field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn format_violations(v: &[Violation]) -> String {
    let lines: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("invalid scenario:\n  {}", lines.join("\n  "))
}

pub type Result<T> = std::result::Result<T, Error>;
