use thiserror::Error;

/// Failures raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid elastic parameters: {0} is violated")]
    Param(&'static str),

    #[error("kernel operations need distinct wavenumbers (lambda + mu = 0 gives kp = ks)")]
    EqualSpeeds,

    #[error("local spherical frame is degenerate at theta = {theta}")]
    FrameDegenerate { theta: f64 },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid mode (l = {l}, m = {m}): {reason}")]
    Mode { l: u32, m: i32, reason: &'static str },

    #[error("quadrature under-resolved: need at least {required} nodes, have {available}")]
    Resolution { required: usize, available: usize },

    #[error("non-finite integrand at node r = {node}")]
    NonFinite { node: f64 },

    #[error("integrand does not decay fast enough for the weighted radial integral")]
    Divergent,

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
