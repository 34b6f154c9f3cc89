use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // network
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("network is not strongly connected")]
    NotStronglyConnected,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degree sequence is not graphical")]
    NotGraphical,
    #[error("could not obtain a connected realization of the degree sequence")]
    ConnectivityUnreachable,
    #[error("bus/branch graph is disconnected")]
    DisconnectedGrid,
    #[error("bus {0} has nonpositive damping")]
    NonpositiveDamping(String),

    // gramian
    #[error("horizon must be positive, got {0}")]
    HorizonNonpositive(f64),
    #[error("eps must be positive, got {0}")]
    EpsNonpositive(f64),
    #[error("controllability Gramian is numerically singular")]
    SingularGramian,
    #[error("node {0} is already in the set")]
    NodeAlreadyInSet(usize),
    #[error("node {node} out of range for network with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    // feasibility
    #[error("set has {size} members but K = {k}")]
    CardinalityExceeded { size: usize, k: usize },
    #[error("{size} exclusions exceed the allowed {max}")]
    TooManyExclusions { size: usize, max: usize },
    #[error("node {0} cannot carry an actuator")]
    NotActuatable(usize),

    // greedy
    #[error("greedy exhausted the ground set at size {reached} < {target}")]
    InfeasibleAtSize { reached: usize, target: usize },
    #[error("K = {k} is below the minimum {k_min} needed for structural controllability")]
    KBelowMinimum { k: usize, k_min: usize },
    #[error("K = {k} exceeds the {available} actuatable nodes")]
    KAboveActuatable { k: usize, available: usize },

    // epsilon
    #[error("Gramian of greedy set is numerically singular (lambda_1 = {lambda_min:e})")]
    SingularGramianEncountered { lambda_min: f64 },
    #[error("parameter {name} must be positive, got {value}")]
    NonpositiveParameter { name: &'static str, value: f64 },

    // guarantees
    #[error("ground set of size {size} exceeds enumeration limit {limit}")]
    GroundSetTooLarge { size: usize, limit: usize },
    #[error("set function is not increasing")]
    NotIncreasing,
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("ordering violated: {0}")]
    OrderingViolated(String),

    // oracle
    #[error("enumeration of {count} subsets exceeds limit {limit}")]
    EnumerationTooLarge { count: u128, limit: u128 },
    #[error("no feasible actuator set exists")]
    Infeasible,
    #[error("none of the {0} sampled sets is feasible")]
    NoFeasibleSample(usize),
    #[error("delta {0} outside (0, 1/4)")]
    DeltaOutOfRange(f64),
    #[error("dimension constraint violated: {0}")]
    DimensionConstraintViolated(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Errors that mean the instance has no feasible answer (as opposed to bad input).
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::InfeasibleAtSize { .. }
                | Error::KBelowMinimum { .. }
                | Error::Infeasible
                | Error::NoFeasibleSample(_)
                | Error::SingularGramianEncountered { .. }
        )
    }
}
