use thiserror::Error;

/// Errors surfaced by the derivation pipeline.
///
/// Validation problems (bad inputs, malformed trees, domain violations) are
/// distinct from infeasibility (well-formed inputs that admit no solution);
/// the CLI maps the two classes onto different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("probability out of range: {name} = {value}")]
    ProbabilityRange { name: &'static str, value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("fault tree node `{0}` not found")]
    MissingNode(String),

    #[error("fault tree is cyclic at node `{0}`")]
    CyclicTree(String),

    #[error("node `{node}` has more than one parent")]
    MultipleParents { node: String },

    #[error("basic event `{0}` has no probability (field or override)")]
    MissingProbability(String),

    #[error("gate `{node}`: k = {k} out of range for {children} children")]
    KOutOfRange { node: String, k: usize, children: usize },

    #[error("infeasible allocation at `{node}`: {reason}")]
    InfeasibleAllocation { node: String, reason: String },

    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),

    #[error("infeasible margin: p_crit {p_crit} < p_req {p_req}")]
    InfeasibleMargin { p_crit: f64, p_req: f64 },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("input masses sum to {0}, expected 1")]
    UnnormalizedMasses(f64),

    #[error("detection vector length {got} does not match n = {expected}")]
    VectorLength { expected: usize, got: usize },

    #[error("infeasible kinematics: stopping distance {stopping:.3} m >= detection distance {detection:.3} m")]
    InfeasibleKinematics { stopping: f64, detection: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors that mean "no solution exists", as opposed to
    /// malformed input.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::InfeasibleAllocation { .. }
                | Error::InfeasibleScenario(_)
                | Error::InfeasibleMargin { .. }
                | Error::InfeasibleKinematics { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
