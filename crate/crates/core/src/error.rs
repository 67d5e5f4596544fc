use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A function, gradient or Hessian evaluation produced a non-finite value.
    #[error("evaluation failure: {what}")]
    Evaluation { what: String },

    /// No ladder step within the halving cap satisfied the rule.
    #[error("step collapse after {halvings} halvings: {context}")]
    StepCollapse { halvings: u32, context: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown objective `{0}`")]
    UnknownObjective(String),

    #[error("invalid parameters for `{objective}`: {reason}")]
    InvalidParams { objective: String, reason: String },

    /// A guaranteed inequality failed when re-checked.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    /// Second derivatives were requested where the objective is not C².
    #[error("objective is not C2 at {point}")]
    NotC2 { point: String },

    #[error("point {point} lies outside the box")]
    OutsideBox { point: String },

    #[error("covering gap: partition denominator {denominator:e} at {point}")]
    CoveringGap { point: String, denominator: f64 },

    #[error("box intersects the non-smooth locus: {0}")]
    NonSmoothBox(String),

    #[error("unsupported schema `{found}`, expected `{expected}`")]
    Schema { found: String, expected: String },

    #[error("json: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub(crate) fn fmt_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.6e}")).collect();
    format!("({})", parts.join(", "))
}
