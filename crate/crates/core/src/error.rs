use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("anti-parallel vectors have no unique rotation axis")]
    AntiParallel,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("degenerate cluster: all points coincide")]
    DegenerateCluster,
    #[error("no free space left around the stem")]
    NoFreeSpace,
    #[error("barrier potential undefined at r_hat = {0} (obstacle surface reached)")]
    PotentialDomain(f64),
    #[error("jacobian is singular and no damping was given")]
    Singular,
    #[error("non-finite twist commanded at t = {time:.4} s")]
    NonFiniteTwist { time: f64 },
    #[error("scene: {0}")]
    Scene(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
