use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // topology
    #[error("edge endpoint {node} out of range for n = {n}")]
    EndpointOutOfRange { node: usize, n: usize },
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(usize, usize),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("graph must have at least one node")]
    EmptyGraph,
    #[error("invalid port numbering: {0}")]
    InvalidPorts(String),
    #[error("exhaustive search limited to n <= {max}, got {n}")]
    TooLarge { n: usize, max: usize },
    #[error("catalog graph `{name}` cannot be built with n = {n}")]
    CatalogMismatch { name: String, n: usize },
    #[error("unknown catalog graph `{0}`")]
    UnknownCatalog(String),
    #[error("graph file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("permutation is not an automorphism of the port-numbered graph")]
    InvalidAutomorphism,

    // runtime
    #[error("expected {expected} per-party inputs, got {got}")]
    InputLength { expected: usize, got: usize },
    #[error("program `{program}` sent on port {port} at node {node} with degree {degree}")]
    PortOutOfRange {
        program: String,
        node: usize,
        port: usize,
        degree: usize,
    },
    #[error("program `{program}` sent twice on port {port} at node {node} in one round")]
    DuplicatePort {
        program: String,
        node: usize,
        port: usize,
    },
    #[error("program `{program}` did not finish within its round bound {bound}")]
    RoundBoundExceeded { program: String, bound: usize },
    #[error("program `{0}` has an input-dependent communication pattern")]
    NotOblivious(String),
    #[error("engine fault in `{program}`: {msg}")]
    ProgramFault { program: String, msg: String },

    // qsim
    #[error("unknown register `{0}`")]
    UnknownRegister(String),
    #[error("register `{0}` already exists")]
    DuplicateRegister(String),
    #[error("symbol {symbol} out of range for register `{register}` of dimension {dim}")]
    SymbolOutOfRange {
        register: String,
        symbol: u32,
        dim: u32,
    },
    #[error("register dimensions must be at least 2, got {0}")]
    BadDimension(u32),
    #[error("matrix `{0}` is not unitary")]
    NonUnitary(String),
    #[error("register `{0}` is not at its fiducial symbol in some component")]
    NotAtFiducial(String),
    #[error("register `{0}` does not hold the recomputed subroutine output")]
    UncomputeMismatch(String),
    #[error("state layouts differ")]
    LayoutMismatch,
    #[error("local operation is not a bijection")]
    NonBijective,
    #[error("register `{0}` is entangled with the rest of the state")]
    NotDisentangled(String),
    #[error("state has no support")]
    EmptyState,

    // amplify
    #[error("success probability {0} outside the single-iteration domain [1/4, 1]")]
    AngleDomain(f64),
    #[error("prepared success probability {got} differs from the declared {expected}")]
    SuccessProbabilityMismatch { expected: f64, got: f64 },

    // election / ghz
    #[error("computation is not exact: {0}")]
    NotExact(String),
    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
