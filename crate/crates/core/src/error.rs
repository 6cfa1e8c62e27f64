use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid selectivity: {0}")]
    InvalidSelectivity(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("fabric capacity exceeded: {leaf_count} leaves do not fit in fanout {fanout}^{levels}")]
    Capacity { fanout: u32, levels: u32, leaf_count: u32 },

    #[error("node index {node} out of range (node count {node_count})")]
    NodeIndex { node: u32, node_count: u32 },

    #[error("global address {addr} out of range (limit {limit})")]
    Address { addr: u64, limit: u64 },

    #[error("index entry of {entry_bytes} bytes does not fit in a {cache_line_bytes}-byte cache line")]
    IndexEntryOverflow { entry_bytes: u64, cache_line_bytes: u64 },

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("locality violation: threadlet {threadlet} on node {node} touched a key owned by node {owner}")]
    Locality { threadlet: u64, node: u32, owner: u32 },

    #[error("step budget of {budget} events exceeded ({live} threadlets still live; last opcode {last_opcode})")]
    StepBudgetExceeded { budget: u64, live: u64, last_opcode: &'static str },

    #[error("placement error: {0}")]
    Placement(String),

    #[error("partition on node {node} needs {needed} bytes but node memory is {available} bytes")]
    PartitionCapacity { node: u32, needed: u64, available: u64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),

    #[error("oracle budget exceeded: {needed} comparisons > budget {budget}")]
    OracleBudget { needed: u128, budget: u128 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
