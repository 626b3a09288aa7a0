use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Problems found while reading the edge, attribute or schema sources.
///
/// Line numbers are 1-based and refer to the source named in the variant.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("attribute line {line}: {message}")]
    Attributes { line: usize, message: String },
    #[error("attribute line {line}: column `{column}` is quantitative but holds `{value}`")]
    NonNumeric {
        line: usize,
        column: String,
        value: String,
    },
    #[error("attribute line {line}: quantitative column `{column}` is missing a value")]
    MissingQuantitative { line: usize, column: String },
    #[error("attribute line {line}: duplicate node id `{id}`")]
    DuplicateNode { line: usize, id: String },
    #[error("edge line {line}: unknown node id `{id}`")]
    UnknownNode { line: usize, id: String },
    #[error("edge line {line}: expected two node ids, found `{content}`")]
    MalformedEdge { line: usize, content: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("node index {index} out of range for a graph with {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },
    #[error("node {0} is not active in the view")]
    InactiveNode(usize),
    #[error("semantic vectors do not conform to the same schema")]
    SchemaMismatch,
    #[error("sketch table was built for l = {built}, but l = {requested} was requested")]
    SketchRadiusMismatch { built: usize, requested: usize },
    #[error("sketches are incompatible (k {k1} vs {k2}, seed {seed1:#x} vs {seed2:#x})")]
    SketchMismatch {
        k1: usize,
        k2: usize,
        seed1: u64,
        seed2: u64,
    },
    #[error("the sketch backend needs a sketch table")]
    MissingSketchTable,
    #[error("malformed sketch cache: {0}")]
    SketchCache(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty distance sample")]
    EmptySample,
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("modularity is undefined for a graph without edges")]
    NoEdges,
    #[error("modularity requires an undirected graph")]
    Directed,
    #[error("graph has {n} nodes, above the oracle limit of {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("clustering does not match the graph: {0}")]
    ClusteringMismatch(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
