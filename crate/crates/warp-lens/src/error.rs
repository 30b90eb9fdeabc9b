use std::path::PathBuf;

/// Errors produced across the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed wasm binary at offset {offset}: {message}")]
    MalformedBinary { offset: usize, message: String },

    #[error("unsupported wasm feature: {0}")]
    UnsupportedFeature(String),

    #[error("value out of encodable range: {0}")]
    EncodeOverflow(String),

    #[error("no substitution candidates at function {func}, offset {offset}")]
    NoCandidates { func: u32, offset: usize },

    #[error("illegal deletion span at function {func}, offset {offset}: {reason}")]
    IllegalSpan {
        func: u32,
        offset: usize,
        reason: String,
    },

    #[error("generated mutant failed validation ({site}): {message}")]
    InvalidMutant { site: String, message: String },

    #[error("failed to spawn `{command}`: {source}")]
    SpawnFailure {
        command: String,
        #[source]
        source: std::io::Error,
    },

    #[error("runtime `{runtime}` has no machine-code dump adapter")]
    DumpUnsupported { runtime: String },

    #[error("unrecognized disassembly output: {0}")]
    DumpParseError(String),

    #[error("ratio must be positive, got {0}")]
    NonPositiveRatio(f64),

    #[error("timing summary is zero or negative for {0}")]
    ZeroTiming(String),

    #[error("function index sets of the two dumps are disjoint")]
    UnpairableFunctions,

    #[error("cannot write output to {path}: {source}")]
    OutputUnwritable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("measurement failed for {program} on {runtime}: {reason}")]
    MeasurementFailure {
        program: String,
        runtime: String,
        reason: String,
    },

    #[error("trap: {0}")]
    Trap(String),

    #[error("step budget of {0} exceeded")]
    StepBudgetExceeded(u64),

    #[error("configuration error: {0}")]
    ConfigError(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
