//! Post-processing of MCMC output: traces, effective sample size, posterior
//! summaries and cross-sampler comparison tables.

mod compare;
mod ess;
mod trace;

pub use compare::{compare_samplers, Comparison, PairwiseZ, SamplerRow};
pub use ess::{effective_sample_size, geweke_z, summarize, EssEstimate, Summary, MIN_SERIES_LEN};
pub use trace::{ChainTrace, IterationMeta};

#[derive(Debug, thiserror::Error)]
pub enum DiagnosticsError {
    #[error("series of length {len} is too short (need at least {MIN_SERIES_LEN})")]
    TooShort { len: usize },
    #[error("traces disagree on parameter labels: {left:?} vs {right:?}")]
    LabelMismatch { left: Vec<String>, right: Vec<String> },
    #[error("need at least two traces to compare, got {0}")]
    TooFewTraces(usize),
    #[error("malformed trace file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
