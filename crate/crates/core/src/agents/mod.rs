//! Analysis agents: parallel analyzers, cross-artifact reasoning and the
//! provider abstraction they share.

pub mod aggregate;
pub mod analyzers;
pub mod consensus;
pub mod fixtures;
pub mod hypotheses;
pub mod json;
pub mod llm;
pub mod pipeline;
pub mod prompts;
pub mod provider;
pub mod rank;

/// Repair attempts after a malformed structured completion.
pub const MAX_REPAIRS: u32 = 2;

pub use aggregate::{aggregate_findings, ClusterRule, FindingCluster};
pub use analyzers::{AgentRegistry, Analyzer, AnalyzerOutput};
pub use fixtures::{echo_reply, NotConverged};
pub use consensus::{aggregate_samples, self_consistent_complete, ConsensusFragment, ConsensusSample};
pub use hypotheses::{generate_hypotheses, ClusterHypothesis};
pub use pipeline::{Pipeline, PipelineConfig, PipelineTrace};
pub use provider::{
    prompt_hash, CircuitBreaker, FixtureMissRecord, HttpProvider, HttpProviderConfig, LlmProvider, ProviderError, StubProvider,
    StubReply, UnavailableProvider,
};
pub use rank::{rank_diagnosis, rank_findings};
