//! Bayesian inference for exponential random graph models.
//!
//! The crate provides the building blocks (network statistics, a tie-toggle
//! simulator, exchange and population ADS samplers, auto-RJ model selection,
//! posterior-predictive goodness of fit) plus a brute-force oracle that
//! computes exact answers on tiny networks for verification.

pub mod autorj;
pub mod diagnostics;
pub mod error;
pub mod exchange;
pub mod export;
pub mod formula;
pub mod gof;
pub mod graph;
pub mod mvn;
pub mod oracle;
pub mod population;
pub mod rng;
pub mod sim;
pub mod stats;

pub use autorj::{
    bayes_factor, offline_fit, rj_log_accept, run_online, run_selection, BayesFactor, ModelFit,
    OnlineConfig, SelectionResult,
};
pub use diagnostics::{autocorrelation, summarize, PosteriorSummary};
pub use error::{Error, Result};
pub use exchange::{
    log_accept_ratio, propose_block, run_single_chain, ChainTrace, SamplerConfig, Trace, UpdateMode,
};
pub use formula::{parse_formula, parse_formula_list, Formula};
pub use gof::{run_gof, GofBins, GofConfig, GofReport};
pub use graph::{load_adjacency, load_attribute, AttributeSet, Graph, NodeAttribute};
pub use mvn::{MvNormal, Prior};
pub use population::{ads_propose, fit, run_population};
pub use sim::{simulate, Proposal, SimConfig, SimInit};
pub use stats::{change_stats, gof_stats, stat_vector, GofStats, Model, ModelSpec, ModelTerm};
