//! Discrete Bayesian networks over encoded clinical characteristics.
//!
//! Structure is learned by tabu search over single-arc moves scored with
//! BIC, made robust by bootstrap resampling: the directed-arc frequencies
//! across replicates are the arc strengths, and arcs at or above the
//! threshold form the consensus DAG. Parameters are smoothed maximum
//! likelihood CPTs; marker posteriors come from exact variable elimination.

mod bootstrap;
mod cpt;
mod dag;
mod export;
mod inference;
mod score;
mod tabu;

pub use bootstrap::{
    bootstrap_consensus, connect_components, merge_networks, ArcStrengthTable, BootstrapParams,
    MergedNetwork,
};
pub use cpt::{fit_parameters, BayesianNetworkModel, Cpt};
pub use dag::Dag;
pub use export::{parse_annotations, ArcCategory, ArcRecord, ArcType, CptRecord, NetworkJson};
pub use inference::{infer_markers, posterior, Evidence, MarkerPosterior, FPG_VARIABLE, HPP2_VARIABLE};
pub use score::{bic_score, family_bic, family_loglik, ScoreCache};
pub use tabu::{tabu_search, TabuParams};
