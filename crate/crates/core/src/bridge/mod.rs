//! Connections to classical statistics and information theory.

pub mod info;
mod infomax;
mod mle;
mod vi;

pub use info::{
    conditional_mutual_information, marginal_entropy, mutual_information, mutual_information_between, JointDistribution,
};
pub use infomax::{
    hardest_query_check, info_decomposition_check, infomax_bruteforce_check, EncoderScore, HardestQueryReport,
    InfoDecompositionReport, InfoMaxReport, QueryInformation, DECOMPOSITION_TOLERANCE, INFOMAX_MAX_ENCODERS,
    INFOMAX_MAX_STATES, TIE_TOLERANCE,
};
pub use mle::{mle_map_reduction_check, Dataset, MleMapReport, PriorSpec};
pub use vi::{precision_from_sigma, vi_maxent_check, VIProblem, ViReport, ViStep, MONOTONE_SLACK};
