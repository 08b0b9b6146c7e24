//! Decoding: detector error model extraction, reduction to a matching graph,
//! and minimum-weight perfect matching.

pub mod blossom;
mod dem;
mod graph;
mod matching;

pub use dem::{build_dem, build_dem_excluding, xor_probability, DetectorErrorModel, Mechanism, EXCLUDED_TAGS};
pub use graph::{
    edge_weight, to_matching_graph, to_matching_graph_with, MatchingEdge, MatchingGraph,
    DEFAULT_MAX_DROPPED_FRACTION, WEIGHT_SCALE,
};
pub use matching::{decode_outcomes, mwpm_decode, score_predictions, Decoder, Score};
