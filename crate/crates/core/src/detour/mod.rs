//! Detour resilience: how much the threshold of a pair of nodes gains from
//! paths other than the shortest one, and how that gain survives when those
//! paths are stretched `q` times.

mod bundle;
mod graph;
mod resilience;

pub use bundle::{
    extract_bundle, extract_bundle_with, reroute_bundle, reroute_bundle_with, select_hub_pairs, select_hub_pairs_with,
    BundleShape, Disjointness, PathBundle, RerouteOptions,
};
pub use graph::{load_edge_list, parse_edge_list, EdgeListGraph};
pub use resilience::{
    anomalous_resilience, bundle_threshold, ensemble_threshold, flower_detour_ensemble, real_network_resilience,
    shortest_only_threshold, ResilienceCurve, ResilienceOptions, ResiliencePoint, ResilienceStats, ThresholdModel,
    DEFAULT_TARGET, THETA_TOL,
};
