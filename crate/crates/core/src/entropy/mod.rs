//! Entropy bounds and the exact spanning-set oracle.

pub mod bounds;
pub mod cover;
pub mod spanning;

pub use bounds::{compute_bounds, lower_bound, sweep_min_return, upper_bound, BoundReport, BoundsOptions, SweepOptions};
pub use cover::{exact_cover, greedy_cover, CoverResult};
pub use spanning::{
    build_spanning_instance, empirical_rate, min_spanning_cardinality, CandidateClass, Predicate, SpanningInstance,
};
