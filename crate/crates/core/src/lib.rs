//! Welfare analysis of one-sided matching mechanisms.
//!
//! `n` agents each receive one of `n` items. Mechanisms such as random
//! priority map reported valuations to a random matching; this crate computes
//! their exact or sampled expected welfare, compares it with the optimal
//! matching, builds adversarial profiles, and checks truthfulness and
//! symmetry properties on small instances.

pub mod analysis;
pub mod error;
pub mod generators;
pub mod io;
pub mod matching;
pub mod mechanism;
pub mod model;
pub mod n3lab;
pub mod perm;
pub mod tolerance;
pub mod transforms;

pub use error::{Error, Result};
pub use matching::{optimal_matching, optimal_matching_bruteforce, optimal_welfare, OptResult};
pub use mechanism::{evaluate, EvalMode, Mechanism};
pub use model::{
    preference_order, social_welfare, validate_profile, AssignmentDistribution, Matching, MechanismResult, Method,
    Normalization, RatioReport, ValuationProfile, Violation,
};
