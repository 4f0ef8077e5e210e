//! Numeric tolerances shared across the crate.
//!
//! All arithmetic is IEEE-754 `f64`. Generators emit values that are exactly
//! representable or within a few ulps, so the tolerances below only absorb
//! rounding from sums of at most a few thousand terms.

/// Slack for the normalization invariants (row max/min, row sums).
pub const NORM: f64 = 1e-9;

/// Per-agent slack for probability sums; the full tolerance is `PROB_PER_N * n`.
pub const PROB_PER_N: f64 = 1e-12;

/// Largest expected-utility gain from a misreport that still counts as truthful.
pub const TRUTH: f64 = 1e-9;

/// Allowed increase of the reduction objective per induction step.
pub const REDUCE: f64 = 1e-12;

/// Two matchings whose welfare differs by at most this are treated as tied
/// and resolved by the lexicographic rule.
pub const MATCHING_TIE: f64 = 1e-9;

/// Distance from the cube boundary used when sweeping middle valuations at n = 3.
pub const BOUNDARY_MARGIN: f64 = 1e-6;

/// Probability-sum tolerance for a problem of size `n`.
pub fn prob(n: usize) -> f64 {
    PROB_PER_N * n.max(1) as f64
}
