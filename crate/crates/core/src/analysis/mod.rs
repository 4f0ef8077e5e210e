//! Approximation ratios, truthfulness and symmetry certificates, and
//! finite-`n` checks of the welfare bounds.

mod bounds;
mod properties;
mod truthfulness;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::optimal_welfare;
use crate::mechanism::{evaluate, EvalMode, Mechanism};
use crate::model::{RatioReport, ValuationProfile};

pub use bounds::{
    corollary1_checks, lemma5_checks, lemma5_scaled_ratio, lemma8_check, lemma9_misreport_checks, run_suite,
    verify_lemma4_bound, verify_lemma6_misreport_bound, verify_unit_sum_floor, Suite,
};
pub use properties::{optimum_in_support, pareto_expost_check, property_check, stochasticity_check, Property};
pub use truthfulness::{
    cubic_lottery_regret, truthfulness_check_cardinal, truthfulness_check_ordinal, LotteryRegret, SearchMode,
    TruthfulnessReport, Witness, DEFAULT_TRUTH_BUDGET,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// `lhs >= rhs`
    Lower,
    /// `lhs <= rhs`
    Upper,
}

/// One numeric inequality evaluated at a concrete size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub direction: Direction,
    /// Slack granted to `lhs` before comparing.
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

impl BoundCheck {
    pub fn new(name: impl Into<String>, n: usize, lhs: f64, rhs: f64, direction: Direction, tolerance: f64) -> Self {
        let holds = match direction {
            Direction::Lower => lhs + tolerance >= rhs,
            Direction::Upper => lhs - tolerance <= rhs,
        };
        BoundCheck {
            name: name.into(),
            n,
            lhs,
            rhs,
            holds,
            direction,
            tolerance,
            witness: None,
        }
    }

    pub fn lower(name: impl Into<String>, n: usize, lhs: f64, rhs: f64) -> Self {
        Self::new(name, n, lhs, rhs, Direction::Lower, 0.0)
    }

    pub fn upper(name: impl Into<String>, n: usize, lhs: f64, rhs: f64) -> Self {
        Self::new(name, n, lhs, rhs, Direction::Upper, 0.0)
    }

    pub fn with_tolerance(self, tolerance: f64) -> Self {
        Self::new(self.name, self.n, self.lhs, self.rhs, self.direction, tolerance).with_witness_opt(self.witness)
    }

    pub fn with_witness(mut self, witness: impl Into<String>) -> Self {
        self.witness = Some(witness.into());
        self
    }

    fn with_witness_opt(mut self, witness: Option<String>) -> Self {
        self.witness = witness;
        self
    }
}

/// Expected welfare of `mech` on `p` divided by the optimal welfare.
pub fn approximation_ratio_on<M: Mechanism + ?Sized>(
    p: &ValuationProfile,
    mech: &M,
    mode: EvalMode,
) -> Result<RatioReport> {
    let result = evaluate(mech, p, mode)?;
    let opt = optimal_welfare(p);
    if opt <= 0.0 {
        return Err(Error::ZeroOptimum);
    }
    Ok(RatioReport {
        mech_welfare: result.expected_welfare,
        opt_welfare: opt,
        ratio: result.expected_welfare / opt,
        provenance: result.method,
    })
}
