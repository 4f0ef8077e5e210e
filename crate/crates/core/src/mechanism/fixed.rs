//! Deterministic mechanisms: fixed-order serial dictatorship and the
//! welfare-maximising matching.

use rand_chacha::ChaCha8Rng;

use super::{check_lottery_size, Capabilities, Lottery, Mechanism, Sampler};
use crate::error::{Error, Result};
use crate::matching::optimal_matching;
use crate::model::{AssignmentDistribution, Matching, ValuationProfile};

/// Serial dictatorship along a fixed agent order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SerialDictatorship {
    order: Option<Vec<usize>>,
}

impl SerialDictatorship {
    /// Agents pick in index order, for any `n`.
    pub fn identity_order() -> Self {
        SerialDictatorship { order: None }
    }

    pub fn with_order(order: Vec<usize>) -> Result<Self> {
        Matching::new(order.clone()).map_err(|_| Error::invalid("agent order must be a permutation of the agents"))?;
        Ok(SerialDictatorship { order: Some(order) })
    }

    fn matching(&self, p: &ValuationProfile) -> Result<Matching> {
        let order = match &self.order {
            Some(o) => o.clone(),
            None => (0..p.n()).collect(),
        };
        super::serial_dictatorship(p, &order)
    }
}

impl Mechanism for SerialDictatorship {
    fn name(&self) -> String {
        "sd".into()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            supports_exact: true,
            ordinal: true,
            anonymous: false,
            neutral: true,
        }
    }

    fn distribution(&self, p: &ValuationProfile) -> Result<AssignmentDistribution> {
        Ok(AssignmentDistribution::from_matching(&self.matching(p)?))
    }

    fn lottery(&self, p: &ValuationProfile) -> Result<Lottery> {
        check_lottery_size(p.n())?;
        Ok(vec![(self.matching(p)?, 1.0)])
    }

    fn sampler<'a>(&'a self, p: &'a ValuationProfile) -> Result<Box<dyn Sampler + 'a>> {
        let m = self.matching(p)?;
        Ok(Box::new(Constant(m.into_vec())))
    }
}

/// Always outputs the lexicographically smallest welfare-maximising matching.
#[derive(Debug, Clone, Copy, Default)]
pub struct OptimalMatchingMechanism;

impl Mechanism for OptimalMatchingMechanism {
    fn name(&self) -> String {
        "opt".into()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            supports_exact: true,
            ordinal: false,
            anonymous: false,
            neutral: false,
        }
    }

    fn distribution(&self, p: &ValuationProfile) -> Result<AssignmentDistribution> {
        Ok(AssignmentDistribution::from_matching(&optimal_matching(p).matching))
    }

    fn lottery(&self, p: &ValuationProfile) -> Result<Lottery> {
        check_lottery_size(p.n())?;
        Ok(vec![(optimal_matching(p).matching, 1.0)])
    }

    fn sampler<'a>(&'a self, p: &'a ValuationProfile) -> Result<Box<dyn Sampler + 'a>> {
        Ok(Box::new(Constant(optimal_matching(p).matching.into_vec())))
    }
}

struct Constant(Vec<usize>);

impl Sampler for Constant {
    fn draw(&mut self, _rng: &mut ChaCha8Rng, out: &mut [usize]) {
        out.copy_from_slice(&self.0);
    }
}
