//! The report-ignoring uniform random matching.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::{check_lottery_size, Capabilities, Lottery, Mechanism, Sampler};
use crate::error::Result;
use crate::model::{AssignmentDistribution, Matching, MechanismResult, Method, ValuationProfile};
use crate::perm::{factorial, permutations};

/// Distributions are attached to results only up to this size.
const DIST_MAX_N: usize = 512;

#[derive(Debug, Clone, Copy, Default)]
pub struct UniformMechanism;

/// Every agent receives every item with probability `1/n`.
pub fn uniform_mechanism(p: &ValuationProfile) -> MechanismResult {
    let n = p.n();
    let per_agent_utility: Vec<f64> = p.rows().map(|r| r.iter().sum::<f64>() / n as f64).collect();
    MechanismResult {
        expected_welfare: per_agent_utility.iter().sum(),
        per_agent_utility,
        distribution: (n <= DIST_MAX_N).then(|| AssignmentDistribution::uniform(n)),
        method: Method::Exact,
    }
}

impl Mechanism for UniformMechanism {
    fn name(&self) -> String {
        "uniform".into()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            supports_exact: true,
            ordinal: true,
            anonymous: true,
            neutral: true,
        }
    }

    fn distribution(&self, p: &ValuationProfile) -> Result<AssignmentDistribution> {
        Ok(AssignmentDistribution::uniform(p.n()))
    }

    fn lottery(&self, p: &ValuationProfile) -> Result<Lottery> {
        check_lottery_size(p.n())?;
        let w = 1.0 / factorial(p.n()) as f64;
        Ok(permutations(p.n()).into_iter().map(|m| (Matching::new_unchecked(m), w)).collect())
    }

    fn sampler<'a>(&'a self, p: &'a ValuationProfile) -> Result<Box<dyn Sampler + 'a>> {
        Ok(Box::new(UniformSampler((0..p.n()).collect())))
    }

    fn exact(&self, p: &ValuationProfile) -> Result<MechanismResult> {
        Ok(uniform_mechanism(p))
    }
}

struct UniformSampler(Vec<usize>);

impl Sampler for UniformSampler {
    fn draw(&mut self, rng: &mut ChaCha8Rng, out: &mut [usize]) {
        self.0.shuffle(rng);
        out.copy_from_slice(&self.0);
    }
}
