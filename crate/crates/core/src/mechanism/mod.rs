//! Mechanisms as evaluable objects.
//!
//! A [`Mechanism`] maps a reported profile to a random matching. Each one can
//! report its exact assignment distribution, enumerate its lottery over
//! matchings for small `n`, and hand out a [`Sampler`] for Monte-Carlo
//! estimation through [`evaluate`].

mod fixed;
mod hybrid;
mod random_priority;
mod uniform;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AssignmentDistribution, Matching, MechanismResult, Method, ValuationProfile};

pub use fixed::{OptimalMatchingMechanism, SerialDictatorship};
pub use hybrid::{cubic_lottery, hybrid_mechanism_exact, HybridMechanism};
pub use random_priority::{
    rp_exact, rp_lottery, rp_montecarlo, rp_ordered_fastpath, serial_dictatorship, RandomPriority,
    EXACT_MAX_TYPES, MAX_EXACT_STATES,
};
pub use uniform::{uniform_mechanism, UniformMechanism};

/// Largest `n` for which lotteries over matchings are enumerated.
pub const LOTTERY_MAX_N: usize = 8;

/// Samples per independently seeded Monte-Carlo block.
pub const MC_BLOCK: u64 = 4096;

/// Name of the generator recorded in Monte-Carlo provenance.
pub const MC_RNG: &str = "ChaCha8, one stream per 4096-sample block";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Capabilities {
    pub supports_exact: bool,
    pub ordinal: bool,
    pub anonymous: bool,
    pub neutral: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum EvalMode {
    Exact,
    MonteCarlo { samples: u64, seed: u64 },
}

/// A finite lottery over matchings; probabilities sum to 1.
pub type Lottery = Vec<(Matching, f64)>;

/// Draws matchings from a mechanism on a fixed profile.
pub trait Sampler {
    /// Writes one sampled assignment (agent -> item) into `out`.
    fn draw(&mut self, rng: &mut ChaCha8Rng, out: &mut [usize]);
}

pub trait Mechanism: Send + Sync {
    fn name(&self) -> String;

    fn capabilities(&self) -> Capabilities;

    fn distribution(&self, p: &ValuationProfile) -> Result<AssignmentDistribution>;

    /// The full lottery over matchings. Only available for `n <= LOTTERY_MAX_N`.
    fn lottery(&self, p: &ValuationProfile) -> Result<Lottery>;

    fn sampler<'a>(&'a self, p: &'a ValuationProfile) -> Result<Box<dyn Sampler + 'a>>;

    fn exact(&self, p: &ValuationProfile) -> Result<MechanismResult> {
        Ok(MechanismResult::exact(p, self.distribution(p)?))
    }
}

impl<M: Mechanism + ?Sized> Mechanism for Box<M> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
    fn distribution(&self, p: &ValuationProfile) -> Result<AssignmentDistribution> {
        (**self).distribution(p)
    }
    fn lottery(&self, p: &ValuationProfile) -> Result<Lottery> {
        (**self).lottery(p)
    }
    fn sampler<'a>(&'a self, p: &'a ValuationProfile) -> Result<Box<dyn Sampler + 'a>> {
        (**self).sampler(p)
    }
    fn exact(&self, p: &ValuationProfile) -> Result<MechanismResult> {
        (**self).exact(p)
    }
}

pub fn evaluate<M: Mechanism + ?Sized>(mech: &M, p: &ValuationProfile, mode: EvalMode) -> Result<MechanismResult> {
    match mode {
        EvalMode::Exact => {
            if !mech.capabilities().supports_exact {
                return Err(Error::Capability {
                    mechanism: mech.name(),
                    capability: "exact evaluation",
                });
            }
            mech.exact(p)
        }
        EvalMode::MonteCarlo { samples, seed } => monte_carlo(mech, p, samples, seed),
    }
}

/// Hoeffding radius at 99% confidence for the mean of `samples` draws in `[0, n]`.
pub fn hoeffding_radius(n: usize, samples: u64) -> f64 {
    n as f64 * ((200f64).ln() / (2.0 * samples as f64)).sqrt()
}

/// Averages welfare and per-agent utility over `samples` draws.
///
/// Draws are split into fixed blocks of [`MC_BLOCK`]; block `b` uses the
/// ChaCha8 stream `b` under `seed`. Block results are summed in block order,
/// so the estimate is identical for any worker count.
pub fn monte_carlo<M: Mechanism + ?Sized>(
    mech: &M,
    p: &ValuationProfile,
    samples: u64,
    seed: u64,
) -> Result<MechanismResult> {
    if samples == 0 {
        return Err(Error::invalid("Monte-Carlo evaluation needs at least one sample"));
    }
    let n = p.n();
    // surface preconditions before spawning work
    drop(mech.sampler(p)?);
    let blocks = samples.div_ceil(MC_BLOCK);
    let partials: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let count = MC_BLOCK.min(samples - b * MC_BLOCK);
            let mut sampler = mech.sampler(p).expect("sampler construction succeeded above");
            let mut sums = vec![0.0; n];
            let mut out = vec![0usize; n];
            for _ in 0..count {
                sampler.draw(&mut rng, &mut out);
                for (i, &j) in out.iter().enumerate() {
                    sums[i] += p.value(i, j);
                }
            }
            sums
        })
        .collect();
    let mut per_agent_utility = vec![0.0; n];
    for part in &partials {
        for (acc, v) in per_agent_utility.iter_mut().zip(part) {
            *acc += v;
        }
    }
    per_agent_utility.iter_mut().for_each(|u| *u /= samples as f64);
    Ok(MechanismResult {
        expected_welfare: per_agent_utility.iter().sum(),
        per_agent_utility,
        distribution: None,
        method: Method::MonteCarlo {
            samples,
            seed,
            ci_radius: hoeffding_radius(n, samples),
            rng: MC_RNG.to_string(),
        },
    })
}

/// Marginal distribution of a lottery.
pub fn lottery_distribution(n: usize, lottery: &Lottery) -> AssignmentDistribution {
    let mut d = AssignmentDistribution::zeros(n);
    for (m, w) in lottery {
        d.add_matching(m, *w);
    }
    d
}

pub(crate) fn check_lottery_size(n: usize) -> Result<()> {
    if n > LOTTERY_MAX_N {
        return Err(Error::TooLarge {
            what: "lottery enumeration",
            n,
            max: LOTTERY_MAX_N,
            hint: "use the assignment distribution instead",
        });
    }
    Ok(())
}

/// Looks a mechanism up by its command-line name.
pub fn by_name(name: &str) -> Result<Box<dyn Mechanism>> {
    Ok(match name {
        "rp" => Box::new(RandomPriority),
        "uniform" => Box::new(UniformMechanism),
        "hm" => Box::new(HybridMechanism),
        "sd" => Box::new(SerialDictatorship::identity_order()),
        "opt" => Box::new(OptimalMatchingMechanism),
        other => {
            return Err(Error::invalid(format!(
                "unknown mechanism `{other}` (expected rp, uniform, hm, sd or opt)"
            )))
        }
    })
}

/// Greedy serial picks. `order` lists agents; `ranked[a]` is agent `a`'s
/// preference order. Writes the assignment into `out`.
pub(crate) fn greedy_picks(order: &[usize], ranked: &[Vec<usize>], taken: &mut [bool], out: &mut [usize]) {
    taken.iter_mut().for_each(|t| *t = false);
    for &a in order {
        let j = *ranked[a].iter().find(|&&j| !taken[j]).expect("an item remains for every agent");
        taken[j] = true;
        out[a] = j;
    }
}

pub(crate) fn ranked_items(p: &ValuationProfile) -> Vec<Vec<usize>> {
    (0..p.n()).map(|i| crate::model::order_by_value(p.row(i))).collect()
}
