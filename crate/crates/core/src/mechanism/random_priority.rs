//! Random priority (random serial dictatorship).
//!
//! The exact evaluator propagates probability mass level by level over
//! states `(remaining agents, remaining items)`. Agents that report the same
//! preference order behave identically under any serial dictatorship, so the
//! remaining agents are tracked as a count per preference type rather than a
//! set. With one type per agent this is the plain subset recursion; with many
//! identical agents (the adversarial profiles) it stays small at `n = 16` and
//! beyond.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::hash::BuildHasherDefault;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::{
    check_lottery_size, evaluate, greedy_picks, lottery_distribution, ranked_items, Capabilities, EvalMode, Lottery,
    Mechanism, Sampler,
};
use crate::error::{Error, Result};
use crate::model::{AssignmentDistribution, Matching, MechanismResult, Method, ValuationProfile};
use crate::perm::{next_permutation, permutations};

/// Most distinct preference orders the exact evaluator accepts.
pub const EXACT_MAX_TYPES: usize = 12;

/// Cap on simultaneously stored states (two levels), roughly 2 GB.
pub const MAX_EXACT_STATES: usize = 25_000_000;

/// Distributions are attached to fast-path results only up to this size.
const FASTPATH_DIST_MAX_N: usize = 512;

#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPriority;

impl Mechanism for RandomPriority {
    fn name(&self) -> String {
        "rp".into()
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
        if p.common_order().is_some() {
            return Ok(AssignmentDistribution::uniform(p.n()));
        }
        p.require_strict()?;
        type_dp(p)
    }

    fn lottery(&self, p: &ValuationProfile) -> Result<Lottery> {
        rp_lottery(p)
    }

    fn sampler<'a>(&'a self, p: &'a ValuationProfile) -> Result<Box<dyn Sampler + 'a>> {
        p.require_strict()?;
        let n = p.n();
        Ok(Box::new(RpSampler {
            ranked: ranked_items(p),
            order: (0..n).collect(),
            taken: vec![false; n],
        }))
    }

    fn exact(&self, p: &ValuationProfile) -> Result<MechanismResult> {
        rp_exact(p)
    }
}

struct RpSampler {
    ranked: Vec<Vec<usize>>,
    order: Vec<usize>,
    taken: Vec<bool>,
}

impl Sampler for RpSampler {
    fn draw(&mut self, rng: &mut ChaCha8Rng, out: &mut [usize]) {
        self.order.shuffle(rng);
        greedy_picks(&self.order, &self.ranked, &mut self.taken, out);
    }
}

/// Exact expected welfare and assignment distribution of random priority.
///
/// Ordered profiles take the `O(n^2)` fast path. Otherwise the profile must be
/// strict and have at most [`EXACT_MAX_TYPES`] distinct preference orders.
pub fn rp_exact(p: &ValuationProfile) -> Result<MechanismResult> {
    if p.common_order().is_some() {
        return rp_ordered_fastpath(p);
    }
    p.require_strict()?;
    Ok(MechanismResult::exact(p, type_dp(p)?))
}

/// Random priority on a profile where every agent has the same preference
/// order: the `l`-th dictator takes the `l`-th best item and each agent is
/// equally likely to hold any position, so the outcome is the uniform
/// assignment.
pub fn rp_ordered_fastpath(p: &ValuationProfile) -> Result<MechanismResult> {
    p.ordered_check()?;
    let n = p.n();
    let per_agent_utility: Vec<f64> = p.rows().map(|r| r.iter().sum::<f64>() / n as f64).collect();
    Ok(MechanismResult {
        expected_welfare: per_agent_utility.iter().sum(),
        per_agent_utility,
        distribution: (n <= FASTPATH_DIST_MAX_N).then(|| AssignmentDistribution::uniform(n)),
        method: Method::Exact,
    })
}

/// Monte-Carlo random priority over `samples` uniformly drawn agent orders.
pub fn rp_montecarlo(p: &ValuationProfile, samples: u64, seed: u64) -> Result<MechanismResult> {
    evaluate(&RandomPriority, p, EvalMode::MonteCarlo { samples, seed })
}

/// Lets agents pick greedily along `order` (a permutation of agents).
pub fn serial_dictatorship(p: &ValuationProfile, order: &[usize]) -> Result<Matching> {
    let n = p.n();
    if order.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: order.len(),
        });
    }
    Matching::new(order.to_vec()).map_err(|_| Error::invalid("agent order must be a permutation of the agents"))?;
    p.require_strict()?;
    let mut out = vec![0; n];
    greedy_picks(order, &ranked_items(p), &mut vec![false; n], &mut out);
    Ok(Matching::new_unchecked(out))
}

/// The lottery over matchings induced by all `n!` agent orders.
pub fn rp_lottery(p: &ValuationProfile) -> Result<Lottery> {
    let n = p.n();
    check_lottery_size(n)?;
    p.require_strict()?;
    let ranked = ranked_items(p);
    let mut taken = vec![false; n];
    let mut out = vec![0; n];
    let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    let mut order: Vec<usize> = (0..n).collect();
    let mut total = 0u64;
    loop {
        greedy_picks(&order, &ranked, &mut taken, &mut out);
        *counts.entry(out.clone()).or_default() += 1;
        total += 1;
        if !next_permutation(&mut order) {
            break;
        }
    }
    Ok(counts
        .into_iter()
        .map(|(m, c)| (Matching::new_unchecked(m), c as f64 / total as f64))
        .collect())
}

/// Agents grouped by identical preference order.
struct Types {
    orders: Vec<Vec<usize>>,
    members: Vec<Vec<usize>>,
}

fn group_types(p: &ValuationProfile) -> Types {
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut orders = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (agent, order) in ranked_items(p).into_iter().enumerate() {
        let t = *index.entry(order.clone()).or_insert_with(|| {
            orders.push(order);
            members.push(Vec::new());
            members.len() - 1
        });
        members[t].push(agent);
    }
    Types { orders, members }
}

/// Fixed-key hashing keeps the iteration order, and so the summation order,
/// identical from run to run.
type Level = HashMap<(u64, u64), f64, BuildHasherDefault<DefaultHasher>>;

fn type_dp(p: &ValuationProfile) -> Result<AssignmentDistribution> {
    let n = p.n();
    if n <= 4 {
        // enumeration beats hashing at tiny sizes
        return Ok(enumerate_orders(p));
    }
    let types = group_types(p);
    let k = types.orders.len();
    if k > EXACT_MAX_TYPES {
        return Err(Error::TooLarge {
            what: "exact random priority (distinct preference orders)",
            n: k,
            max: EXACT_MAX_TYPES,
            hint: "use Monte-Carlo mode",
        });
    }
    if n > 64 {
        return Err(Error::TooLarge {
            what: "exact random priority on non-ordered profiles",
            n,
            max: 64,
            hint: "use Monte-Carlo mode",
        });
    }

    // mixed-radix encoding of the remaining count per type
    let sizes: Vec<u64> = types.members.iter().map(|m| m.len() as u64).collect();
    let mut radix = vec![1u64; k];
    for t in 1..k {
        radix[t] = radix[t - 1] * (sizes[t - 1] + 1);
    }
    let start_code: u64 = (0..k).map(|t| sizes[t] * radix[t]).sum();

    let mut type_dist = vec![0.0; k * n];
    let mut level = Level::default();
    level.insert((start_code, 0u64), 1.0);
    let mut counts = vec![0u64; k];
    for depth in 0..n {
        let remaining = (n - depth) as f64;
        let mut next = Level::with_capacity_and_hasher(level.len() * 2, Default::default());
        for (&(code, taken), &mass) in &level {
            let mut c = code;
            for t in (0..k).rev() {
                counts[t] = c / radix[t];
                c %= radix[t];
            }
            for t in 0..k {
                if counts[t] == 0 {
                    continue;
                }
                let j = *types.orders[t]
                    .iter()
                    .find(|&&j| taken & (1u64 << j) == 0)
                    .expect("an item remains");
                let w = mass * counts[t] as f64 / remaining;
                type_dist[t * n + j] += w;
                *next.entry((code - radix[t], taken | (1u64 << j))).or_insert(0.0) += w;
            }
        }
        if level.len() + next.len() > MAX_EXACT_STATES {
            return Err(Error::BudgetExceeded {
                what: "exact random priority state space",
                count: (level.len() + next.len()) as u128,
                budget: MAX_EXACT_STATES as u128,
            });
        }
        level = next;
    }

    let mut d = AssignmentDistribution::zeros(n);
    for (t, members) in types.members.iter().enumerate() {
        let share = 1.0 / members.len() as f64;
        for &a in members {
            for j in 0..n {
                d.add(a, j, type_dist[t * n + j] * share);
            }
        }
    }
    Ok(d)
}

fn enumerate_orders(p: &ValuationProfile) -> AssignmentDistribution {
    let n = p.n();
    let ranked = ranked_items(p);
    let mut taken = vec![false; n];
    let mut out = vec![0; n];
    let mut d = AssignmentDistribution::zeros(n);
    let orders = permutations(n);
    let w = 1.0 / orders.len() as f64;
    for order in &orders {
        greedy_picks(order, &ranked, &mut taken, &mut out);
        for (a, &j) in out.iter().enumerate() {
            d.add(a, j, w);
        }
    }
    d
}

/// Marginals of [`rp_lottery`]; used by tests as an independent route.
#[allow(dead_code)]
pub(crate) fn rp_distribution_by_enumeration(p: &ValuationProfile) -> Result<AssignmentDistribution> {
    Ok(lottery_distribution(p.n(), &rp_lottery(p)?))
}
