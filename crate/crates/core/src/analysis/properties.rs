//! Randomized checks of symmetry and ordinality, plus support-based checks
//! (optimum in the support, ex-post Pareto efficiency).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BoundCheck;
use crate::error::Result;
use crate::generators::random_unit_range;
use crate::matching::optimal_matching;
use crate::mechanism::{Mechanism, RandomPriority};
use crate::model::{Matching, ValuationProfile};
use crate::perm::factorial;
use crate::tolerance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    Anonymous,
    Neutral,
    Ordinal,
}

impl Property {
    pub fn as_str(self) -> &'static str {
        match self {
            Property::Anonymous => "anonymous",
            Property::Neutral => "neutral",
            Property::Ordinal => "ordinal",
        }
    }
}

/// Applies `x -> x^gamma` to every value of row `i` with its own `gamma`.
/// Keeps 0 and 1 fixed and preserves each row's order.
fn monotone_perturbation(p: &ValuationProfile, gammas: &[f64]) -> ValuationProfile {
    let n = p.n();
    let mut values = p.values().to_vec();
    for (row, &g) in values.chunks_mut(n).zip(gammas) {
        row.iter_mut().for_each(|v| *v = v.powf(g));
    }
    ValuationProfile::from_flat(n, values, p.normalization()).expect("finite values")
}

/// Tests a definitional identity on `trials` random strict unit-range
/// profiles of size `n`.
///
/// `lhs` is the largest entrywise deviation between the two distributions the
/// definition equates; the check holds when it stays within the probability
/// tolerance. The first failing trial is kept as the witness.
pub fn property_check<M: Mechanism + ?Sized>(
    mech: &M,
    property: Property,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<BoundCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut witness = None;
    for trial in 0..trials {
        let p = random_unit_range(n, &mut rng);
        let base = mech.distribution(&p)?;
        let (dev, what) = match property {
            Property::Anonymous => {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                let moved = mech.distribution(&p.permute_agents(&perm))?;
                (moved.max_abs_diff(&base.permute_agents(&perm)), format!("agent permutation {perm:?}"))
            }
            Property::Neutral => {
                let mut sigma: Vec<usize> = (0..n).collect();
                sigma.shuffle(&mut rng);
                let moved = mech.distribution(&p.permute_items(&sigma))?;
                (moved.max_abs_diff(&base.permute_items(&sigma)), format!("item permutation {sigma:?}"))
            }
            Property::Ordinal => {
                let gammas: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..3.0)).collect();
                let moved = mech.distribution(&monotone_perturbation(&p, &gammas))?;
                (moved.max_abs_diff(&base), format!("row exponents {gammas:?}"))
            }
        };
        if dev > worst {
            worst = dev;
        }
        if dev > tolerance::prob(n) && witness.is_none() {
            witness = Some(format!("trial {trial}: profile {:?}, {what}, deviation {dev:e}", p.to_rows()));
        }
    }
    let check = BoundCheck::upper(format!("{}-{}", mech.name(), property.as_str()), n, worst, tolerance::prob(n));
    Ok(match witness {
        Some(w) => check.with_witness(w),
        None => check,
    })
}

/// Largest deviation of the mechanism's distribution from double
/// stochasticity on `p`.
pub fn stochasticity_check<M: Mechanism + ?Sized>(mech: &M, p: &ValuationProfile) -> Result<BoundCheck> {
    let dev = mech.distribution(p)?.stochastic_deviation();
    Ok(BoundCheck::upper(format!("{}-doubly-stochastic", mech.name()), p.n(), dev, tolerance::prob(p.n())))
}

/// Probability that random priority outputs the optimal matching of `p`.
///
/// Random priority's lottery weights are multiples of `1/n!`, so a positive
/// weight is at least `1/n!`; the check compares against half of that.
pub fn optimum_in_support(p: &ValuationProfile) -> Result<BoundCheck> {
    let opt = optimal_matching(p).matching;
    let lottery = RandomPriority.lottery(p)?;
    let weight: f64 = lottery.iter().filter(|(m, _)| *m == opt).map(|(_, w)| w).sum();
    let check = BoundCheck::lower("optimum-in-support", p.n(), weight, 0.5 / factorial(p.n()) as f64);
    Ok(if check.holds {
        check
    } else {
        check.with_witness(format!("profile {:?}, optimum {:?}", p.to_rows(), opt.as_slice()))
    })
}

/// Finds agents who could swap items around a cycle with every participant
/// strictly better off.
fn improving_cycle(p: &ValuationProfile, m: &Matching) -> Option<Vec<usize>> {
    let n = p.n();
    // a -> b when a strictly prefers b's item
    let wants = |a: usize, b: usize| p.value(a, m.item_of(b)) > p.value(a, m.item_of(a));
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; n];
    let mut stack = Vec::new();
    fn dfs(
        a: usize,
        n: usize,
        wants: &dyn Fn(usize, usize) -> bool,
        state: &mut [u8],
        stack: &mut Vec<usize>,
    ) -> Option<Vec<usize>> {
        state[a] = 1;
        stack.push(a);
        for b in 0..n {
            if b == a || !wants(a, b) {
                continue;
            }
            if state[b] == 1 {
                let start = stack.iter().position(|&x| x == b).expect("on stack");
                return Some(stack[start..].to_vec());
            }
            if state[b] == 0 {
                if let Some(c) = dfs(b, n, wants, state, stack) {
                    return Some(c);
                }
            }
        }
        stack.pop();
        state[a] = 2;
        None
    }
    (0..n).find_map(|a| if state[a] == 0 { dfs(a, n, &wants, &mut state, &mut stack) } else { None })
}

/// Counts matchings in the mechanism's support that admit a Pareto-improving
/// trade. Requires a strict profile and `n <= 5`.
pub fn pareto_expost_check<M: Mechanism + ?Sized>(p: &ValuationProfile, mech: &M) -> Result<BoundCheck> {
    const MAX_N: usize = 5;
    let n = p.n();
    if n > MAX_N {
        return Err(crate::Error::TooLarge {
            what: "ex-post Pareto check",
            n,
            max: MAX_N,
            hint: "enumerating the support is limited to small instances",
        });
    }
    p.require_strict()?;
    let mut dominated = 0usize;
    let mut witness = None;
    for (m, w) in mech.lottery(p)? {
        if w <= 0.0 {
            continue;
        }
        if let Some(cycle) = improving_cycle(p, &m) {
            dominated += 1;
            witness.get_or_insert_with(|| {
                format!("matching {:?} (weight {w}) improved by trading around agents {cycle:?}", m.as_slice())
            });
        }
    }
    let check = BoundCheck::upper(format!("{}-ex-post-pareto", mech.name()), n, dominated as f64, 0.0);
    Ok(match witness {
        Some(w) => check.with_witness(w),
        None => check,
    })
}
