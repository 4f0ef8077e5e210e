//! Finite-`n` instances of the welfare bounds, one [`BoundCheck`] per
//! inequality.

use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BoundCheck;
use crate::error::{Error, Result};
use crate::generators::{
    default_k, gen_lemma5, gen_lemma6, gen_lemma8, gen_lemma9, gen_quasicombinatorial, lemma6_misreport_profile,
    random_unit_sum,
};
use crate::matching::optimal_welfare;
use crate::mechanism::{
    evaluate, rp_exact, rp_montecarlo, rp_ordered_fastpath, uniform_mechanism, EvalMode, RandomPriority,
    EXACT_MAX_TYPES,
};
use crate::model::{MechanismResult, Normalization, ValuationProfile};
use crate::tolerance;
use crate::transforms::zeroone_to_unitrange;

/// Per-agent floor tolerance for the unit-sum guarantee.
const FLOOR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Lemma4,
    Lemma5,
    Lemma6,
    Lemma7floor,
    Lemma8,
    Lemma9,
    Corollary1,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Lemma4,
        Suite::Lemma5,
        Suite::Lemma6,
        Suite::Lemma7floor,
        Suite::Lemma8,
        Suite::Lemma9,
        Suite::Corollary1,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Lemma4 => "lemma4",
            Suite::Lemma5 => "lemma5",
            Suite::Lemma6 => "lemma6",
            Suite::Lemma7floor => "lemma7floor",
            Suite::Lemma8 => "lemma8",
            Suite::Lemma9 => "lemma9",
            Suite::Corollary1 => "corollary1",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown suite `{s}`")))
    }
}

/// Runs `suite` at every size in `sizes`.
///
/// `seed` drives every random choice; `samples` is used wherever exact
/// evaluation is out of reach.
pub fn run_suite(suite: Suite, sizes: &[usize], seed: u64, samples: u64) -> Result<Vec<BoundCheck>> {
    let mut out = Vec::new();
    for &n in sizes {
        match suite {
            Suite::Lemma4 => {
                let k = (n as f64).sqrt().ceil() as usize;
                let eps = 1.0 / (n as f64).powi(3);
                let seeds: Vec<u64> = (0..10).map(|s| seed.wrapping_add(s)).collect();
                out.extend(verify_lemma4_bound(n, eps, k, &seeds, samples)?);
            }
            Suite::Lemma5 => out.push(lemma5_checks(n)?.pop().expect("ratio check is last")),
            Suite::Lemma6 => out.extend(verify_lemma6_misreport_bound(n, default_k(n))?),
            Suite::Lemma7floor => out.push(verify_unit_sum_floor(n, 1000, seed)?),
            Suite::Lemma8 => out.push(lemma8_check(n, seed, samples)?),
            Suite::Lemma9 => out.extend(lemma9_misreport_checks(n, default_k(n))?),
            Suite::Corollary1 => out.extend(corollary1_checks(n, 200, seed)?),
        }
    }
    Ok(out)
}

/// Random priority on the ordered profile: its welfare against the uniform
/// closed form, the absolute bound 5, and the ratio bound `20/sqrt(n)`.
pub fn lemma5_checks(n: usize) -> Result<Vec<BoundCheck>> {
    let p = gen_lemma5(n)?;
    let rp = rp_ordered_fastpath(&p)?.expected_welfare;
    let uniform = uniform_mechanism(&p).expected_welfare;
    let opt = optimal_welfare(&p);
    Ok(vec![
        BoundCheck::upper("lemma5-rp-equals-uniform", n, (rp - uniform).abs(), 0.0).with_tolerance(tolerance::prob(n)),
        BoundCheck::upper("lemma5-welfare", n, rp, 5.0),
        BoundCheck::upper("lemma5-ratio", n, rp / opt, 20.0 / (n as f64).sqrt()),
    ])
}

/// Random priority's ratio on the ordered profile, multiplied by `sqrt(n)`.
pub fn lemma5_scaled_ratio(n: usize) -> Result<f64> {
    let p = gen_lemma5(n)?;
    Ok(rp_ordered_fastpath(&p)?.expected_welfare / optimal_welfare(&p) * (n as f64).sqrt())
}

fn rp_result(p: &ValuationProfile, seed: u64, samples: u64) -> Result<MechanismResult> {
    match rp_exact(p) {
        Err(Error::TooLarge { .. }) | Err(Error::BudgetExceeded { .. }) => rp_montecarlo(p, samples, seed),
        other => other,
    }
}

/// Lower bound `(k - 11)/(8n) - n*eps/(2k)` on random priority's ratio over
/// quasi-combinatorial profiles, one check per seed.
///
/// Exact evaluation is used when the profile has at most
/// [`EXACT_MAX_TYPES`] agents; otherwise Monte Carlo with `samples` draws,
/// and the confidence radius is subtracted from the welfare first.
pub fn verify_lemma4_bound(n: usize, eps: f64, k: usize, seeds: &[u64], samples: u64) -> Result<Vec<BoundCheck>> {
    let nf = n as f64;
    if eps > 1.0 / nf.powi(3) {
        return Err(Error::invalid(format!("need eps <= 1/n^3 = {:e}, got {eps:e}", 1.0 / nf.powi(3))));
    }
    if (k * k) < n {
        return Err(Error::invalid(format!("need k >= sqrt(n) (got n={n}, k={k})")));
    }
    let kf = k as f64;
    let rhs = (kf - 11.0) / (8.0 * nf) - nf * eps / (2.0 * kf);
    seeds
        .iter()
        .map(|&seed| {
            let p = gen_quasicombinatorial(n, eps, k, seed)?;
            let mode = if n <= EXACT_MAX_TYPES {
                EvalMode::Exact
            } else {
                EvalMode::MonteCarlo { samples, seed }
            };
            let r = evaluate(&RandomPriority, &p, mode)?;
            let lhs = (r.expected_welfare - r.method.ci_radius()) / optimal_welfare(&p);
            Ok(BoundCheck::lower("lemma4", n, lhs, rhs).with_witness(format!("seed {seed}")))
        })
        .collect()
}

/// Every agent's exact random-priority utility on `trials` random unit-sum
/// profiles stays above `1/n`. `lhs` is the smallest utility observed.
pub fn verify_unit_sum_floor(n: usize, trials: usize, seed: u64) -> Result<BoundCheck> {
    const MAX_N: usize = 7;
    if n > MAX_N || n == 0 {
        return Err(Error::TooLarge {
            what: "unit-sum floor check",
            n,
            max: MAX_N,
            hint: "exact random priority is used for every trial",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let p = random_unit_sum(n, &mut rng);
        let r = rp_exact(&p)?;
        worst = r.per_agent_utility.iter().copied().fold(worst, f64::min);
    }
    Ok(BoundCheck::lower("lemma7floor", n, worst, 1.0 / n as f64).with_tolerance(FLOOR_TOL))
}

/// For each agent `i` in `2..=k+1` (1-based): random priority on the
/// misreport profile `u^i` gives agent `i` at most `4/(n-k+1)` in terms of
/// its reported row, and at most the uniform lottery over the `n-k+1` agents
/// sharing that row. On the truthful profile, agent `i`'s probability of its
/// own item stays below `4kn/((n-k)(2n-(k+1)^2))` when that is positive.
pub fn verify_lemma6_misreport_bound(n: usize, k: usize) -> Result<Vec<BoundCheck>> {
    let u = gen_lemma6(n, k)?;
    let truthful = rp_exact(&u)?.distribution.expect("exact result carries a distribution");
    let (nf, kf) = (n as f64, k as f64);
    let share = (n - k + 1) as f64;
    let p_denom = (nf - kf) * (2.0 * nf - (kf + 1.0).powi(2));
    let mut out = Vec::new();
    for agent in 1..=k {
        let ui = lemma6_misreport_profile(n, k, agent)?;
        let reported = ui.row(agent);
        let e = rp_exact(&ui)?.per_agent_utility[agent];
        let uniform: f64 = reported.iter().sum::<f64>() / share;
        let label = format!("agent {}", agent + 1);
        out.push(
            BoundCheck::upper("lemma6-misreport", n, e, 4.0 / share)
                .with_tolerance(tolerance::prob(n))
                .with_witness(label.clone()),
        );
        out.push(
            BoundCheck::upper("lemma6-uniform-share", n, e, uniform)
                .with_tolerance(tolerance::prob(n))
                .with_witness(label.clone()),
        );
        if p_denom > 0.0 {
            let p_i = truthful.get(agent, agent);
            out.push(
                BoundCheck::upper("lemma6-own-item", n, p_i, 4.0 * kf * nf / p_denom)
                    .with_tolerance(tolerance::prob(n))
                    .with_witness(label),
            );
        }
    }
    Ok(out)
}

/// The unit-sum version: an agent copying the shared row receives at most a
/// uniform share among the `n-k+1` agents reporting it, worth `1/(n-k+1)`.
pub fn lemma9_misreport_checks(n: usize, k: usize) -> Result<Vec<BoundCheck>> {
    let u = gen_lemma9(n, k)?;
    let shared = u.row(k + 1).to_vec();
    let bound = 1.0 / (n - k + 1) as f64;
    (1..=k)
        .map(|agent| {
            let ui = u.with_row(agent, &shared)?;
            let e = rp_exact(&ui)?.per_agent_utility[agent];
            Ok(BoundCheck::upper("lemma9-misreport", n, e, bound)
                .with_tolerance(tolerance::prob(n))
                .with_witness(format!("agent {}", agent + 1)))
        })
        .collect()
}

/// Random priority's ratio on the grouped unit-sum profile stays below
/// `8/sqrt(n)`. Monte Carlo (with the confidence radius added) is used when
/// exact evaluation is out of reach.
pub fn lemma8_check(n: usize, seed: u64, samples: u64) -> Result<BoundCheck> {
    let p = gen_lemma8(n)?;
    let r = rp_result(&p, seed, samples)?;
    let lhs = (r.expected_welfare + r.method.ci_radius()) / optimal_welfare(&p);
    Ok(BoundCheck::upper("lemma8-ratio", n, lhs, 8.0 / (n as f64).sqrt()))
}

/// Zeroing least-preferred values on random `[0, 1]` profiles lowers the
/// optimum by at most 1 and never raises random priority's welfare.
pub fn corollary1_checks(n: usize, trials: usize, seed: u64) -> Result<Vec<BoundCheck>> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut opt_drop: f64 = 0.0;
    let mut rp_gain = f64::NEG_INFINITY;
    for _ in 0..trials {
        let top: usize = rng.gen_range(0..n);
        let p = ValuationProfile::from_fn(n, Normalization::ZeroOne, |_, j| if j == top { 1.0 } else { rng.gen() })?;
        let q = zeroone_to_unitrange(&p)?;
        opt_drop = opt_drop.max(optimal_welfare(&p) - optimal_welfare(&q));
        let before = rp_result(&p, seed, 100_000)?;
        let after = rp_result(&q, seed, 100_000)?;
        rp_gain = rp_gain.max(after.expected_welfare - before.expected_welfare);
    }
    Ok(vec![
        BoundCheck::upper("corollary1-opt-drop", n, opt_drop, 1.0).with_tolerance(tolerance::prob(n)),
        BoundCheck::upper("corollary1-rp-monotone", n, rp_gain, 0.0).with_tolerance(tolerance::prob(n)),
    ])
}
