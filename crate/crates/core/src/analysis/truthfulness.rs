//! Exhaustive and grid searches for profitable misreports.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{cubic_lottery, Mechanism};
use crate::model::{AssignmentDistribution, Normalization, ValuationProfile};
use crate::perm::permutations;
use crate::tolerance;

/// Default cap on the number of (profile, agent, misreport) triples.
pub const DEFAULT_TRUTH_BUDGET: u128 = 20_000_000;

const ORDINAL_MAX_N: usize = 4;
const CARDINAL_MAX_N: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SearchMode {
    ExhaustiveOrdinal,
    GridCardinal { resolution: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// True profile, one row per agent.
    pub profile: Vec<Vec<f64>>,
    /// 0-based agent index.
    pub agent: usize,
    pub misreport: Vec<f64>,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthfulnessReport {
    pub max_regret: f64,
    pub witness: Option<Witness>,
    pub search_mode: SearchMode,
    pub profiles: usize,
    pub misreports: usize,
}

impl TruthfulnessReport {
    fn new(search_mode: SearchMode) -> Self {
        TruthfulnessReport {
            max_regret: 0.0,
            witness: None,
            search_mode,
            profiles: 0,
            misreports: 0,
        }
    }

    fn offer(&mut self, gain: f64, make_witness: impl FnOnce() -> Witness) {
        if gain > self.max_regret {
            self.max_regret = gain;
            if gain > tolerance::TRUTH {
                self.witness = Some(make_witness());
            }
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.profiles += other.profiles;
        self.misreports += other.misreports;
        if other.max_regret > self.max_regret {
            self.max_regret = other.max_regret;
            self.witness = other.witness;
        }
        self
    }

    pub fn is_truthful(&self) -> bool {
        self.max_regret <= tolerance::TRUTH
    }
}

/// Expected-utility gain of agent `agent` (true row `truth`) when the
/// outcome moves from `honest` to `lie`.
fn gain(truth: &[f64], agent: usize, honest: &AssignmentDistribution, lie: &AssignmentDistribution) -> f64 {
    truth
        .iter()
        .enumerate()
        .map(|(j, v)| (lie.get(agent, j) - honest.get(agent, j)) * v)
        .sum()
}

/// Unit-range row with `order[0]` valued 1, `order[n-1]` valued 0 and the
/// middle items valued `middle` (decreasing).
fn unit_range_row(order: &[usize], middle: &[f64]) -> Vec<f64> {
    let n = order.len();
    let mut row = vec![0.0; n];
    row[order[0]] = 1.0;
    for (t, &v) in middle.iter().enumerate() {
        row[order[1 + t]] = v;
    }
    if n > 1 {
        row[order[n - 1]] = 0.0;
    }
    row
}

/// Decreasing `size`-subsets of `grid`.
fn decreasing_subsets(grid: &[f64], size: usize) -> Vec<Vec<f64>> {
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.dedup();
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(size);
    fn rec(sorted: &[f64], size: usize, start: usize, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..sorted.len() {
            cur.push(sorted[i]);
            rec(sorted, size, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(&sorted, size, 0, &mut cur, &mut out);
    out
}

/// Exhaustive misreport search for an ordinal mechanism.
///
/// Every agent's true row is a unit-range row whose middle values come from
/// `middle_grid`; all `T^n` such profiles are checked, and for each agent all
/// `n!` reported preference orders (keeping the true middle values, which is
/// enough for an ordinal mechanism). At most `budget` triples are examined.
pub fn truthfulness_check_ordinal<M: Mechanism + ?Sized>(
    mech: &M,
    n: usize,
    middle_grid: &[f64],
    budget: u128,
) -> Result<TruthfulnessReport> {
    if !mech.capabilities().ordinal {
        return Err(Error::Capability {
            mechanism: mech.name(),
            capability: "ordinal",
        });
    }
    if !(2..=ORDINAL_MAX_N).contains(&n) {
        return Err(Error::TooLarge {
            what: "exhaustive ordinal truthfulness search",
            n,
            max: ORDINAL_MAX_N,
            hint: "n must be between 2 and 4",
        });
    }
    if middle_grid.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
        return Err(Error::invalid("middle values must lie strictly between 0 and 1"));
    }
    let orders = permutations(n);
    let combos = decreasing_subsets(middle_grid, n - 2);
    if combos.is_empty() {
        return Err(Error::invalid(format!("need at least {} distinct middle values", n - 2)));
    }
    let types: Vec<Vec<f64>> = combos
        .iter()
        .flat_map(|c| orders.iter().map(move |o| unit_range_row(o, c)))
        .collect();
    let t = types.len();
    let per_combo = orders.len();
    let profiles = (t as u128).pow(n as u32);
    let work = profiles * n as u128 * per_combo as u128;
    if work > budget {
        return Err(Error::BudgetExceeded {
            what: "ordinal truthfulness search (profile, agent, misreport) triples",
            count: work,
            budget,
        });
    }
    let profiles = profiles as usize;

    let digits = |mut idx: usize| -> Vec<usize> {
        let mut d = vec![0; n];
        for slot in d.iter_mut() {
            *slot = idx % t;
            idx /= t;
        }
        d
    };
    let build = |d: &[usize]| -> ValuationProfile {
        let rows = d.iter().map(|&k| types[k].clone()).collect();
        ValuationProfile::from_rows(rows, Normalization::UnitRange).expect("well-formed rows")
    };

    let dists: Vec<AssignmentDistribution> = (0..profiles)
        .into_par_iter()
        .map(|idx| mech.distribution(&build(&digits(idx))))
        .collect::<Result<_>>()?;

    let report = (0..profiles)
        .into_par_iter()
        .map(|idx| {
            let mut rep = TruthfulnessReport::new(SearchMode::ExhaustiveOrdinal);
            rep.profiles = 1;
            let d = digits(idx);
            let honest = &dists[idx];
            let mut pow = 1;
            for a in 0..n {
                let true_type = d[a];
                let combo = true_type / per_combo;
                for o in 0..per_combo {
                    let lie_type = combo * per_combo + o;
                    if lie_type == true_type {
                        continue;
                    }
                    rep.misreports += 1;
                    let lie_idx = idx - true_type * pow + lie_type * pow;
                    let g = gain(&types[true_type], a, honest, &dists[lie_idx]);
                    rep.offer(g, || Witness {
                        profile: build(&d).to_rows(),
                        agent: a,
                        misreport: types[lie_type].clone(),
                        gain: g,
                    });
                }
                pow *= t;
            }
            rep
        })
        .reduce(|| TruthfulnessReport::new(SearchMode::ExhaustiveOrdinal), TruthfulnessReport::merge);
    Ok(report)
}

/// Interior grid `{r, 2r, ...}` strictly inside `(0, 1)`.
fn interior_grid(resolution: f64) -> Vec<f64> {
    let steps = (1.0 / resolution).round() as usize;
    (1..steps).map(|k| k as f64 / steps as f64).collect()
}

/// Grid search over cardinal misreports for `n <= 3`.
///
/// Each agent of each listed profile may report any unit-range row: any
/// preference order and, for `n = 3`, any middle value on the interior grid of
/// the given resolution.
pub fn truthfulness_check_cardinal<M: Mechanism + ?Sized>(
    mech: &M,
    profiles: &[ValuationProfile],
    resolution: f64,
) -> Result<TruthfulnessReport> {
    if !(resolution > 0.0 && resolution <= 0.5) {
        return Err(Error::invalid(format!("resolution must lie in (0, 0.5], got {resolution}")));
    }
    let mode = SearchMode::GridCardinal { resolution };
    let grid = interior_grid(resolution);
    let mut report = TruthfulnessReport::new(mode);
    for p in profiles {
        let n = p.n();
        if !(2..=CARDINAL_MAX_N).contains(&n) {
            return Err(Error::TooLarge {
                what: "cardinal truthfulness search",
                n,
                max: CARDINAL_MAX_N,
                hint: "profiles must have 2 or 3 agents",
            });
        }
        let lies: Vec<Vec<f64>> = if n == 2 {
            vec![vec![1.0, 0.0], vec![0.0, 1.0]]
        } else {
            permutations(3)
                .iter()
                .flat_map(|o| grid.iter().map(move |&a| unit_range_row(o, &[a])))
                .collect()
        };
        let honest = mech.distribution(p)?;
        let part = (0..n)
            .into_par_iter()
            .flat_map(|a| lies.par_iter().map(move |lie| (a, lie)))
            .map(|(a, lie)| -> Result<TruthfulnessReport> {
                let mut rep = TruthfulnessReport::new(mode);
                rep.misreports = 1;
                if lie.as_slice() == p.row(a) {
                    return Ok(rep);
                }
                let q = p.with_row(a, lie)?;
                let g = gain(p.row(a), a, &honest, &mech.distribution(&q)?);
                rep.offer(g, || Witness {
                    profile: p.to_rows(),
                    agent: a,
                    misreport: lie.clone(),
                    gain: g,
                });
                Ok(rep)
            })
            .try_reduce(|| TruthfulnessReport::new(mode), |x, y| Ok(x.merge(y)))?;
        report = report.merge(part);
        report.profiles += 1;
    }
    Ok(report)
}

/// Largest gain a single agent obtains from misreporting to the cubic lottery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LotteryRegret {
    pub max_regret: f64,
    pub alpha: f64,
    pub misreport: f64,
}

/// Sweeps true `alpha` and reported `alpha'` over grids on `[0, 1]`
/// (endpoints included). The agent's utilities are `(1, alpha, 0)`.
pub fn cubic_lottery_regret(alpha_step: f64, misreport_step: f64) -> Result<LotteryRegret> {
    let grid = |step: f64| -> Result<Vec<f64>> {
        if !(step > 0.0 && step <= 1.0) {
            return Err(Error::invalid(format!("grid step must lie in (0, 1], got {step}")));
        }
        let k = (1.0 / step).round() as usize;
        Ok((0..=k).map(|i| i as f64 / k as f64).collect())
    };
    let utility = |alpha: f64, report: f64| -> Result<f64> {
        let (top, mid, _) = cubic_lottery(report)?;
        Ok(top + alpha * mid)
    };
    let mut best = LotteryRegret {
        max_regret: 0.0,
        alpha: 0.0,
        misreport: 0.0,
    };
    for alpha in grid(alpha_step)? {
        let honest = utility(alpha, alpha)?;
        for report in grid(misreport_step)? {
            let g = utility(alpha, report)? - honest;
            if g > best.max_regret {
                best = LotteryRegret {
                    max_regret: g,
                    alpha,
                    misreport: report,
                };
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::random_unit_range;
    use crate::mechanism::{
        HybridMechanism, OptimalMatchingMechanism, RandomPriority, Sampler, UniformMechanism,
    };
    use crate::mechanism::{Capabilities, Lottery};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_priority_is_truthful_at_three() {
        let r = truthfulness_check_ordinal(&RandomPriority, 3, &[0.25, 0.5, 0.75], DEFAULT_TRUTH_BUDGET).unwrap();
        assert!(r.max_regret <= 1e-12, "{r:?}");
        assert!(r.witness.is_none());
        assert_eq!(r.profiles, 18usize.pow(3));
        assert_eq!(r.misreports, 18usize.pow(3) * 3 * 5);
    }

    #[test]
    fn uniform_has_zero_regret() {
        for n in [2, 3] {
            let r = truthfulness_check_ordinal(&UniformMechanism, n, &[0.3, 0.6], DEFAULT_TRUTH_BUDGET).unwrap();
            assert_eq!(r.max_regret, 0.0);
        }
    }

    #[test]
    fn ordinal_search_guards() {
        assert!(matches!(
            truthfulness_check_ordinal(&HybridMechanism, 3, &[0.5], DEFAULT_TRUTH_BUDGET),
            Err(Error::Capability { .. })
        ));
        assert!(matches!(
            truthfulness_check_ordinal(&RandomPriority, 4, &[0.2, 0.4, 0.6, 0.8], 1000),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(truthfulness_check_ordinal(&RandomPriority, 5, &[0.5], DEFAULT_TRUTH_BUDGET).is_err());
        assert!(truthfulness_check_ordinal(&RandomPriority, 3, &[1.0], DEFAULT_TRUTH_BUDGET).is_err());
    }

    #[test]
    fn optimal_matching_mechanism_is_manipulable() {
        // agent 1 loses the contested item to the efficient assignment unless
        // it hides how much it likes the other item
        let p = ValuationProfile::from_rows(vec![vec![1.0, 0.9], vec![1.0, 0.0]], Normalization::ZeroOne).unwrap();
        let r = truthfulness_check_cardinal(&OptimalMatchingMechanism, &[p], 0.01).unwrap();
        let w = r.witness.expect("a profitable lie exists");
        assert_eq!(w.agent, 0);
        assert_eq!(w.misreport, vec![1.0, 0.0]);
        assert!((r.max_regret - 0.1).abs() < 1e-12);
    }

    #[test]
    fn hybrid_mechanism_grid_truthfulness() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let profiles: Vec<_> = (0..3).map(|_| random_unit_range(3, &mut rng)).collect();
        let r = truthfulness_check_cardinal(&HybridMechanism, &profiles, 0.05).unwrap();
        assert!(r.max_regret <= tolerance::TRUTH, "{r:?}");
        assert_eq!(r.profiles, 3);
    }

    #[test]
    fn constant_mechanism_has_no_regret() {
        struct Constant;
        impl Mechanism for Constant {
            fn name(&self) -> String {
                "constant".into()
            }
            fn capabilities(&self) -> Capabilities {
                Capabilities {
                    supports_exact: true,
                    ordinal: true,
                    anonymous: false,
                    neutral: false,
                }
            }
            fn distribution(&self, p: &ValuationProfile) -> Result<AssignmentDistribution> {
                let mut d = AssignmentDistribution::zeros(p.n());
                d.add_matching(&crate::model::Matching::identity(p.n()), 0.5);
                d.add_matching(&crate::model::Matching::new((0..p.n()).rev().collect())?, 0.5);
                Ok(d)
            }
            fn lottery(&self, _: &ValuationProfile) -> Result<Lottery> {
                unimplemented!()
            }
            fn sampler<'a>(&'a self, _: &'a ValuationProfile) -> Result<Box<dyn Sampler + 'a>> {
                unimplemented!()
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = truthfulness_check_cardinal(&Constant, &[random_unit_range(3, &mut rng)], 0.1).unwrap();
        assert_eq!(r.max_regret, 0.0);
    }

    #[test]
    fn cubic_lottery_is_truthful_for_one_agent() {
        let r = cubic_lottery_regret(0.01, 0.01).unwrap();
        assert!(r.max_regret <= tolerance::TRUTH, "{r:?}");
        // closed form: the misreport utility has derivative
        // (-6 a'^2 + 6 a a') / 8, so on a grid containing a its argmax is a
        for k in 0..=100 {
            let a = k as f64 / 100.0;
            let u = |r: f64| (6.0 - 2.0 * r * r * r) / 8.0 + a * (1.0 + 3.0 * r * r) / 8.0;
            let best = (0..=100).map(|i| i as f64 / 100.0).max_by(|x, y| u(*x).total_cmp(&u(*y))).unwrap();
            assert!((u(best) - u(a)).abs() < 1e-15);
        }
        // a fixed true alpha against a finer misreport grid
        let alpha = 0.3;
        let honest = cubic_lottery(alpha).unwrap();
        for k in 0..=1000 {
            let lie = cubic_lottery(k as f64 / 1000.0).unwrap();
            assert!(lie.0 + alpha * lie.1 <= honest.0 + alpha * honest.1 + 1e-15);
        }
    }

    #[test]
    fn subsets_are_decreasing() {
        assert_eq!(decreasing_subsets(&[0.25, 0.75, 0.5], 2), vec![vec![0.75, 0.5], vec![0.75, 0.25], vec![0.5, 0.25]]);
        assert_eq!(decreasing_subsets(&[0.5], 0), vec![Vec::<f64>::new()]);
        assert_eq!(interior_grid(0.25), vec![0.25, 0.5, 0.75]);
    }
}
