//! Profile and mechanism transforms.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matching::optimal_matching;
use crate::mechanism::{Capabilities, Lottery, Mechanism, Sampler};
use crate::model::{social_welfare, AssignmentDistribution, Matching, Normalization, ValuationProfile};
use crate::perm::{factorial, permutations};
use crate::tolerance;

/// Largest `n` for which [`Anonymized`] averages over every agent permutation.
pub const ANONYMIZE_EXACT_MAX_N: usize = 6;

/// Runs the base mechanism on a uniformly random relabelling of the agents.
#[derive(Debug, Clone)]
pub struct Anonymized<M> {
    base: M,
}

pub fn anonymize<M: Mechanism>(base: M) -> Anonymized<M> {
    Anonymized { base }
}

impl<M> Anonymized<M> {
    pub fn base(&self) -> &M {
        &self.base
    }
}

impl<M: Mechanism> Mechanism for Anonymized<M> {
    fn name(&self) -> String {
        format!("anonymized({})", self.base.name())
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            anonymous: true,
            ..self.base.capabilities()
        }
    }

    fn distribution(&self, p: &ValuationProfile) -> Result<AssignmentDistribution> {
        let n = p.n();
        if n > ANONYMIZE_EXACT_MAX_N {
            return Err(Error::TooLarge {
                what: "exact anonymization",
                n,
                max: ANONYMIZE_EXACT_MAX_N,
                hint: "use Monte-Carlo mode",
            });
        }
        let mut d = AssignmentDistribution::zeros(n);
        let w = 1.0 / factorial(n) as f64;
        for perm in permutations(n) {
            // row k of the relabelled profile belongs to agent perm[k]
            let base = self.base.distribution(&p.permute_agents(&perm))?;
            for (k, &agent) in perm.iter().enumerate() {
                for j in 0..n {
                    d.add(agent, j, w * base.get(k, j));
                }
            }
        }
        Ok(d)
    }

    fn lottery(&self, p: &ValuationProfile) -> Result<Lottery> {
        let n = p.n();
        if n > ANONYMIZE_EXACT_MAX_N {
            return Err(Error::TooLarge {
                what: "exact anonymization",
                n,
                max: ANONYMIZE_EXACT_MAX_N,
                hint: "use Monte-Carlo mode",
            });
        }
        let mut acc: std::collections::BTreeMap<Vec<usize>, f64> = Default::default();
        let w = 1.0 / factorial(n) as f64;
        for perm in permutations(n) {
            for (m, q) in self.base.lottery(&p.permute_agents(&perm))? {
                let mut assignment = vec![0; n];
                for (k, &agent) in perm.iter().enumerate() {
                    assignment[agent] = m.item_of(k);
                }
                *acc.entry(assignment).or_default() += w * q;
            }
        }
        Ok(acc.into_iter().map(|(m, q)| (Matching::new_unchecked(m), q)).collect())
    }

    fn sampler<'a>(&'a self, p: &'a ValuationProfile) -> Result<Box<dyn Sampler + 'a>> {
        drop(self.base.sampler(p)?);
        Ok(Box::new(AnonymizedSampler {
            base: &self.base,
            p,
            perm: (0..p.n()).collect(),
            buf: vec![0; p.n()],
        }))
    }
}

struct AnonymizedSampler<'a, M> {
    base: &'a M,
    p: &'a ValuationProfile,
    perm: Vec<usize>,
    buf: Vec<usize>,
}

impl<M: Mechanism> Sampler for AnonymizedSampler<'_, M> {
    fn draw(&mut self, rng: &mut ChaCha8Rng, out: &mut [usize]) {
        self.perm.shuffle(rng);
        let q = self.p.permute_agents(&self.perm);
        let mut s = self.base.sampler(&q).expect("base sampler accepted the unpermuted profile");
        s.draw(rng, &mut self.buf);
        for (k, &agent) in self.perm.iter().enumerate() {
            out[agent] = self.buf[k];
        }
    }
}

/// Outcome of [`quasicombinatorial_reduce`].
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub profile: ValuationProfile,
    /// The matching `g` is measured against, fixed from the input profile.
    pub reference: Matching,
    /// `g` before the first step and after each step.
    pub ratios: Vec<f64>,
}

/// Ratio of expected welfare to the welfare of a fixed reference matching.
fn reference_ratio<M: Mechanism + ?Sized>(mech: &M, p: &ValuationProfile, reference: &Matching) -> Result<f64> {
    let denom = social_welfare(p, reference)?;
    if denom <= 0.0 {
        return Err(Error::ZeroOptimum);
    }
    Ok(mech.exact(p)?.expected_welfare / denom)
}

/// Pushes every value in `[eps, 1 - eps]` into one of the two outer bands
/// without increasing the welfare ratio under `evaluator`.
///
/// Each step picks the first row with middle values and shifts all of them by
/// a common `x` to whichever end of the admissible interval gives the smaller
/// ratio. The ratio is taken against the input's optimal matching, held fixed.
pub fn quasicombinatorial_reduce<M: Mechanism + ?Sized>(
    p: &ValuationProfile,
    eps: f64,
    evaluator: &M,
) -> Result<Reduction> {
    let class = crate::generators::QuasiCombinatorialClass::new(eps)?;
    let caps = evaluator.capabilities();
    for (ok, what) in [
        (caps.ordinal, "ordinal"),
        (caps.anonymous, "anonymous"),
        (caps.neutral, "neutral"),
        (caps.supports_exact, "exact evaluation"),
    ] {
        if !ok {
            return Err(Error::Capability {
                mechanism: evaluator.name(),
                capability: what,
            });
        }
    }
    if p.normalization() != Normalization::UnitRange {
        return Err(Error::invalid("quasi-combinatorial reduction needs a unit-range profile"));
    }
    p.require_valid()?;
    p.require_strict()?;

    let reference = optimal_matching(p).matching;
    let mut cur = p.clone();
    let mut g = reference_ratio(evaluator, &cur, &reference)?;
    let mut ratios = vec![g];
    let budget = class.middle_count(p);
    let is_middle = |v: f64| !class.contains_value(v);

    while let Some(i) = (0..cur.n()).find(|&i| cur.row(i).iter().any(|&v| is_middle(v))) {
        if ratios.len() > budget {
            return Err(Error::Refused(format!(
                "reduction did not terminate within {budget} steps"
            )));
        }
        let row = cur.row(i).to_vec();
        let middle = row.iter().copied().filter(|&v| is_middle(v));
        let l = middle.clone().fold(f64::INFINITY, f64::min);
        let r = middle.fold(f64::NEG_INFINITY, f64::max);
        let l_bar = row.iter().copied().filter(|&v| v < eps).fold(f64::NEG_INFINITY, f64::max);
        let r_bar = row.iter().copied().filter(|&v| v > 1.0 - eps).fold(f64::INFINITY, f64::min);
        let l_tilde = (l_bar + eps) / 2.0;
        let r_tilde = (r_bar + 1.0 - eps) / 2.0;

        let shifted = |x: f64, pin: f64, pinned: f64| -> Result<ValuationProfile> {
            let new_row: Vec<f64> = row
                .iter()
                .map(|&v| {
                    if v == pinned {
                        pin
                    } else if is_middle(v) {
                        v + x
                    } else {
                        v
                    }
                })
                .collect();
            cur.with_row(i, &new_row)
        };
        // the extreme middle value lands exactly on the target
        let down = shifted(l_tilde - l, l_tilde, l)?;
        let up = shifted(r_tilde - r, r_tilde, r)?;
        let g_down = reference_ratio(evaluator, &down, &reference)?;
        let g_up = reference_ratio(evaluator, &up, &reference)?;
        let (next, g_next) = if g_down <= g_up { (down, g_down) } else { (up, g_up) };
        if g_next > g + tolerance::REDUCE {
            return Err(Error::Refused(format!(
                "ratio increased from {g} to {g_next} at row {}; the evaluator does not behave ordinally here",
                i + 1
            )));
        }
        cur = next;
        g = g_next;
        ratios.push(g);
    }
    Ok(Reduction {
        profile: cur,
        reference,
        ratios,
    })
}

/// Sets each agent's value for its least-preferred item to 0. The
/// normalization tag is kept. Single-item profiles are returned unchanged.
pub fn zero_least_preferred(p: &ValuationProfile) -> ValuationProfile {
    let n = p.n();
    if n < 2 {
        return p.clone();
    }
    let mut values = p.values().to_vec();
    for row in values.chunks_mut(n) {
        let min = row.iter().copied().fold(f64::INFINITY, f64::min);
        if let Some(v) = row.iter_mut().find(|v| **v == min) {
            *v = 0.0;
        }
    }
    ValuationProfile::from_flat(n, values, p.normalization())
        .expect("same shape, finite values")
        .with_ties_allowed(p.ties_allowed())
}

/// Embeds a unit-sum profile into a unit-range profile with one extra agent
/// and one extra item.
///
/// Every original agent's least-preferred value is zeroed, every original
/// agent values the new item at 1, and the new agent values item `j` at
/// `(j - 1) / n^5` and the new item at 1.
pub fn unitsum_to_unitrange_embed(p: &ValuationProfile) -> Result<ValuationProfile> {
    if p.normalization() != Normalization::UnitSum {
        return Err(Error::invalid("embedding expects a unit-sum profile"));
    }
    let n = p.n();
    let u1 = zero_least_preferred(p);
    let n5 = (n as f64).powi(5);
    let mut rows: Vec<Vec<f64>> = u1
        .rows()
        .map(|r| {
            let mut row = r.to_vec();
            row.push(1.0);
            row
        })
        .collect();
    let mut last: Vec<f64> = (1..=n).map(|j| (j - 1) as f64 / n5).collect();
    last.push(1.0);
    rows.push(last);
    Ok(ValuationProfile::from_rows(rows, Normalization::UnitRange)?.with_ties_allowed(p.ties_allowed()))
}

/// Turns a `[0, 1]` profile into a unit-range one by zeroing each agent's
/// least-preferred value.
pub fn zeroone_to_unitrange(p: &ValuationProfile) -> Result<ValuationProfile> {
    if p.normalization() != Normalization::ZeroOne {
        return Err(Error::invalid("expected a zero-one profile"));
    }
    Ok(zero_least_preferred(p).with_normalization(Normalization::UnitRange))
}

/// Breaks ties in each row by item priority.
///
/// `priority` lists items from highest to lowest priority. Within a group of
/// `g` tied items, the item ranked `r`-th by priority (from 0) gains
/// `(g - 1 - r) * delta / n`. No renormalization is applied; `delta` must be
/// below half the smallest nonzero gap between values in any row, and the
/// result must still satisfy the profile's normalization within tolerance.
pub fn break_ties(p: &ValuationProfile, priority: &[usize], delta: f64) -> Result<ValuationProfile> {
    let n = p.n();
    if priority.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: priority.len(),
        });
    }
    Matching::new(priority.to_vec()).map_err(|_| Error::invalid("priority must be a permutation of the items"))?;
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    let gap = min_nonzero_gap(p);
    if delta >= gap / 2.0 {
        return Err(Error::invalid(format!(
            "delta {delta:e} is not below half the smallest value gap ({:e}); it would reorder untied values",
            gap / 2.0
        )));
    }
    let mut rank = vec![0; n];
    for (r, &item) in priority.iter().enumerate() {
        rank[item] = r;
    }
    let step = delta / n as f64;
    let mut values = p.values().to_vec();
    for (i, row) in p.rows().enumerate() {
        let mut by_value: Vec<usize> = (0..n).collect();
        by_value.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(rank[a].cmp(&rank[b])));
        for group in by_value.chunk_by(|&a, &b| row[a] == row[b]) {
            let g = group.len();
            for (r, &item) in group.iter().enumerate() {
                values[i * n + item] += (g - 1 - r) as f64 * step;
            }
        }
    }
    let out = ValuationProfile::from_flat(n, values, p.normalization())?;
    if let Some(v) = out.validate().into_iter().next() {
        return Err(Error::invalid(format!(
            "delta {delta:e} too large: perturbed profile violates {} at row {} by {:e}",
            v.rule,
            v.row + 1,
            v.magnitude
        )));
    }
    Ok(out)
}

fn min_nonzero_gap(p: &ValuationProfile) -> f64 {
    let mut gap = f64::INFINITY;
    for row in p.rows() {
        let mut sorted = row.to_vec();
        sorted.sort_by(f64::total_cmp);
        for w in sorted.windows(2) {
            if w[1] > w[0] {
                gap = gap.min(w[1] - w[0]);
            }
        }
    }
    gap
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_n3_rp_worst, random_unit_range, random_unit_sum, QuasiCombinatorialClass};
    use crate::matching::{optimal_matching, optimal_welfare};
    use crate::mechanism::{
        evaluate, EvalMode, HybridMechanism, RandomPriority, SerialDictatorship, UniformMechanism,
    };
    use rand::{Rng, SeedableRng};

    #[test]
    fn anonymized_dictatorship_is_random_priority() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let wrapped = anonymize(SerialDictatorship::identity_order());
        for n in 1..=4 {
            for _ in 0..20 {
                let p = random_unit_range(n, &mut rng);
                let a = wrapped.distribution(&p).unwrap();
                let b = RandomPriority.distribution(&p).unwrap();
                assert!(a.max_abs_diff(&b) < 1e-12);
            }
        }
        assert!(wrapped.capabilities().anonymous);
        let p = random_unit_range(7, &mut rng);
        assert!(matches!(wrapped.distribution(&p), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn anonymized_lottery_and_sampler() {
        let p = gen_n3_rp_worst(0.1).unwrap();
        let wrapped = anonymize(SerialDictatorship::identity_order());
        let l = wrapped.lottery(&p).unwrap();
        let rp = RandomPriority.lottery(&p).unwrap();
        assert_eq!(l.len(), rp.len());
        for ((ma, wa), (mb, wb)) in l.iter().zip(&rp) {
            assert_eq!(ma, mb);
            assert!((wa - wb).abs() < 1e-12);
        }
        let exact = RandomPriority.exact(&p).unwrap().expected_welfare;
        let mc = evaluate(&wrapped, &p, EvalMode::MonteCarlo { samples: 50_000, seed: 1 }).unwrap();
        assert!((mc.expected_welfare - exact).abs() < mc.method.ci_radius());
    }

    #[test]
    fn anonymizing_an_anonymous_mechanism_is_a_no_op_on_symmetric_profiles() {
        let p = gen_n3_rp_worst(0.2).unwrap();
        for d in [
            (anonymize(RandomPriority).distribution(&p).unwrap(), RandomPriority.distribution(&p).unwrap()),
            (anonymize(HybridMechanism).distribution(&p).unwrap(), HybridMechanism.distribution(&p).unwrap()),
        ] {
            assert!(d.0.max_abs_diff(&d.1) < 1e-12);
        }
    }

    #[test]
    fn reduce_leaves_quasicombinatorial_input_alone() {
        let p = crate::generators::gen_quasicombinatorial(4, 0.01, 2, 3).unwrap();
        let out = quasicombinatorial_reduce(&p, 0.01, &RandomPriority).unwrap();
        assert_eq!(out.profile, p);
        assert_eq!(out.ratios.len(), 1);
    }

    #[test]
    fn reduce_one_middle_value() {
        let p = ValuationProfile::from_rows(
            vec![vec![1.0, 0.4, 0.0], vec![0.0, 1.0, 0.001], vec![0.002, 0.0, 1.0]],
            Normalization::UnitRange,
        )
        .unwrap();
        let eps = 0.1;
        let out = quasicombinatorial_reduce(&p, eps, &RandomPriority).unwrap();
        assert!(QuasiCombinatorialClass::new(eps).unwrap().contains(&out.profile));
        assert_eq!(out.ratios.len(), 2);

        // both candidate endpoints by hand: 0.4 moves to (0+0.1)/2 or (1+0.9)/2
        let reference = optimal_matching(&p).matching;
        let g = |v: f64| {
            let q = p.with_row(0, &[1.0, v, 0.0]).unwrap();
            RandomPriority.exact(&q).unwrap().expected_welfare / social_welfare(&q, &reference).unwrap()
        };
        let g_in = g(0.4);
        let best = g(0.05).min(g(0.95));
        assert!((out.ratios[1] - best).abs() < 1e-15);
        assert!(out.ratios[1] <= g_in + tolerance::REDUCE);
    }

    #[test]
    fn reduce_is_monotone_and_terminates() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let eps = 0.05;
        let class = QuasiCombinatorialClass::new(eps).unwrap();
        for n in 2..=5 {
            for _ in 0..10 {
                let p = random_unit_range(n, &mut rng);
                let out = quasicombinatorial_reduce(&p, eps, &RandomPriority).unwrap();
                assert!(class.contains(&out.profile));
                assert!(out.ratios.len() - 1 <= class.middle_count(&p));
                assert!(out.ratios.windows(2).all(|w| w[1] <= w[0] + tolerance::REDUCE));
                assert!(out.profile.validate().is_empty());
            }
        }
    }

    #[test]
    fn reduce_requires_capabilities() {
        let p = gen_n3_rp_worst(0.2).unwrap();
        assert!(matches!(
            quasicombinatorial_reduce(&p, 0.1, &HybridMechanism),
            Err(Error::Capability { capability: "ordinal", .. })
        ));
        assert!(matches!(
            quasicombinatorial_reduce(&p, 0.1, &SerialDictatorship::identity_order()),
            Err(Error::Capability { capability: "anonymous", .. })
        ));
        assert!(quasicombinatorial_reduce(&p, 0.1, &UniformMechanism).is_ok());
    }

    #[test]
    fn embedding_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in 2..=6 {
            for _ in 0..20 {
                let u = random_unit_sum(n, &mut rng);
                let u1 = zero_least_preferred(&u);
                let u2 = unitsum_to_unitrange_embed(&u).unwrap();
                assert_eq!(u2.n(), n + 1);
                assert!(u2.validate().is_empty());
                let (w, w1, w2) = (optimal_welfare(&u), optimal_welfare(&u1), optimal_welfare(&u2));
                assert!(w2 >= w1 + 1.0 - 1e-12);
                assert!(w1 >= w - 1.0 / n as f64 - 1e-12);
            }
        }
    }

    #[test]
    fn embedding_of_perturbed_uniform_profile() {
        let d = 0.01;
        let u = ValuationProfile::from_rows(
            vec![
                vec![1.0 / 3.0 + d, 1.0 / 3.0, 1.0 / 3.0 - d],
                vec![1.0 / 3.0, 1.0 / 3.0 + d, 1.0 / 3.0 - d],
                vec![1.0 / 3.0 - d, 1.0 / 3.0, 1.0 / 3.0 + d],
            ],
            Normalization::UnitSum,
        )
        .unwrap();
        let e = unitsum_to_unitrange_embed(&u).unwrap();
        assert_eq!(e.row(3), &[0.0, 1.0 / 243.0, 2.0 / 243.0, 1.0]);
        assert_eq!(e.row(0), &[1.0 / 3.0 + d, 1.0 / 3.0, 0.0, 1.0]);
        assert!(e.validate().is_empty());
        assert!(unitsum_to_unitrange_embed(&e).is_err());
    }

    #[test]
    fn zeroone_reduction() {
        let p = ValuationProfile::from_rows(vec![vec![1.0, 0.5, 0.2], vec![0.3, 1.0, 0.6], vec![0.9, 0.7, 1.0]], Normalization::ZeroOne)
            .unwrap();
        let q = zeroone_to_unitrange(&p).unwrap();
        assert_eq!(q.row(0), &[1.0, 0.5, 0.0]);
        assert!(q.validate().is_empty());

        let ur = ValuationProfile::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]], Normalization::ZeroOne).unwrap();
        assert_eq!(zeroone_to_unitrange(&ur).unwrap().values(), ur.values());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let p = ValuationProfile::from_fn(5, Normalization::ZeroOne, |_, j| if j == 0 { 1.0 } else { rng.gen() }).unwrap();
            let drop = optimal_welfare(&p) - optimal_welfare(&zeroone_to_unitrange(&p).unwrap());
            assert!((-1e-12..=1.0 + 1e-12).contains(&drop));
        }
    }

    #[test]
    fn break_ties_examples() {
        let p = ValuationProfile::from_rows(
            vec![vec![0.5, 0.5, 1.0, 0.0], vec![1.0, 0.0, 0.3, 0.6], vec![0.0, 1.0, 0.3, 0.6], vec![0.0, 0.2, 0.6, 1.0]],
            Normalization::UnitRange,
        )
        .unwrap()
        .with_ties_allowed(true);
        let delta = 1e-6;
        let q = break_ties(&p, &[0, 1, 2, 3], delta).unwrap();
        assert_eq!(q.row(0), &[0.5 + delta / 4.0, 0.5, 1.0, 0.0]);
        assert_eq!(q.row(1), p.row(1));
        assert!(q.first_tied_row().is_none());

        let strict = gen_n3_rp_worst(0.1).unwrap();
        assert_eq!(break_ties(&strict, &[2, 1, 0], 1e-6).unwrap(), strict);
        assert!(break_ties(&p, &[0, 1, 2, 3], 0.15).is_err());
        assert!(break_ties(&p, &[0, 1, 1, 3], 1e-6).is_err());
    }

    /// Random priority where each agent resolves indifference by `priority`.
    fn rp_with_tie_rule(p: &ValuationProfile, priority: &[usize]) -> AssignmentDistribution {
        let n = p.n();
        let mut rank = vec![0; n];
        for (r, &item) in priority.iter().enumerate() {
            rank[item] = r;
        }
        let orders = permutations(n);
        let mut d = AssignmentDistribution::zeros(n);
        for order in &orders {
            let mut taken = vec![false; n];
            for &a in order {
                let j = (0..n)
                    .filter(|&j| !taken[j])
                    .max_by(|&x, &y| p.value(a, x).total_cmp(&p.value(a, y)).then(rank[y].cmp(&rank[x])))
                    .unwrap();
                taken[j] = true;
                d.add(a, j, 1.0 / orders.len() as f64);
            }
        }
        d
    }

    #[test]
    fn tie_broken_rp_matches_explicit_tie_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let levels = [0.0, 0.25, 0.5, 0.75];
        for n in 2..=4 {
            for _ in 0..30 {
                let p = ValuationProfile::from_fn(n, Normalization::ZeroOne, |_, j| {
                    if j == 0 {
                        1.0
                    } else {
                        levels[rng.gen_range(0..levels.len())]
                    }
                })
                .unwrap()
                .with_ties_allowed(true);
                let mut priority: Vec<usize> = (0..n).collect();
                priority.shuffle(&mut rng);
                let q = break_ties(&p, &priority, 1e-6).unwrap();
                let d = RandomPriority.distribution(&q).unwrap();
                assert!(d.max_abs_diff(&rp_with_tie_rule(&p, &priority)) < 1e-12);
            }
        }
    }
}
