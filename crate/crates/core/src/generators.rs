//! Adversarial valuation profiles and seeded random profiles.
//!
//! Formulas use 1-based agent and item labels `i`, `j` as in the usual
//! statement of each construction; the stored matrices are 0-indexed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Normalization, ValuationProfile};

/// The quasi-combinatorial class: all values within `epsilon` of 0 or of 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiCombinatorialClass {
    epsilon: f64,
}

impl QuasiCombinatorialClass {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::invalid(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
        }
        Ok(QuasiCombinatorialClass { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn contains_value(&self, v: f64) -> bool {
        (0.0..self.epsilon).contains(&v) || (v > 1.0 - self.epsilon && v <= 1.0)
    }

    pub fn contains_row(&self, row: &[f64]) -> bool {
        row.iter().all(|&v| self.contains_value(v))
    }

    pub fn contains(&self, p: &ValuationProfile) -> bool {
        p.rows().all(|r| self.contains_row(r))
    }

    /// Number of values in `[epsilon, 1 - epsilon]`, summed over rows.
    pub fn middle_count(&self, p: &ValuationProfile) -> usize {
        p.values().iter().filter(|&&v| !self.contains_value(v)).count()
    }
}

/// A generator family together with its size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    Lemma5 { n: usize },
    Lemma6 { n: usize, k: Option<usize> },
    Lemma8 { n: usize },
    Lemma9 { n: usize, k: Option<usize> },
    N3Worst { eps: f64 },
    QuasiRandom { n: usize, eps: f64, k: usize, seed: u64 },
}

impl GeneratorSpec {
    pub fn generate(&self) -> Result<ValuationProfile> {
        match *self {
            GeneratorSpec::Lemma5 { n } => gen_lemma5(n),
            GeneratorSpec::Lemma6 { n, k } => gen_lemma6(n, k.unwrap_or_else(|| default_k(n))),
            GeneratorSpec::Lemma8 { n } => gen_lemma8(n),
            GeneratorSpec::Lemma9 { n, k } => gen_lemma9(n, k.unwrap_or_else(|| default_k(n))),
            GeneratorSpec::N3Worst { eps } => gen_n3_rp_worst(eps),
            GeneratorSpec::QuasiRandom { n, eps, k, seed } => gen_quasicombinatorial(n, eps, k, seed),
        }
    }
}

/// `floor(sqrt(n)) - 1`, the parameter choice of the truthful upper-bound
/// construction (at least 2).
pub fn default_k(n: usize) -> usize {
    n.isqrt().saturating_sub(1).max(2)
}

/// Ordered unit-range profile on which every anonymous ordinal mechanism is
/// a uniform lottery while the optimum is about `sqrt(n)`.
pub fn gen_lemma5(n: usize) -> Result<ValuationProfile> {
    if n < 2 {
        return Err(Error::invalid("the ordered profile needs n >= 2"));
    }
    let s = n.isqrt();
    let nf = n as f64;
    let low = |j: usize| (nf - j as f64) / (nf * nf);
    ValuationProfile::from_fn(n, Normalization::UnitRange, |a, b| {
        let (i, j) = (a + 1, b + 1);
        if i <= s {
            if j <= i {
                1.0 - (j - 1) as f64 / nf
            } else {
                low(j)
            }
        } else if j == 1 {
            1.0
        } else {
            low(j)
        }
    })
}

fn check_lemma6_params(n: usize, k: usize) -> Result<()> {
    if k < 2 || k + 2 > n {
        return Err(Error::refused(format!("need 2 <= k <= n - 2 (got n={n}, k={k})")));
    }
    let (nf, kf) = (n as f64, k as f64);
    let mid_min = 2.0 / kf - (kf + 1.0) / nf;
    let low_max = (nf - kf - 2.0) / (nf * nf);
    if mid_min <= low_max {
        return Err(Error::refused(format!(
            "n={n}, k={k}: the middle band 2/k - j/n drops to {mid_min:.3e}, not above the low band \
             (n - j)/n^2 = {low_max:.3e}, so the intended preference order breaks"
        )));
    }
    Ok(())
}

/// Unit-range profile used against truthful mechanisms: `k + 1` agents each
/// own a distinct favourite among items `1..=k+1`, everyone else shares the
/// preferences of agent 1.
pub fn gen_lemma6(n: usize, k: usize) -> Result<ValuationProfile> {
    check_lemma6_params(n, k)?;
    let (nf, kf) = (n as f64, k as f64);
    ValuationProfile::from_fn(n, Normalization::UnitRange, |a, b| {
        let (i, j) = (a + 1, b + 1);
        let top = if i <= k + 1 { i } else { 1 };
        if j == top {
            1.0
        } else if j <= k + 1 {
            2.0 / kf - j as f64 / nf
        } else {
            (nf - j as f64) / (nf * nf)
        }
    })
}

/// The misreport companion of [`gen_lemma6`]: agent `agent` (0-based, in
/// `1..=k`) reports the row shared by agents `k + 2..=n`.
pub fn lemma6_misreport_profile(n: usize, k: usize, agent: usize) -> Result<ValuationProfile> {
    let u = gen_lemma6(n, k)?;
    if !(1..=k).contains(&agent) {
        return Err(Error::invalid(format!(
            "misreporting agent must be one of agents 2..={} (0-based 1..={k}), got 0-based {agent}",
            k + 1
        )));
    }
    let shared = u.row(k + 1).to_vec();
    u.with_row(agent, &shared)
}

/// Unit-sum profile with `sqrt(n)` groups of agents sharing a preference
/// order; `n` must be a perfect square.
pub fn gen_lemma8(n: usize) -> Result<ValuationProfile> {
    let s = n.isqrt();
    if n == 0 || s * s != n {
        return Err(Error::refused(format!("n must be a perfect square (got {n})")));
    }
    let nf = n as f64;
    let n2 = nf * nf;
    let n5 = n2 * n2 * nf;
    let mut rows = Vec::with_capacity(n);
    for a in 0..n {
        let i = a % s + 1;
        let leader = a < s;
        let mut row: Vec<f64> = (1..=n)
            .map(|j| {
                if j == i {
                    0.0
                } else if !leader && j <= s {
                    1.0 / s as f64 - j as f64 / (10.0 * n2)
                } else {
                    (nf - j as f64) / (10.0 * n5)
                }
            })
            .collect();
        row[i - 1] = residual(&row);
        rows.push(row);
    }
    ValuationProfile::from_rows(rows, Normalization::UnitSum)
}

/// The unit-range profile of [`gen_lemma6`] scaled down by ten off the top
/// entry, with the top entry taking up the remaining mass.
pub fn gen_lemma9(n: usize, k: usize) -> Result<ValuationProfile> {
    check_lemma6_params(n, k)?;
    let (nf, kf) = (n as f64, k as f64);
    let mut rows = Vec::with_capacity(n);
    for i in 1..=n {
        let top = if i <= k + 1 { i } else { 1 };
        let mut row: Vec<f64> = (1..=n)
            .map(|j| {
                if j == top {
                    0.0
                } else if j <= k + 1 {
                    2.0 / (10.0 * kf) - j as f64 / (10.0 * nf)
                } else {
                    (nf - j as f64) / (10.0 * nf * nf)
                }
            })
            .collect();
        row[top - 1] = residual(&row);
        rows.push(row);
    }
    ValuationProfile::from_rows(rows, Normalization::UnitSum)
}

/// `1 - sum(row)` with the slot to be filled holding 0.
fn residual(row: &[f64]) -> f64 {
    1.0 - row.iter().sum::<f64>()
}

/// The three-agent ordered profile `(1, 1-eps, 0), (1, eps, 0), (1, eps, 0)`.
pub fn gen_n3_rp_worst(eps: f64) -> Result<ValuationProfile> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::invalid(format!("eps must lie in (0, 1/2), got {eps}")));
    }
    ValuationProfile::from_rows(
        vec![vec![1.0, 1.0 - eps, 0.0], vec![1.0, eps, 0.0], vec![1.0, eps, 0.0]],
        Normalization::UnitRange,
    )
}

/// Seeded random unit-range profile in the quasi-combinatorial class whose
/// optimum places agents `1..=k` on their own items in the high band.
///
/// Agents `1..=k` value their own item at exactly 1. Every other agent values
/// one uniformly chosen item among `1..=k` at exactly 1, so all high values sit
/// in the first `k` columns and `k <= w* <= k + n*eps`. All remaining values
/// are drawn from `[0, eps)` with one entry per row pinned to 0.
pub fn gen_quasicombinatorial(n: usize, eps: f64, k: usize, seed: u64) -> Result<ValuationProfile> {
    let class = QuasiCombinatorialClass::new(eps)?;
    if k < 1 || k > n {
        return Err(Error::invalid(format!("need 1 <= k <= n (got n={n}, k={k})")));
    }
    if n < 2 {
        return Err(Error::invalid("quasi-combinatorial profiles need n >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let high = if i < k { i } else { rng.gen_range(0..k) };
        let zero = loop {
            let z = rng.gen_range(0..n);
            if z != high {
                break z;
            }
        };
        let row = loop {
            let mut row: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..class.epsilon())).collect();
            row[high] = 1.0;
            row[zero] = 0.0;
            if !crate::model::row_has_ties(&row) {
                break row;
            }
        };
        rows.push(row);
    }
    ValuationProfile::from_rows(rows, Normalization::UnitRange)
}

/// Random strict unit-sum profile.
pub fn random_unit_sum(n: usize, rng: &mut ChaCha8Rng) -> ValuationProfile {
    loop {
        let mut values: Vec<f64> = (0..n * n).map(|_| rng.gen::<f64>() + 1e-3).collect();
        for row in values.chunks_mut(n) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
        let p = ValuationProfile::from_flat(n, values, Normalization::UnitSum).expect("finite square matrix");
        if p.first_tied_row().is_none() {
            return p;
        }
    }
}

/// Random strict unit-range profile: each row is an affine image of uniform
/// draws, so its maximum is exactly 1 and its minimum exactly 0.
pub fn random_unit_range(n: usize, rng: &mut ChaCha8Rng) -> ValuationProfile {
    if n == 1 {
        return ValuationProfile::from_rows(vec![vec![1.0]], Normalization::UnitRange).expect("1x1");
    }
    loop {
        let mut values: Vec<f64> = (0..n * n).map(|_| rng.gen::<f64>()).collect();
        for row in values.chunks_mut(n) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = row.iter().copied().fold(f64::INFINITY, f64::min);
            row.iter_mut().for_each(|v| {
                *v = if *v == max {
                    1.0
                } else if *v == min {
                    0.0
                } else {
                    (*v - min) / (max - min)
                }
            });
        }
        let p = ValuationProfile::from_flat(n, values, Normalization::UnitRange).expect("finite square matrix");
        if p.first_tied_row().is_none() {
            return p;
        }
    }
}
