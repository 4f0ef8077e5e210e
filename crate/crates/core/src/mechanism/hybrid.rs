//! The three-agent hybrid mechanism built on the cubic lottery.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{check_lottery_size, ranked_items, Capabilities, Lottery, Mechanism, Sampler};
use crate::error::{Error, Result};
use crate::model::{AssignmentDistribution, Matching, MechanismResult, ValuationProfile};
use crate::perm::permutations;

/// Probabilities `(top, middle, bottom)` with which a lone agent reporting
/// middle value `alpha` receives each of its three items.
pub fn cubic_lottery(alpha: f64) -> Result<(f64, f64, f64)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("cubic lottery needs alpha in [0, 1], got {alpha}")));
    }
    let a2 = alpha * alpha;
    let a3 = a2 * alpha;
    let top = (6.0 - 2.0 * a3) / 8.0;
    let middle = (1.0 + 3.0 * a2) / 8.0;
    // the residual keeps the sum at 1 without cancellation in the closed form
    let bottom = 1.0 - top - middle;
    Ok((top, middle, bottom.max(0.0)))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HybridMechanism;

/// Per-agent data the mechanism reads from a report.
struct Reports {
    ranked: Vec<Vec<usize>>,
    lottery: Vec<[f64; 3]>,
}

fn reports(p: &ValuationProfile) -> Result<Reports> {
    if p.n() != 3 {
        return Err(Error::refused(format!("hybrid requires n=3 (got n={})", p.n())));
    }
    p.require_strict()?;
    let ranked = ranked_items(p);
    let mut lottery = Vec::with_capacity(3);
    for (i, order) in ranked.iter().enumerate() {
        let (hi, mid, lo) = (p.value(i, order[0]), p.value(i, order[1]), p.value(i, order[2]));
        // equals the middle value on unit-range rows
        let alpha = (mid - lo) / (hi - lo);
        let (t, m, b) = cubic_lottery(alpha)?;
        lottery.push([t, m, b]);
    }
    Ok(Reports { ranked, lottery })
}

/// One branch of the mechanism: `sigma` is the drawn agent order and `pick`
/// the rank (0, 1, 2) of the item the first agent receives.
fn branch(r: &Reports, sigma: &[usize], pick: usize, out: &mut [usize]) {
    let first = sigma[0];
    let j1 = r.ranked[first][pick];
    out[first] = j1;
    let j2 = *r.ranked[sigma[1]].iter().find(|&&j| j != j1).expect("two items remain");
    out[sigma[1]] = j2;
    out[sigma[2]] = 3 - j1 - j2;
}

/// Exact evaluation over the 6 agent orders and 3 lottery outcomes.
pub fn hybrid_mechanism_exact(p: &ValuationProfile) -> Result<MechanismResult> {
    HybridMechanism.exact(p)
}

impl Mechanism for HybridMechanism {
    fn name(&self) -> String {
        "hm".into()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            supports_exact: true,
            ordinal: false,
            anonymous: true,
            neutral: true,
        }
    }

    fn distribution(&self, p: &ValuationProfile) -> Result<AssignmentDistribution> {
        let r = reports(p)?;
        let mut d = AssignmentDistribution::zeros(3);
        let mut out = [0usize; 3];
        for sigma in permutations(3) {
            for pick in 0..3 {
                branch(&r, &sigma, pick, &mut out);
                let w = r.lottery[sigma[0]][pick] / 6.0;
                for (a, &j) in out.iter().enumerate() {
                    d.add(a, j, w);
                }
            }
        }
        Ok(d)
    }

    fn lottery(&self, p: &ValuationProfile) -> Result<Lottery> {
        check_lottery_size(p.n())?;
        let r = reports(p)?;
        let mut acc: Vec<(Vec<usize>, f64)> = Vec::new();
        let mut out = [0usize; 3];
        for sigma in permutations(3) {
            for pick in 0..3 {
                let w = r.lottery[sigma[0]][pick] / 6.0;
                if w == 0.0 {
                    continue;
                }
                branch(&r, &sigma, pick, &mut out);
                match acc.iter_mut().find(|(m, _)| m[..] == out[..]) {
                    Some((_, acc_w)) => *acc_w += w,
                    None => acc.push((out.to_vec(), w)),
                }
            }
        }
        acc.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(acc.into_iter().map(|(m, w)| (Matching::new_unchecked(m), w)).collect())
    }

    fn sampler<'a>(&'a self, p: &'a ValuationProfile) -> Result<Box<dyn Sampler + 'a>> {
        Ok(Box::new(HmSampler {
            reports: reports(p)?,
            sigma: [0, 1, 2],
        }))
    }
}

struct HmSampler {
    reports: Reports,
    sigma: [usize; 3],
}

impl Sampler for HmSampler {
    fn draw(&mut self, rng: &mut ChaCha8Rng, out: &mut [usize]) {
        self.sigma.shuffle(rng);
        let [t, m, _] = self.reports.lottery[self.sigma[0]];
        let u: f64 = rng.gen();
        let pick = if u < t {
            0
        } else if u < t + m {
            1
        } else {
            2
        };
        branch(&self.reports, &self.sigma, pick, out);
    }
}
