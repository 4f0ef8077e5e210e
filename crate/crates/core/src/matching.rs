//! Maximum-weight perfect matching: the optimal-welfare oracle.
//!
//! [`optimal_matching`] runs the Kuhn–Munkres algorithm with dual potentials
//! on the negated valuation matrix and then walks the tight-edge subgraph to
//! pick the lexicographically smallest optimal assignment.
//! [`optimal_matching_bruteforce`] enumerates all `n!` matchings under the same
//! tie rule and serves as the reference.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{social_welfare, Matching, ValuationProfile};
use crate::perm::next_permutation;
use crate::tolerance;

/// Largest size the brute-force oracle accepts.
pub const BRUTEFORCE_MAX_N: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub matching: Matching,
    /// `social_welfare(p, matching)`, i.e. `w*(p)`.
    pub welfare: f64,
}

/// Dual potentials and primal assignment for a square minimisation problem.
struct Assignment {
    /// `row_of_col[j]` is the row assigned to column `j`.
    col_owner: Vec<usize>,
    row_pot: Vec<f64>,
    col_pot: Vec<f64>,
}

/// Shortest-augmenting-path Hungarian method, `O(n^3)`, on a row-major cost matrix.
fn hungarian_min(cost: &[f64], n: usize) -> Assignment {
    let inf = f64::INFINITY;
    // 1-indexed with a virtual column 0, as in the classical formulation.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|m| *m = inf);
        used.iter_mut().for_each(|u| *u = false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    Assignment {
        col_owner: owner[1..].iter().map(|&r| r - 1).collect(),
        row_pot: u[1..].to_vec(),
        col_pot: v[1..].to_vec(),
    }
}

/// Maximum-weight assignment of a square row-major matrix; returns the item of each row.
pub(crate) fn max_weight_assignment(weights: &[f64], n: usize) -> Vec<usize> {
    let cost: Vec<f64> = weights.iter().map(|w| -w).collect();
    let a = hungarian_min(&cost, n);
    let mut item = vec![0; n];
    for (j, &r) in a.col_owner.iter().enumerate() {
        item[r] = j;
    }
    item
}

/// Maximum-weight perfect matching, ties broken towards the lexicographically
/// smallest assignment vector.
pub fn optimal_matching(p: &ValuationProfile) -> OptResult {
    let n = p.n();
    let cost: Vec<f64> = p.values().iter().map(|v| -v).collect();
    let a = hungarian_min(&cost, n);

    let scale = p.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = tolerance::MATCHING_TIE * scale;
    let tight = |i: usize, j: usize| cost[i * n + j] - a.row_pot[i] - a.col_pot[j] <= tol;

    let mut owner = a.col_owner.clone();
    let mut item = vec![0; n];
    for (j, &r) in owner.iter().enumerate() {
        item[r] = j;
    }

    // Every perfect matching on tight edges is optimal, so the lexicographic
    // minimum is found by fixing agents in order to their smallest tight item
    // that still admits a perfect completion.
    let mut item_fixed = vec![false; n];
    let mut via = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let mut queue = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..n {
            if item_fixed[j] || !tight(i, j) {
                continue;
            }
            if item[i] == j {
                break;
            }
            // Move i onto j: the current holder of j must reach i's old item
            // along an alternating path of tight edges among unfixed agents.
            let start = owner[j];
            let free = item[i];
            seen.iter_mut().for_each(|s| *s = false);
            seen[j] = true;
            queue.clear();
            queue.push(start);
            let mut head = 0;
            let mut found = None;
            'bfs: while head < queue.len() {
                let x = queue[head];
                head += 1;
                for y in 0..n {
                    if seen[y] || item_fixed[y] || !tight(x, y) {
                        continue;
                    }
                    seen[y] = true;
                    via[y] = x;
                    if y == free {
                        found = Some(x);
                        break 'bfs;
                    }
                    queue.push(owner[y]);
                }
            }
            let Some(mut x) = found else { continue };
            let mut target = free;
            loop {
                let old = item[x];
                item[x] = target;
                owner[target] = x;
                if x == start {
                    break;
                }
                target = old;
                x = via[old];
            }
            item[i] = j;
            owner[j] = i;
            break;
        }
        item_fixed[item[i]] = true;
    }

    let matching = Matching::new_unchecked(item);
    let welfare = social_welfare(p, &matching).expect("sizes agree");
    OptResult { matching, welfare }
}

/// Exhaustive reference for [`optimal_matching`], limited to `n <= 10`.
pub fn optimal_matching_bruteforce(p: &ValuationProfile) -> Result<OptResult> {
    let n = p.n();
    if n > BRUTEFORCE_MAX_N {
        return Err(Error::TooLarge {
            what: "brute-force matching",
            n,
            max: BRUTEFORCE_MAX_N,
            hint: "use optimal_matching",
        });
    }
    let scale = p.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = tolerance::MATCHING_TIE * scale;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_w = f64::NEG_INFINITY;
    loop {
        let w: f64 = perm.iter().enumerate().map(|(i, &j)| p.value(i, j)).sum();
        if w > best_w + tol {
            best_w = w;
            best.copy_from_slice(&perm);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    let matching = Matching::new_unchecked(best);
    let welfare = social_welfare(p, &matching)?;
    Ok(OptResult { matching, welfare })
}

/// `w*(p)` without materialising the full assignment problem when the profile
/// has structure.
///
/// Items valued identically by every agent contribute the same amount no
/// matter who receives them, so they are dropped and their values summed.
/// Of a group of identical agents at most `r` can receive one of the `r`
/// remaining items, so groups are truncated to `r` members and the problem is
/// padded with zero-valued dummy items. On the adversarial generators this
/// shrinks `n = 10^4` to a few hundred.
pub fn optimal_welfare(p: &ValuationProfile) -> f64 {
    let n = p.n();
    let first = p.row(0);
    let kept: Vec<usize> = (0..n)
        .filter(|&j| p.rows().any(|r| r[j].to_bits() != first[j].to_bits()))
        .collect();
    let constant: f64 = (0..n).filter(|j| !kept.contains(j)).map(|j| first[j]).sum();
    let r = kept.len();
    if r == 0 {
        return constant;
    }
    if r == n {
        return optimal_matching(p).welfare;
    }

    let mut groups: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut reps: Vec<Vec<f64>> = Vec::new();
    for row in p.rows() {
        let key: Vec<u64> = kept.iter().map(|&j| row[j].to_bits()).collect();
        let count = groups.entry(key).or_insert(0);
        if *count < r {
            reps.push(kept.iter().map(|&j| row[j]).collect());
        }
        *count += 1;
    }
    let m = reps.len();
    let mut weights = vec![0.0; m * m];
    for (a, rep) in reps.iter().enumerate() {
        weights[a * m..a * m + r].copy_from_slice(rep);
    }
    let item = max_weight_assignment(&weights, m);
    let reduced: f64 = item.iter().enumerate().map(|(a, &j)| weights[a * m + j]).sum();
    constant + reduced
}
