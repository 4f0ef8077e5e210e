//! Domain types: valuation profiles, matchings, assignment distributions and
//! the result records produced by mechanisms.
//!
//! Agents and items are 0-indexed everywhere in this crate. File formats and
//! user-facing messages use 1-indexed positions; conversion happens in [`crate::io`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance;

/// Canonical representation of the agents' valuation functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Every row has maximum 1 and minimum 0.
    UnitRange,
    /// Every row sums to 1.
    UnitSum,
    /// Every row has maximum 1 and all values in `[0, 1]`.
    ZeroOne,
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::UnitRange => "unit-range",
            Normalization::UnitSum => "unit-sum",
            Normalization::ZeroOne => "zero-one",
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An `n x n` matrix of agent-by-item valuations.
///
/// Construction only enforces structure (square, finite). Normalization and
/// strictness are reported by [`ValuationProfile::validate`] so that callers can
/// inspect broken inputs instead of failing on them.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuationProfile {
    n: usize,
    values: Vec<f64>,
    normalization: Normalization,
    ties_allowed: bool,
}

impl ValuationProfile {
    pub fn from_rows(rows: Vec<Vec<f64>>, normalization: Normalization) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Structural("profile has no agents".into()));
        }
        let mut values = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::Structural(format!(
                    "row {} has {} entries, expected {n} (profiles must be square)",
                    i + 1,
                    row.len()
                )));
            }
            values.extend(row);
        }
        Self::from_flat(n, values, normalization)
    }

    /// Builds a profile by evaluating `f(agent, item)` for every cell.
    pub fn from_fn(
        n: usize,
        normalization: Normalization,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(i, j));
            }
        }
        Self::from_flat(n, values, normalization)
    }

    pub fn from_flat(n: usize, values: Vec<f64>, normalization: Normalization) -> Result<Self> {
        if n == 0 {
            return Err(Error::Structural("profile has no agents".into()));
        }
        if values.len() != n * n {
            return Err(Error::Structural(format!(
                "expected {} values for n = {n}, got {}",
                n * n,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Structural(format!(
                "non-finite value {} at agent {}, item {}",
                values[pos],
                pos / n + 1,
                pos % n + 1
            )));
        }
        Ok(ValuationProfile {
            n,
            values,
            normalization,
            ties_allowed: false,
        })
    }

    /// Marks the profile as intentionally containing ties. Validation then stops
    /// reporting tied rows; mechanisms still refuse such profiles.
    pub fn with_ties_allowed(mut self, allowed: bool) -> Self {
        self.ties_allowed = allowed;
        self
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn ties_allowed(&self) -> bool {
        self.ties_allowed
    }

    #[inline]
    pub fn value(&self, agent: usize, item: usize) -> f64 {
        self.values[agent * self.n + item]
    }

    #[inline]
    pub fn row(&self, agent: usize) -> &[f64] {
        &self.values[agent * self.n..(agent + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Returns a copy with agent `agent`'s row replaced.
    pub fn with_row(&self, agent: usize, row: &[f64]) -> Result<Self> {
        if row.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Structural("replacement row has non-finite entries".into()));
        }
        let mut out = self.clone();
        out.values[agent * self.n..(agent + 1) * self.n].copy_from_slice(row);
        Ok(out)
    }

    /// Row `k` of the result is row `perm[k]` of `self`.
    pub fn permute_agents(&self, perm: &[usize]) -> Self {
        debug_assert_eq!(perm.len(), self.n);
        let mut values = Vec::with_capacity(self.values.len());
        for &src in perm {
            values.extend_from_slice(self.row(src));
        }
        ValuationProfile { values, ..self.clone() }
    }

    /// Column `j` of the result is column `sigma[j]` of `self`.
    pub fn permute_items(&self, sigma: &[usize]) -> Self {
        debug_assert_eq!(sigma.len(), self.n);
        let n = self.n;
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..n {
            for &src in sigma {
                values.push(self.value(i, src));
            }
        }
        ValuationProfile { values, ..self.clone() }
    }

    pub fn row_has_ties(&self, agent: usize) -> bool {
        row_has_ties(self.row(agent))
    }

    pub fn tied_rows(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.row_has_ties(i)).collect()
    }

    pub fn first_tied_row(&self) -> Option<usize> {
        (0..self.n).find(|&i| self.row_has_ties(i))
    }

    /// Errors with [`Error::TiesPresent`] unless every row is injective.
    pub fn require_strict(&self) -> Result<()> {
        match self.first_tied_row() {
            Some(row) => Err(Error::TiesPresent { row: row + 1 }),
            None => Ok(()),
        }
    }

    /// If every agent ranks the items identically, returns that shared order.
    ///
    /// Runs in `O(n^2)` after sorting one row, so it is usable at `n = 10^4`.
    /// A common order implies every row is strictly decreasing along it, so
    /// an ordered profile is also strict.
    pub fn common_order(&self) -> Option<Vec<usize>> {
        self.ordered_check().ok()
    }

    pub(crate) fn ordered_check(&self) -> Result<Vec<usize>> {
        let order = strict_order(self.row(0)).ok_or(Error::NotOrdered { agent: 1 })?;
        for i in 1..self.n {
            let row = self.row(i);
            if order.windows(2).any(|w| row[w[0]] <= row[w[1]]) {
                return Err(Error::NotOrdered { agent: i + 1 });
            }
        }
        Ok(order)
    }

    /// Checks the normalization invariants and strictness.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let tol = tolerance::NORM;
        for (i, row) in self.rows().enumerate() {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = row.iter().copied().fold(f64::INFINITY, f64::min);
            let mut push = |rule, magnitude: f64| {
                out.push(Violation {
                    row: i,
                    rule,
                    magnitude,
                })
            };
            match self.normalization {
                Normalization::UnitRange => {
                    if (max - 1.0).abs() > tol {
                        push(Rule::MaxNotOne, (max - 1.0).abs());
                    }
                    // a single item cannot be worth both 1 and 0
                    if self.n > 1 && min.abs() > tol {
                        push(Rule::MinNotZero, min.abs());
                    }
                }
                Normalization::UnitSum => {
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > tol {
                        push(Rule::SumNotOne, (sum - 1.0).abs());
                    }
                    if min < -tol {
                        push(Rule::OutOfRange, -min);
                    }
                }
                Normalization::ZeroOne => {
                    if (max - 1.0).abs() > tol {
                        push(Rule::MaxNotOne, (max - 1.0).abs());
                    }
                    if min < -tol {
                        push(Rule::OutOfRange, -min);
                    }
                    if max > 1.0 + tol {
                        push(Rule::OutOfRange, max - 1.0);
                    }
                }
            }
            if !self.ties_allowed && row_has_ties(row) {
                push(Rule::Tie, 0.0);
            }
        }
        out
    }

    /// Errors if [`ValuationProfile::validate`] reports anything.
    pub fn require_valid(&self) -> Result<()> {
        let violations = self.validate();
        if let Some(v) = violations.first() {
            if v.rule == Rule::Tie {
                return Err(Error::TiesPresent { row: v.row + 1 });
            }
            return Err(Error::Normalization {
                normalization: self.normalization.as_str(),
                detail: v.to_string(),
            });
        }
        Ok(())
    }
}

pub(crate) fn row_has_ties(row: &[f64]) -> bool {
    let mut sorted = row.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).any(|w| w[0] == w[1])
}

/// Items by strictly decreasing value, or `None` if the row has ties.
fn strict_order(row: &[f64]) -> Option<Vec<usize>> {
    let order = order_by_value(row);
    if order.windows(2).any(|w| row[w[0]] == row[w[1]]) {
        None
    } else {
        Some(order)
    }
}

/// Items by decreasing value; equal values keep increasing item index.
pub(crate) fn order_by_value(row: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    order
}

/// Which normalization rule a row breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    MaxNotOne,
    MinNotZero,
    SumNotOne,
    OutOfRange,
    Tie,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::MaxNotOne => "max ≠ 1",
            Rule::MinNotZero => "min ≠ 0",
            Rule::SumNotOne => "sum ≠ 1",
            Rule::OutOfRange => "value outside [0, 1]",
            Rule::Tie => "tied values",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// 0-indexed agent.
    pub row: usize,
    pub rule: Rule,
    pub magnitude: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}: {} (magnitude {:e})", self.row + 1, self.rule, self.magnitude)
    }
}

/// Structural checks plus normalization invariants on raw rows.
pub fn validate_profile(rows: Vec<Vec<f64>>, normalization: Normalization) -> Result<Vec<Violation>> {
    Ok(ValuationProfile::from_rows(rows, normalization)?.validate())
}

/// The item each agent ends up with. `assignment[i]` is agent `i`'s item.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Matching(Vec<usize>);

impl Matching {
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        let n = assignment.len();
        let mut seen = vec![false; n];
        for &item in &assignment {
            if item >= n {
                return Err(Error::InvalidMatching(format!("item {} out of range 1..={n}", item + 1)));
            }
            if std::mem::replace(&mut seen[item], true) {
                return Err(Error::InvalidMatching(format!("item {} assigned twice", item + 1)));
            }
        }
        Ok(Matching(assignment))
    }

    pub(crate) fn new_unchecked(assignment: Vec<usize>) -> Self {
        debug_assert!(Matching::new(assignment.clone()).is_ok());
        Matching(assignment)
    }

    pub fn identity(n: usize) -> Self {
        Matching((0..n).collect())
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn item_of(&self, agent: usize) -> usize {
        self.0[agent]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

/// Sum of the agents' values for their matched items.
pub fn social_welfare(p: &ValuationProfile, m: &Matching) -> Result<f64> {
    if m.n() != p.n() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            found: m.n(),
        });
    }
    Ok(m.as_slice().iter().enumerate().map(|(i, &j)| p.value(i, j)).sum())
}

/// Items ranked from most to least preferred by `agent`.
///
/// Tied rows are an error unless the profile is flagged as carrying ties, in
/// which case equal values are ranked by increasing item index.
pub fn preference_order(p: &ValuationProfile, agent: usize) -> Result<Vec<usize>> {
    if agent >= p.n() {
        return Err(Error::invalid(format!("agent {} out of range", agent + 1)));
    }
    let row = p.row(agent);
    if !p.ties_allowed() && row_has_ties(row) {
        return Err(Error::TiesPresent { row: agent + 1 });
    }
    Ok(order_by_value(row))
}

/// Agent-by-item assignment probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct AssignmentDistribution {
    n: usize,
    probs: Vec<f64>,
}

impl AssignmentDistribution {
    pub fn zeros(n: usize) -> Self {
        AssignmentDistribution {
            n,
            probs: vec![0.0; n * n],
        }
    }

    pub fn uniform(n: usize) -> Self {
        AssignmentDistribution {
            n,
            probs: vec![1.0 / n as f64; n * n],
        }
    }

    pub fn from_matching(m: &Matching) -> Self {
        let mut d = Self::zeros(m.n());
        d.add_matching(m, 1.0);
        d
    }

    pub fn from_flat(n: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: probs.len(),
            });
        }
        Ok(AssignmentDistribution { n, probs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, agent: usize, item: usize) -> f64 {
        self.probs[agent * self.n + item]
    }

    #[inline]
    pub(crate) fn add(&mut self, agent: usize, item: usize, p: f64) {
        self.probs[agent * self.n + item] += p;
    }

    pub fn add_matching(&mut self, m: &Matching, weight: f64) {
        for (i, &j) in m.as_slice().iter().enumerate() {
            self.add(i, j, weight);
        }
    }

    pub fn row(&self, agent: usize) -> &[f64] {
        &self.probs[agent * self.n..(agent + 1) * self.n]
    }

    /// Largest absolute deviation of any row or column sum from 1, or of any
    /// entry below 0 / above 1.
    pub fn stochastic_deviation(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        let mut cols = vec![0.0; n];
        for i in 0..n {
            let row = self.row(i);
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
            for (c, &p) in cols.iter_mut().zip(row) {
                *c += p;
                worst = worst.max(-p).max(p - 1.0);
            }
        }
        cols.iter().fold(worst, |w, c| w.max((c - 1.0).abs()))
    }

    pub fn is_doubly_stochastic(&self, tol: f64) -> bool {
        self.stochastic_deviation() <= tol
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n, "distribution sizes differ");
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Expected utility of each agent under `p`.
    pub fn expected_utilities(&self, p: &ValuationProfile) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(p.row(i)).map(|(q, v)| q * v).sum())
            .collect()
    }

    /// Rows reordered so that row `k` is row `perm[k]` of `self`.
    pub fn permute_agents(&self, perm: &[usize]) -> Self {
        let mut probs = Vec::with_capacity(self.probs.len());
        for &src in perm {
            probs.extend_from_slice(self.row(src));
        }
        AssignmentDistribution { n: self.n, probs }
    }

    /// Columns reordered so that column `j` is column `sigma[j]` of `self`.
    pub fn permute_items(&self, sigma: &[usize]) -> Self {
        let mut probs = Vec::with_capacity(self.probs.len());
        for i in 0..self.n {
            for &src in sigma {
                probs.push(self.get(i, src));
            }
        }
        AssignmentDistribution { n: self.n, probs }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.probs.chunks_exact(self.n.max(1)).map(<[f64]>::to_vec).collect()
    }
}

impl From<AssignmentDistribution> for Vec<Vec<f64>> {
    fn from(d: AssignmentDistribution) -> Self {
        d.to_rows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for AssignmentDistribution {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Structural("distribution must be square".into()));
        }
        Self::from_flat(n, rows.into_iter().flatten().collect())
    }
}

/// How an expected welfare was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    Exact,
    MonteCarlo {
        samples: u64,
        seed: u64,
        /// Hoeffding radius at 99% confidence on the welfare estimate.
        ci_radius: f64,
        rng: String,
    },
}

impl Method {
    pub fn ci_radius(&self) -> f64 {
        match self {
            Method::Exact => 0.0,
            Method::MonteCarlo { ci_radius, .. } => *ci_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismResult {
    pub expected_welfare: f64,
    pub per_agent_utility: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<AssignmentDistribution>,
    pub method: Method,
}

impl MechanismResult {
    pub fn exact(p: &ValuationProfile, dist: AssignmentDistribution) -> Self {
        let per_agent_utility = dist.expected_utilities(p);
        MechanismResult {
            expected_welfare: per_agent_utility.iter().sum(),
            per_agent_utility,
            distribution: Some(dist),
            method: Method::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub mech_welfare: f64,
    pub opt_welfare: f64,
    pub ratio: f64,
    pub provenance: Method,
}
