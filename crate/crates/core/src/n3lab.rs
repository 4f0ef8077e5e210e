//! Exhaustive study of three-agent, three-item instances.
//!
//! A unit-range profile with three agents is fixed by each agent's strict
//! preference order and its middle value `alpha_i`. Order triples are grouped
//! into classes under renaming agents and items; for an anonymous and neutral
//! mechanism the welfare ratio depends only on the class and the middle
//! values. Each class is minimised over `(alpha_1, alpha_2, alpha_3)` with a
//! grid search followed by coordinate-wise golden-section refinement.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matching::optimal_welfare;
use crate::mechanism::Mechanism;
use crate::model::{Normalization, ValuationProfile};
use crate::perm::permutations;
use crate::tolerance::BOUNDARY_MARGIN;

/// A strict preference over items 0, 1, 2, most preferred first.
pub type Order = [u8; 3];

/// Margins used to extrapolate a boundary minimum, largest first.
pub const EXTRAPOLATION_MARGINS: [f64; 3] = [1e-4, 1e-5, 1e-6];

/// Golden-section steps per coordinate and refinement round.
const GOLDEN_STEPS: usize = 30;

/// Distance from the margin below which a coordinate counts as on it.
const MARGIN_SLACK: f64 = 1e-12;

const HEADER: &str = "alpha1,alpha2,alpha3,ratio";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrdinalClassN3 {
    pub orders: [Order; 3],
    /// Whether `orders` is the representative of its orbit.
    pub canonical: bool,
}

impl OrdinalClassN3 {
    pub fn new(orders: [Order; 3]) -> Result<Self> {
        for o in &orders {
            let mut s = *o;
            s.sort_unstable();
            if s != [0, 1, 2] {
                return Err(Error::invalid(format!("{o:?} is not an order of items 0, 1, 2")));
            }
        }
        Ok(OrdinalClassN3 {
            orders,
            canonical: canonical_orders(&orders) == orders,
        })
    }

    /// Parses `"ABC,BCA,CAB"` style labels.
    pub fn parse(label: &str) -> Result<Self> {
        let parts: Vec<&str> = label.split([',', '|']).collect();
        if parts.len() != 3 {
            return Err(Error::invalid(format!("expected three orders in `{label}`")));
        }
        let mut orders = [[0u8; 3]; 3];
        for (o, part) in orders.iter_mut().zip(&parts) {
            let bytes = part.trim().as_bytes();
            if bytes.len() != 3 || bytes.iter().any(|b| !(b'A'..=b'C').contains(b)) {
                return Err(Error::invalid(format!("bad order `{part}`")));
            }
            for (x, b) in o.iter_mut().zip(bytes) {
                *x = b - b'A';
            }
        }
        Self::new(orders)
    }

    pub fn canonical_form(&self) -> Self {
        OrdinalClassN3 {
            orders: canonical_orders(&self.orders),
            canonical: true,
        }
    }

    /// Every order triple reachable by renaming agents and items.
    pub fn orbit(&self) -> Vec<[Order; 3]> {
        let mut seen: Vec<[Order; 3]> = symmetry_images(&self.orders).collect();
        seen.sort_unstable();
        seen.dedup();
        seen
    }

    /// The profile with agent `i`'s middle item valued at `alpha[i]`.
    pub fn profile(&self, alpha: [f64; 3]) -> Result<ValuationProfile> {
        let mut values = vec![0.0; 9];
        for (i, (o, a)) in self.orders.iter().zip(alpha).enumerate() {
            values[3 * i + o[0] as usize] = 1.0;
            values[3 * i + o[1] as usize] = a;
        }
        ValuationProfile::from_flat(3, values, Normalization::UnitRange)
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for OrdinalClassN3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, o) in self.orders.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            for &x in o {
                write!(f, "{}", (b'A' + x) as char)?;
            }
        }
        Ok(())
    }
}

impl Serialize for OrdinalClassN3 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

fn symmetry_images(orders: &[Order; 3]) -> impl Iterator<Item = [Order; 3]> + '_ {
    let perms = permutations(3);
    perms.clone().into_iter().flat_map(move |agents| {
        perms.clone().into_iter().map(move |items| {
            let mut out = [[0u8; 3]; 3];
            for (k, &src) in agents.iter().enumerate() {
                for (slot, &x) in out[k].iter_mut().zip(&orders[src]) {
                    *slot = items[x as usize] as u8;
                }
            }
            out
        })
    })
}

fn canonical_orders(orders: &[Order; 3]) -> [Order; 3] {
    symmetry_images(orders).min().expect("the symmetry group is non-empty")
}

fn all_order_triples() -> Vec<[Order; 3]> {
    let orders: Vec<Order> = permutations(3).into_iter().map(|p| [p[0] as u8, p[1] as u8, p[2] as u8]).collect();
    let mut out = Vec::with_capacity(216);
    for &a in &orders {
        for &b in &orders {
            for &c in &orders {
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// Canonical representatives of all 216 order triples with their orbit sizes.
pub fn enumerate_classes() -> Vec<(OrdinalClassN3, usize)> {
    let mut sizes: BTreeMap<[Order; 3], usize> = BTreeMap::new();
    for t in all_order_triples() {
        *sizes.entry(canonical_orders(&t)).or_default() += 1;
    }
    sizes
        .into_iter()
        .map(|(orders, size)| (OrdinalClassN3 { orders, canonical: true }, size))
        .collect()
}

/// `G(alpha) = E[welfare] / optimal welfare` for one class and mechanism.
pub struct RatioFunctionN3<'a, M: Mechanism + ?Sized> {
    pub class: OrdinalClassN3,
    pub mech: &'a M,
}

impl<M: Mechanism + ?Sized> RatioFunctionN3<'_, M> {
    pub fn eval(&self, alpha: [f64; 3]) -> Result<f64> {
        let p = self.class.profile(alpha)?;
        let welfare = self.mech.exact(&p)?.expected_welfare;
        Ok(welfare / optimal_welfare(&p))
    }
}

/// `delta + k * step` for `k = 0..=floor((1 - 2 delta) / step)`.
pub fn grid_points(step: f64, delta: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(Error::invalid(format!("grid step must lie in (0, 0.5], got {step}")));
    }
    let count = ((1.0 - 2.0 * delta) / step).floor() as usize + 1;
    Ok((0..count).map(|k| delta + k as f64 * step).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceRow {
    pub alpha: [f64; 3],
    pub ratio: f64,
}

/// The ratio on the full `grid_step` grid over `[delta_b, 1 - delta_b]^3`.
pub fn ratio_surface<M: Mechanism + ?Sized>(
    class: &OrdinalClassN3,
    mech: &M,
    grid_step: f64,
) -> Result<Vec<SurfaceRow>> {
    let g = RatioFunctionN3 { class: *class, mech };
    let pts = grid_points(grid_step, BOUNDARY_MARGIN)?;
    let mut rows = Vec::with_capacity(pts.len().pow(3));
    for &a in &pts {
        for &b in &pts {
            for &c in &pts {
                let alpha = [a, b, c];
                rows.push(SurfaceRow { alpha, ratio: g.eval(alpha)? });
            }
        }
    }
    Ok(rows)
}

pub fn write_surface_csv<W: Write>(out: &mut W, rows: &[SurfaceRow]) -> std::io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for r in rows {
        writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", r.alpha[0], r.alpha[1], r.alpha[2], r.ratio)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMinimum {
    pub class: OrdinalClassN3,
    pub alpha: [f64; 3],
    /// Best value found, replaced by the boundary limit when that is lower.
    pub ratio: f64,
    /// Best value actually evaluated.
    pub attained: f64,
    /// Set when some coordinate of the minimiser sits at the margin and the
    /// ratio was extrapolated to the boundary.
    pub extrapolated: bool,
    pub evaluations: usize,
}

fn golden_section(mut lo: f64, mut hi: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..GOLDEN_STEPS {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

/// Linear extrapolation to margin 0 from the last two margins.
fn extrapolate(values: [f64; 3]) -> f64 {
    let [_, d2, d3] = EXTRAPOLATION_MARGINS;
    let [_, g2, g3] = values;
    g3 - (g2 - g3) * d3 / (d2 - d3)
}

/// Minimises the ratio of `mech` over one class.
///
/// The coarse grid is followed by `refine_iters` rounds; round `r` runs a
/// golden-section search on each coordinate in turn over a bracket of
/// half-width `grid_step / 2^r` around the incumbent, also trying the
/// bracket's ends. If the minimiser ends at the margin in some coordinate,
/// those coordinates are moved to each of [`EXTRAPOLATION_MARGINS`] and the
/// boundary limit is extrapolated.
pub fn minimize_ratio<M: Mechanism + ?Sized>(
    class: &OrdinalClassN3,
    mech: &M,
    grid_step: f64,
    refine_iters: usize,
) -> Result<ClassMinimum> {
    let g = RatioFunctionN3 { class: *class, mech };
    let delta = BOUNDARY_MARGIN;
    let pts = grid_points(grid_step, delta)?;
    let mut evaluations = 0usize;
    let mut eval = |alpha: [f64; 3]| {
        evaluations += 1;
        g.eval(alpha)
    };

    let mut best = ([pts[0]; 3], f64::INFINITY);
    for &a in &pts {
        for &b in &pts {
            for &c in &pts {
                let v = eval([a, b, c])?;
                if v < best.1 {
                    best = ([a, b, c], v);
                }
            }
        }
    }

    let mut half = grid_step;
    for _ in 0..refine_iters {
        for c in 0..3 {
            let lo = (best.0[c] - half).max(delta);
            let hi = (best.0[c] + half).min(1.0 - delta);
            if hi <= lo {
                continue;
            }
            let at = |x: f64| {
                let mut a = best.0;
                a[c] = x;
                a
            };
            let mut cand = golden_section(lo, hi, |x| eval(at(x)))?;
            for end in [lo, hi] {
                let v = eval(at(end))?;
                if v < cand.1 {
                    cand = (end, v);
                }
            }
            if cand.1 < best.1 {
                best = (at(cand.0), cand.1);
            }
        }
        half /= 2.0;
    }

    let (alpha, attained) = best;
    // golden-section arithmetic can land a few ulps inside the margin
    let low: Vec<usize> = (0..3).filter(|&c| alpha[c] <= delta + MARGIN_SLACK).collect();
    let high: Vec<usize> = (0..3).filter(|&c| alpha[c] >= 1.0 - delta - MARGIN_SLACK).collect();
    let mut ratio = attained;
    let mut extrapolated = false;
    if !low.is_empty() || !high.is_empty() {
        let mut values = [0.0; 3];
        for (v, &m) in values.iter_mut().zip(&EXTRAPOLATION_MARGINS) {
            let mut a = alpha;
            low.iter().for_each(|&c| a[c] = m);
            high.iter().for_each(|&c| a[c] = 1.0 - m);
            *v = eval(a)?;
        }
        let limit = extrapolate(values);
        if limit < ratio {
            ratio = limit;
            extrapolated = true;
        }
    }
    Ok(ClassMinimum {
        class: *class,
        alpha,
        ratio,
        attained,
        extrapolated,
        evaluations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct N3Study {
    pub mechanism: String,
    pub grid_step: f64,
    pub refine_iters: usize,
    pub classes: Vec<ClassMinimum>,
    /// Index into `classes` of the smallest ratio.
    pub argmin: usize,
    pub global_min: f64,
}

impl N3Study {
    pub fn global(&self) -> &ClassMinimum {
        &self.classes[self.argmin]
    }
}

/// Minimises over every canonical class in parallel.
pub fn study<M: Mechanism + ?Sized>(mech: &M, grid_step: f64, refine_iters: usize) -> Result<N3Study> {
    let caps = mech.capabilities();
    if !caps.supports_exact {
        return Err(Error::Capability {
            mechanism: mech.name(),
            capability: "exact evaluation",
        });
    }
    let classes: Vec<ClassMinimum> = enumerate_classes()
        .par_iter()
        .map(|(class, _)| minimize_ratio(class, mech, grid_step, refine_iters))
        .collect::<Result<_>>()?;
    let argmin = classes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.ratio.total_cmp(&b.1.ratio))
        .map(|(i, _)| i)
        .expect("at least one class");
    Ok(N3Study {
        mechanism: mech.name(),
        grid_step,
        refine_iters,
        global_min: classes[argmin].ratio,
        argmin,
        classes,
    })
}
