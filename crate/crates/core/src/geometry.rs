//! Exact polytope machinery over equivalence classes.
//!
//! For a state `s`, action `a` and partition `P`, the class polytope is
//!
//! ```text
//! H(s,a,P) = { x : Σ_C x(C) = 1,  lo_C <= x(C) <= hi_C }
//! ```
//!
//! where `lo_C`/`hi_C` sum the interval endpoints of the targets inside
//! class `C` (upper sums clamped to 1). Everything downstream — hull
//! equality for the cooperative bisimulation, strictly minimal polytopes
//! for the competitive one — reduces to exact vertex enumeration of these
//! interval polytopes plus LP feasibility over their vertex sets.
//!
//! Polytope identity is decided on canonical form: the sorted, deduplicated
//! vertex list with reduced rationals. Blocks with bound `[0,0]` are
//! projected away before enumeration, so the support of a polytope equals
//! the classes its action can actually reach.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::OnceLock;

use num::traits::{One, Zero};
use thiserror::Error;

use crate::interval::Interval;
use crate::lp::{LinProg, Rel};
use crate::model::{ActionId, Imdp, StateId};
use crate::partition::{BlockId, Partition};
use crate::rational::Rat;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error("action `{action}` is not enabled in state `{state}`")]
    DisabledAction { state: String, action: String },
    #[error("empty polytope: block bounds admit no distribution")]
    EmptyPolytope,
    #[error("block count mismatch: {left} vs {right}")]
    BlockMismatch { left: usize, right: usize },
    #[error("weights must be nonnegative and sum to 1")]
    BadWeights,
}

/// A probability distribution over partition blocks; zero entries are not
/// stored, so structural equality is canonical equality.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassDistribution {
    num_blocks: usize,
    weights: BTreeMap<BlockId, Rat>,
}

impl ClassDistribution {
    pub fn new(
        num_blocks: usize,
        weights: BTreeMap<BlockId, Rat>,
    ) -> Result<Self, GeometryError> {
        let mut sum = Rat::zero();
        for (b, w) in &weights {
            if b.0 >= num_blocks || w < &Rat::zero() {
                return Err(GeometryError::BadWeights);
            }
            sum += w;
        }
        if !sum.is_one() {
            return Err(GeometryError::BadWeights);
        }
        let weights = weights.into_iter().filter(|(_, w)| !w.is_zero()).collect();
        Ok(ClassDistribution { num_blocks, weights })
    }

    fn from_parts(num_blocks: usize, weights: BTreeMap<BlockId, Rat>) -> Self {
        debug_assert!(
            weights.values().fold(Rat::zero(), |a, w| a + w).is_one(),
            "weights must sum to one"
        );
        ClassDistribution { num_blocks, weights }
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn weight(&self, b: BlockId) -> Rat {
        self.weights.get(&b).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (BlockId, &Rat)> {
        self.weights.iter().map(|(&b, w)| (b, w))
    }

    pub fn support(&self) -> impl Iterator<Item = BlockId> + '_ {
        self.weights.keys().copied()
    }
}

/// The interval polytope `H(s,a,P)` in half-space form, with a lazily
/// computed vertex cache.
#[derive(Debug, Clone)]
pub struct ClassPolytope {
    num_blocks: usize,
    /// Per-block bounds, sorted by block; `[0,0]` blocks are not stored.
    bounds: Vec<(BlockId, Interval)>,
    vertex_cache: OnceLock<Vec<ClassDistribution>>,
}

/// Canonical identity of a polytope: its sorted vertex list.
pub type PolytopeKey = Vec<ClassDistribution>;

impl ClassPolytope {
    pub fn from_bounds(
        num_blocks: usize,
        mut bounds: Vec<(BlockId, Interval)>,
    ) -> ClassPolytope {
        bounds.retain(|(_, iv)| !iv.is_zero());
        bounds.sort_by_key(|(b, _)| *b);
        ClassPolytope {
            num_blocks,
            bounds,
            vertex_cache: OnceLock::new(),
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    /// The support: blocks with a nonzero upper bound.
    pub fn support(&self) -> impl Iterator<Item = BlockId> + '_ {
        self.bounds.iter().map(|(b, _)| *b)
    }

    pub fn bound(&self, b: BlockId) -> Interval {
        self.bounds
            .iter()
            .find(|(c, _)| *c == b)
            .map(|(_, iv)| iv.clone())
            .unwrap_or_else(Interval::zero)
    }

    pub fn bounds(&self) -> &[(BlockId, Interval)] {
        &self.bounds
    }

    fn sums(&self) -> (Rat, Rat) {
        let mut lo = Rat::zero();
        let mut hi = Rat::zero();
        for (_, iv) in &self.bounds {
            lo += iv.lo();
            hi += iv.hi();
        }
        (lo, hi)
    }

    pub fn is_empty(&self) -> bool {
        let (lo, hi) = self.sums();
        lo > Rat::one() || hi < Rat::one()
    }

    /// The exact vertex set, in canonical order.
    ///
    /// A vertex of the H-form leaves at most one coordinate strictly between
    /// its bounds, so the enumeration takes each block in turn as the slack
    /// coordinate, assigns every other block to one of its endpoints and
    /// keeps the candidates whose residual lands inside the slack bounds.
    /// The count is bounded by `k * 2^(k-1)` for `k` support blocks.
    pub fn vertices(&self) -> Result<&[ClassDistribution], GeometryError> {
        if self.is_empty() {
            return Err(GeometryError::EmptyPolytope);
        }
        Ok(self.vertex_cache.get_or_init(|| self.enumerate_vertices()))
    }

    fn enumerate_vertices(&self) -> Vec<ClassDistribution> {
        let k = self.bounds.len();
        let mut found: BTreeSet<BTreeMap<BlockId, Rat>> = BTreeSet::new();
        for slack in 0..k {
            // only blocks with lo < hi contribute distinct endpoint choices
            let wide: Vec<usize> = (0..k)
                .filter(|&i| i != slack && !self.bounds[i].1.is_point())
                .collect();
            for mask in 0u64..(1u64 << wide.len()) {
                let mut sum = Rat::zero();
                let mut point: BTreeMap<BlockId, Rat> = BTreeMap::new();
                for i in 0..k {
                    if i == slack {
                        continue;
                    }
                    let (b, iv) = &self.bounds[i];
                    let v = match wide.iter().position(|&w| w == i) {
                        Some(pos) if mask & (1 << pos) != 0 => iv.hi().clone(),
                        _ => iv.lo().clone(),
                    };
                    sum += &v;
                    if !v.is_zero() {
                        point.insert(*b, v);
                    }
                }
                let residual = Rat::one() - sum;
                let (b, iv) = &self.bounds[slack];
                if iv.contains(&residual) {
                    if !residual.is_zero() {
                        point.insert(*b, residual);
                    }
                    found.insert(point);
                }
            }
        }
        found
            .into_iter()
            .map(|w| ClassDistribution::from_parts(self.num_blocks, w))
            .collect()
    }

    /// Canonical form for set comparisons: the sorted vertex list.
    pub fn canonical(&self) -> Result<PolytopeKey, GeometryError> {
        Ok(self.vertices()?.to_vec())
    }

    /// Exact membership in the H-form (not the hull of anything else).
    /// The `Σ = 1` constraint holds for any `ClassDistribution`, so only the
    /// box bounds and the support need checking.
    pub fn contains(&self, x: &ClassDistribution) -> bool {
        for (b, iv) in &self.bounds {
            if !iv.contains(&x.weight(*b)) {
                return false;
            }
        }
        // mass outside the support must be zero
        x.iter().all(|(b, _)| self.bounds.iter().any(|(c, _)| *c == b))
    }

    /// `block:[lo,hi]` lines for diffing.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (b, iv) in &self.bounds {
            writeln!(out, "B{}:{}", b.0, iv).expect("string write");
        }
        out
    }
}

/// Lifts the successor intervals of `(s,a)` to the blocks of `p`.
pub fn class_polytope(
    m: &Imdp,
    s: StateId,
    a: ActionId,
    p: &Partition,
) -> Result<ClassPolytope, GeometryError> {
    let row = m.row(s, a).ok_or_else(|| GeometryError::DisabledAction {
        state: m.state_name(s).to_string(),
        action: m.action_name(a).to_string(),
    })?;
    let mut acc: BTreeMap<BlockId, (Rat, Rat)> = BTreeMap::new();
    for (t, iv) in row {
        let b = p.block_of(*t);
        let entry = acc.entry(b).or_insert_with(|| (Rat::zero(), Rat::zero()));
        entry.0 += iv.lo();
        entry.1 += iv.hi();
    }
    let one = Rat::one();
    let bounds = acc
        .into_iter()
        .map(|(b, (lo, hi))| {
            let lo = if lo > one { one.clone() } else { lo };
            let hi = if hi > one { one.clone() } else { hi };
            let iv = Interval::new(lo, hi).expect("clamped sums are a valid interval");
            (b, iv)
        })
        .collect();
    Ok(ClassPolytope::from_bounds(p.num_blocks(), bounds))
}

/// A family of class polytopes over the same block universe; implicitly
/// represents the convex hull of their union, `CH(s,P)`.
#[derive(Debug, Clone)]
pub struct HullFamily {
    members: Vec<ClassPolytope>,
}

impl HullFamily {
    pub fn new(members: Vec<ClassPolytope>) -> Result<Self, GeometryError> {
        let mut it = members.iter();
        let first = it.next().ok_or(GeometryError::EmptyPolytope)?;
        for p in it {
            if p.num_blocks() != first.num_blocks() {
                return Err(GeometryError::BlockMismatch {
                    left: first.num_blocks(),
                    right: p.num_blocks(),
                });
            }
        }
        Ok(HullFamily { members })
    }

    pub fn members(&self) -> &[ClassPolytope] {
        &self.members
    }

    pub fn num_blocks(&self) -> usize {
        self.members[0].num_blocks()
    }

    /// Deduplicated vertices of all members.
    pub fn vertex_pool(&self) -> Result<Vec<ClassDistribution>, GeometryError> {
        let mut pool: BTreeSet<ClassDistribution> = BTreeSet::new();
        for p in &self.members {
            pool.extend(p.vertices()?.iter().cloned());
        }
        Ok(pool.into_iter().collect())
    }
}

/// The class polytopes of every enabled action of `s`, as a family.
pub fn hull_family(m: &Imdp, s: StateId, p: &Partition) -> Result<HullFamily, GeometryError> {
    let members = m
        .enabled(s)
        .iter()
        .map(|&a| class_polytope(m, s, a, p))
        .collect::<Result<Vec<_>, _>>()?;
    HullFamily::new(members)
}

/// Decides `x ∈ conv(∪ members)` by exact LP feasibility: nonnegative
/// coefficients over the pooled vertices that sum to 1 and reproduce `x`
/// coordinate-wise.
pub fn member_of_hull(x: &ClassDistribution, fam: &HullFamily) -> Result<bool, GeometryError> {
    if x.num_blocks() != fam.num_blocks() {
        return Err(GeometryError::BlockMismatch {
            left: x.num_blocks(),
            right: fam.num_blocks(),
        });
    }
    let pool = fam.vertex_pool()?;
    Ok(in_convex_hull(x, &pool))
}

/// `x ∈ conv(pool)` for a raw point pool, by exact LP feasibility.
pub fn in_convex_hull(x: &ClassDistribution, pool: &[ClassDistribution]) -> bool {
    if pool.is_empty() {
        return false;
    }
    let mut coords: BTreeSet<BlockId> = x.support().collect();
    for v in pool {
        coords.extend(v.support());
    }
    let mut lp = LinProg::new(pool.len());
    lp.add(vec![Rat::one(); pool.len()], Rel::Eq, Rat::one());
    for &c in &coords {
        let coeffs: Vec<Rat> = pool.iter().map(|v| v.weight(c)).collect();
        lp.add(coeffs, Rel::Eq, x.weight(c));
    }
    lp.is_feasible()
}

/// `conv(∪ f1) == conv(∪ f2)`, decided by mutual vertex membership.
pub fn hull_equal(f1: &HullFamily, f2: &HullFamily) -> Result<bool, GeometryError> {
    if f1.num_blocks() != f2.num_blocks() {
        return Err(GeometryError::BlockMismatch {
            left: f1.num_blocks(),
            right: f2.num_blocks(),
        });
    }
    for v in f1.vertex_pool()? {
        if !member_of_hull(&v, f2)? {
            return Ok(false);
        }
    }
    for v in f2.vertex_pool()? {
        if !member_of_hull(&v, f1)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A distribution over an ordered list of constituents (actions, or the
/// distinct polytopes they induce).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightVector {
    weights: Vec<Rat>,
}

impl WeightVector {
    pub fn new(weights: Vec<Rat>) -> Result<Self, GeometryError> {
        if weights.iter().any(|w| w < &Rat::zero()) {
            return Err(GeometryError::BadWeights);
        }
        let sum: Rat = weights.iter().cloned().fold(Rat::zero(), |a, b| a + b);
        if !sum.is_one() {
            return Err(GeometryError::BadWeights);
        }
        Ok(WeightVector { weights })
    }

    pub fn dirac(len: usize, at: usize) -> Self {
        let mut weights = vec![Rat::zero(); len];
        weights[at] = Rat::one();
        WeightVector { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[Rat] {
        &self.weights
    }
}

/// The point `Σ_i ρ_i · c_i` of the weighted combination polytope, one
/// corner per constituent.
pub fn combination_point(
    rho: &WeightVector,
    corners: &[&ClassDistribution],
) -> Result<ClassDistribution, GeometryError> {
    if rho.len() != corners.len() || corners.is_empty() {
        return Err(GeometryError::BadWeights);
    }
    let num_blocks = corners[0].num_blocks();
    if corners.iter().any(|c| c.num_blocks() != num_blocks) {
        return Err(GeometryError::BlockMismatch {
            left: num_blocks,
            right: corners.iter().map(|c| c.num_blocks()).max().unwrap_or(0),
        });
    }
    let mut weights: BTreeMap<BlockId, Rat> = BTreeMap::new();
    for (w, corner) in rho.weights().iter().zip(corners) {
        if w.is_zero() {
            continue;
        }
        for (b, v) in corner.iter() {
            let entry = weights.entry(b).or_insert_with(Rat::zero);
            *entry += w * v;
        }
    }
    weights.retain(|_, w| !w.is_zero());
    Ok(ClassDistribution::from_parts(num_blocks, weights))
}

/// The distinct class polytopes of a state (identical geometry collapsed),
/// with the list of actions inducing each.
pub fn distinct_polytopes(
    m: &Imdp,
    s: StateId,
    p: &Partition,
) -> Result<Vec<(PolytopeKey, ClassPolytope)>, GeometryError> {
    let mut seen: BTreeMap<PolytopeKey, ClassPolytope> = BTreeMap::new();
    for &a in m.enabled(s) {
        let poly = class_polytope(m, s, a, p)?;
        let key = poly.canonical()?;
        seen.entry(key).or_insert(poly);
    }
    Ok(seen.into_iter().collect())
}

/// Whether `H(s,a,P)` is strictly minimal: no weighted combination of the
/// state's remaining distinct polytopes fits inside it.
///
/// The containment question is an LP over the combination weights. For a
/// fixed `ρ >= 0`, every corner combination `Σ ρ_i c_i` stays within the
/// target's block bounds iff the per-block extremes do, and those separate
/// per constituent: `Σ_i ρ_i min_i(C) >= lo_C` and `Σ_i ρ_i max_i(C) <=
/// hi_C`, with `min_i`/`max_i` the vertex extremes of constituent `i` on
/// block `C`. Feasibility of that system over the simplex certifies a
/// combination polytope inside the target; infeasibility is strict
/// minimality.
pub fn strictly_minimal(
    m: &Imdp,
    s: StateId,
    a: ActionId,
    p: &Partition,
) -> Result<bool, GeometryError> {
    let target = class_polytope(m, s, a, p)?;
    let target_key = target.canonical()?;
    let others: Vec<ClassPolytope> = distinct_polytopes(m, s, p)?
        .into_iter()
        .filter(|(key, _)| key != &target_key)
        .map(|(_, poly)| poly)
        .collect();
    Ok(!combination_fits_inside(&others, &target)?)
}

/// Whether some `ρ`-combination of `constituents` is a subset of `target`.
pub fn combination_fits_inside(
    constituents: &[ClassPolytope],
    target: &ClassPolytope,
) -> Result<bool, GeometryError> {
    if constituents.is_empty() {
        return Ok(false);
    }
    let k = constituents.len();
    let mut blocks: BTreeSet<BlockId> = target.support().collect();
    for c in constituents {
        blocks.extend(c.support());
    }
    let mut lp = LinProg::new(k);
    lp.add(vec![Rat::one(); k], Rel::Eq, Rat::one());
    for &b in &blocks {
        let mut mins = Vec::with_capacity(k);
        let mut maxs = Vec::with_capacity(k);
        for c in constituents {
            let verts = c.vertices()?;
            let mut lo: Option<Rat> = None;
            let mut hi: Option<Rat> = None;
            for v in verts {
                let w = v.weight(b);
                lo = Some(match lo {
                    Some(cur) => cur.min(w.clone()),
                    None => w.clone(),
                });
                hi = Some(match hi {
                    Some(cur) => cur.max(w),
                    None => w,
                });
            }
            mins.push(lo.expect("non-empty vertex set"));
            maxs.push(hi.expect("non-empty vertex set"));
        }
        let bound = target.bound(b);
        lp.add(mins, Rel::Ge, bound.lo().clone());
        lp.add(maxs, Rel::Le, bound.hi().clone());
    }
    Ok(lp.is_feasible())
}
