//! Brute-force cross-validation of the bisimulation engines.
//!
//! This module re-decides both bisimulations through machinery that shares
//! as little as possible with the primary path. Where the engines in
//! [`crate::bisim`] lean on simplex LP feasibility, the oracle uses:
//!
//! * direct interval reasoning for single-constituent containment,
//! * exact convex-hull geometry (line endpoints, Andrew's monotone chain)
//!   for hulls of affine rank <= 2, Carathéodory subset enumeration with
//!   Gaussian elimination above that,
//! * a dense weight grid plus exhaustive basic-solution enumeration for the
//!   combination-containment question behind strict minimality,
//! * a batch signature-grouping refinement loop instead of per-state
//!   splitting.
//!
//! Class polytope construction and interval-polytope vertex enumeration are
//! shared foundations (plain arithmetic, unit-tested on their own); every
//! decision layered on top is independent. The oracle exists to disagree
//! loudly, not to be fast, and it refuses models above a configured size.

use std::collections::{BTreeMap, BTreeSet};

use num::traits::{One, Zero};
use thiserror::Error;

use crate::bisim::BisimKind;
use crate::geometry::{class_polytope, distinct_polytopes, ClassDistribution, ClassPolytope, PolytopeKey};
use crate::model::{Imdp, StateId};
use crate::partition::{BlockId, Partition};
use crate::rational::Rat;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("model has {states} states, above the oracle bound {bound}")]
    StateBound { states: usize, bound: usize },
    #[error("oracle work cap exceeded while {0}")]
    OracleBound(String),
}

#[derive(Debug, Clone)]
pub struct OracleConfig {
    /// Largest model the oracle will touch.
    pub max_states: usize,
    /// Denominator of the weight grid searched for containment witnesses.
    pub grid_denominator: u64,
    /// Cap on elementary enumeration steps before giving up.
    pub work_cap: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            max_states: 8,
            grid_denominator: 8,
            work_cap: 4_000_000,
        }
    }
}

struct Work {
    used: usize,
    cap: usize,
}

impl Work {
    fn new(cap: usize) -> Self {
        Work { used: 0, cap }
    }

    fn charge(&mut self, n: usize, what: &str) -> Result<(), OracleError> {
        self.used = self.used.saturating_add(n);
        if self.used > self.cap {
            Err(OracleError::OracleBound(what.to_string()))
        } else {
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// exact linear algebra
// ---------------------------------------------------------------------------

/// Row-echelon rank.
fn rank(mut m: Vec<Vec<Rat>>) -> usize {
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut r = 0;
    for c in 0..cols {
        let Some(pivot) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, pivot);
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let factor = &m[i][c] / &m[r][c];
                for j in c..cols {
                    let delta = &factor * &m[r][j];
                    m[i][j] -= delta;
                }
            }
        }
        r += 1;
        if r == rows {
            break;
        }
    }
    r
}

/// Unique solution of a possibly overdetermined system `m x = rhs`.
/// `None` when inconsistent or underdetermined.
fn solve_unique(mut m: Vec<Vec<Rat>>, mut rhs: Vec<Rat>) -> Option<Vec<Rat>> {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; cols];
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            return None; // free column: underdetermined
        };
        m.swap(r, p);
        rhs.swap(r, p);
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let factor = &m[i][c] / &m[r][c];
                for j in c..cols {
                    let delta = &factor * &m[r][j];
                    m[i][j] -= delta;
                }
                let delta = &factor * &rhs[r];
                rhs[i] -= delta;
            }
        }
        pivot_of_col[c] = Some(r);
        r += 1;
    }
    // remaining rows must be consistent
    for i in r..rows {
        if !rhs[i].is_zero() {
            return None;
        }
    }
    let mut x = vec![Rat::zero(); cols];
    for c in 0..cols {
        let p = pivot_of_col[c].expect("all columns pivoted");
        x[c] = &rhs[p] / &m[p][c];
    }
    Some(x)
}

// ---------------------------------------------------------------------------
// canonical extreme sets without LP
// ---------------------------------------------------------------------------

fn densify(points: &[ClassDistribution]) -> (Vec<BlockId>, Vec<Vec<Rat>>) {
    let coords: BTreeSet<BlockId> = points.iter().flat_map(|p| p.support()).collect();
    let coords: Vec<BlockId> = coords.into_iter().collect();
    let dense = points
        .iter()
        .map(|p| coords.iter().map(|&b| p.weight(b)).collect())
        .collect();
    (coords, dense)
}

fn affine_rank(dense: &[Vec<Rat>]) -> usize {
    if dense.len() <= 1 {
        return 0;
    }
    let diffs: Vec<Vec<Rat>> = dense[1..]
        .iter()
        .map(|p| {
            p.iter()
                .zip(&dense[0])
                .map(|(a, b)| a - b)
                .collect::<Vec<Rat>>()
        })
        .collect();
    rank(diffs)
}

/// The extreme points of `conv(pool)`, decided geometrically.
pub fn extreme_points(
    pool: &[ClassDistribution],
    work_cap: usize,
) -> Result<Vec<ClassDistribution>, OracleError> {
    let dedup: BTreeSet<ClassDistribution> = pool.iter().cloned().collect();
    let pool: Vec<ClassDistribution> = dedup.into_iter().collect();
    if pool.len() <= 1 {
        return Ok(pool);
    }
    let (_, dense) = densify(&pool);
    let r = affine_rank(&dense);
    let mut work = Work::new(work_cap);
    let keep: Vec<usize> = match r {
        0 => vec![0], // all equal; dedup left one
        1 => line_extremes(&dense),
        2 => planar_extremes(&dense),
        _ => caratheodory_extremes(&dense, r, &mut work)?,
    };
    Ok(keep.into_iter().map(|i| pool[i].clone()).collect())
}

fn line_extremes(dense: &[Vec<Rat>]) -> Vec<usize> {
    // parameterise along the first coordinate that varies
    let d = dense[0].len();
    let co = (0..d)
        .find(|&j| dense.iter().any(|p| p[j] != dense[0][j]))
        .expect("rank 1 has a varying coordinate");
    let mut min_i = 0;
    let mut max_i = 0;
    for (i, p) in dense.iter().enumerate() {
        if p[co] < dense[min_i][co] {
            min_i = i;
        }
        if p[co] > dense[max_i][co] {
            max_i = i;
        }
    }
    let mut v = vec![min_i, max_i];
    v.dedup();
    v
}

fn planar_extremes(dense: &[Vec<Rat>]) -> Vec<usize> {
    let d = dense[0].len();
    let base = &dense[0];
    let diff = |p: &[Rat]| -> Vec<Rat> { p.iter().zip(base).map(|(a, b)| a - b).collect() };
    // two independent direction vectors
    let d1 = dense[1..]
        .iter()
        .map(|p| diff(p))
        .find(|v| v.iter().any(|x| !x.is_zero()))
        .expect("rank 2 pool has a nonzero difference");
    let d2 = dense[1..]
        .iter()
        .map(|p| diff(p))
        .find(|v| rank(vec![d1.clone(), v.clone()]) == 2)
        .expect("rank 2 pool has two independent differences");
    // a 2x2 invertible coordinate selection
    let (i1, i2) = {
        let mut found = None;
        'outer: for i in 0..d {
            for j in (i + 1)..d {
                let det = &d1[i] * &d2[j] - &d1[j] * &d2[i];
                if !det.is_zero() {
                    found = Some((i, j));
                    break 'outer;
                }
            }
        }
        found.expect("independent directions have an invertible minor")
    };
    let det = &d1[i1] * &d2[i2] - &d1[i2] * &d2[i1];
    let planar: Vec<(Rat, Rat)> = dense
        .iter()
        .map(|p| {
            let w = diff(p);
            // Cramer on the (i1, i2) rows
            let t = (&w[i1] * &d2[i2] - &w[i2] * &d2[i1]) / &det;
            let u = (&d1[i1] * &w[i2] - &d1[i2] * &w[i1]) / &det;
            (t, u)
        })
        .collect();
    monotone_chain(&planar)
}

/// Indices of the strict convex hull of distinct planar points.
fn monotone_chain(points: &[(Rat, Rat)]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| points[a].cmp(&points[b]));
    let cross = |o: usize, a: usize, b: usize| -> Rat {
        let (ox, oy) = &points[o];
        let (ax, ay) = &points[a];
        let (bx, by) = &points[b];
        (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)
    };
    let mut lower: Vec<usize> = Vec::new();
    for &i in &idx {
        while lower.len() >= 2
            && cross(lower[lower.len() - 2], lower[lower.len() - 1], i) <= Rat::zero()
        {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &i in idx.iter().rev() {
        while upper.len() >= 2
            && cross(upper[upper.len() - 2], upper[upper.len() - 1], i) <= Rat::zero()
        {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    let mut hull: Vec<usize> = lower.into_iter().chain(upper).collect();
    hull.sort_unstable();
    hull.dedup();
    hull
}

fn caratheodory_extremes(
    dense: &[Vec<Rat>],
    r: usize,
    work: &mut Work,
) -> Result<Vec<usize>, OracleError> {
    let mut keep = Vec::new();
    for i in 0..dense.len() {
        let others: Vec<&Vec<Rat>> = dense
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, p)| p)
            .collect();
        if !caratheodory_member(&dense[i], &others, r, work)? {
            keep.push(i);
        }
    }
    Ok(keep)
}

/// `v ∈ conv(others)` via Carathéodory: some affinely independent subset of
/// size at most `r + 1` expresses `v` with nonnegative barycentric
/// coordinates. Each subset is decided by exact Gaussian elimination.
fn caratheodory_member(
    v: &[Rat],
    others: &[&Vec<Rat>],
    r: usize,
    work: &mut Work,
) -> Result<bool, OracleError> {
    let d = v.len();
    for size in 1..=(r + 1).min(others.len()) {
        let mut subset: Vec<usize> = (0..size).collect();
        loop {
            work.charge(1, "testing hull membership subsets")?;
            // rows: one per coordinate plus the affine combination row
            let mut m: Vec<Vec<Rat>> = Vec::with_capacity(d + 1);
            let mut rhs: Vec<Rat> = Vec::with_capacity(d + 1);
            for c in 0..d {
                m.push(subset.iter().map(|&j| others[j][c].clone()).collect());
                rhs.push(v[c].clone());
            }
            m.push(vec![Rat::one(); size]);
            rhs.push(Rat::one());
            // affinely dependent subsets are skipped (underdetermined); their
            // independent sub-subsets are enumerated at smaller sizes
            if let Some(lambda) = solve_unique(m, rhs) {
                if lambda.iter().all(|l| l >= &Rat::zero()) {
                    return Ok(true);
                }
            }
            if !next_combination(&mut subset, others.len()) {
                break;
            }
        }
    }
    Ok(false)
}

// ---------------------------------------------------------------------------
// containment without LP
// ---------------------------------------------------------------------------

/// `inner ⊆ outer` by checking every vertex of `inner` against the H-form of
/// `outer`.
pub fn polytope_inside(inner: &ClassPolytope, outer: &ClassPolytope) -> bool {
    inner
        .vertices()
        .expect("non-empty polytope")
        .iter()
        .all(|v| outer.contains(v))
}

/// Whether the fixed-weight combination of the constituents lies inside the
/// target: every corner combination must satisfy the target's bounds.
fn combination_inside(
    constituents: &[ClassPolytope],
    rho: &[Rat],
    target: &ClassPolytope,
    work: &mut Work,
) -> Result<bool, OracleError> {
    let vertex_sets: Vec<&[ClassDistribution]> = constituents
        .iter()
        .map(|c| c.vertices().expect("non-empty polytope"))
        .collect();
    let combos: usize = vertex_sets.iter().map(|v| v.len()).product();
    work.charge(combos, "enumerating corner combinations")?;
    let mut pick = vec![0usize; constituents.len()];
    loop {
        let mut point: BTreeMap<BlockId, Rat> = BTreeMap::new();
        for (i, &vi) in pick.iter().enumerate() {
            if rho[i].is_zero() {
                continue;
            }
            for (b, w) in vertex_sets[i][vi].iter() {
                let e = point.entry(b).or_insert_with(Rat::zero);
                *e += &rho[i] * w;
            }
        }
        // check against the target's H-form: support bounds and zero mass
        // outside the support
        let mut ok = true;
        for (b, iv) in target.bounds() {
            let w = point.get(b).cloned().unwrap_or_else(Rat::zero);
            if !iv.contains(&w) {
                ok = false;
                break;
            }
        }
        if ok {
            for (b, w) in &point {
                if !w.is_zero() && target.bound(*b).is_zero() {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            return Ok(false);
        }
        // advance the odometer
        let mut i = 0;
        loop {
            if i == pick.len() {
                return Ok(true);
            }
            pick[i] += 1;
            if pick[i] < vertex_sets[i].len() {
                break;
            }
            pick[i] = 0;
            i += 1;
        }
    }
}

/// Searches the weight grid with the given denominator for a containment
/// witness; a returned witness is exact (verified by substitution).
pub fn grid_containment_witness(
    constituents: &[ClassPolytope],
    target: &ClassPolytope,
    denominator: u64,
    work_cap: usize,
) -> Result<Option<Vec<Rat>>, OracleError> {
    let mut work = Work::new(work_cap);
    let k = constituents.len();
    if k == 0 {
        return Ok(None);
    }
    let mut counts = vec![0u64; k];
    let found = grid_search(
        constituents,
        target,
        denominator,
        &mut counts,
        0,
        denominator,
        &mut work,
    )?;
    Ok(found)
}

fn grid_search(
    constituents: &[ClassPolytope],
    target: &ClassPolytope,
    denominator: u64,
    counts: &mut Vec<u64>,
    at: usize,
    remaining: u64,
    work: &mut Work,
) -> Result<Option<Vec<Rat>>, OracleError> {
    if at == counts.len() - 1 {
        counts[at] = remaining;
        let rho: Vec<Rat> = counts
            .iter()
            .map(|&c| Rat::new((c as i64).into(), (denominator as i64).into()))
            .collect();
        work.charge(1, "searching the weight grid")?;
        if combination_inside(constituents, &rho, target, work)? {
            return Ok(Some(rho));
        }
        return Ok(None);
    }
    for c in 0..=remaining {
        counts[at] = c;
        if let Some(hit) = grid_search(
            constituents,
            target,
            denominator,
            counts,
            at + 1,
            remaining - c,
            work,
        )? {
            return Ok(Some(hit));
        }
    }
    Ok(None)
}

/// Exact decision: does any weight vector make the combination of the
/// constituents a subset of the target? Grid search first (cheap witnesses),
/// then exhaustive basic-solution enumeration of the literal
/// corner-combination system.
fn exists_containment(
    constituents: &[ClassPolytope],
    target: &ClassPolytope,
    cfg: &OracleConfig,
    work: &mut Work,
) -> Result<bool, OracleError> {
    let k = constituents.len();
    if k == 0 {
        return Ok(false);
    }
    if k == 1 {
        return Ok(polytope_inside(&constituents[0], target));
    }
    if grid_containment_witness(constituents, target, cfg.grid_denominator, cfg.work_cap)?
        .is_some()
    {
        return Ok(true);
    }

    // literal system over rho: for every corner combination c and block b,
    //   lo_b <= Σ_i rho_i c_i(b) <= hi_b,
    // plus rho >= 0, with Σ rho = 1 held separately. All rows in
    // `coeffs · rho >= rhs` orientation.
    let vertex_sets: Vec<&[ClassDistribution]> = constituents
        .iter()
        .map(|c| c.vertices().expect("non-empty polytope"))
        .collect();
    let mut blocks: BTreeSet<BlockId> = target.support().collect();
    for c in constituents {
        blocks.extend(c.support());
    }
    let combos: usize = vertex_sets.iter().map(|v| v.len()).product();
    work.charge(
        combos.saturating_mul(blocks.len()),
        "building the containment system",
    )?;
    let mut rows: BTreeSet<(Vec<Rat>, Rat)> = BTreeSet::new();
    for i in 0..k {
        let mut e = vec![Rat::zero(); k];
        e[i] = Rat::one();
        rows.insert((e, Rat::zero()));
    }
    let mut pick = vec![0usize; k];
    'outer: loop {
        for &b in &blocks {
            let coeffs: Vec<Rat> = (0..k).map(|i| vertex_sets[i][pick[i]].weight(b)).collect();
            let bound = target.bound(b);
            rows.insert((coeffs.clone(), bound.lo().clone()));
            let neg: Vec<Rat> = coeffs.iter().map(|c| -c.clone()).collect();
            rows.insert((neg, -bound.hi().clone()));
        }
        let mut i = 0;
        loop {
            if i == k {
                break 'outer;
            }
            pick[i] += 1;
            if pick[i] < vertex_sets[i].len() {
                break;
            }
            pick[i] = 0;
            i += 1;
        }
    }
    let rows: Vec<(Vec<Rat>, Rat)> = rows.into_iter().collect();

    // The feasible set lives in the simplex, so it is bounded; if non-empty
    // it has a vertex given by Σ rho = 1 plus k-1 further active rows.
    let mut chosen: Vec<usize> = (0..k - 1).collect();
    loop {
        work.charge(1, "enumerating basic solutions")?;
        let mut m: Vec<Vec<Rat>> = Vec::with_capacity(k);
        let mut rhs: Vec<Rat> = Vec::with_capacity(k);
        m.push(vec![Rat::one(); k]);
        rhs.push(Rat::one());
        for &ri in &chosen {
            m.push(rows[ri].0.clone());
            rhs.push(rows[ri].1.clone());
        }
        if let Some(rho) = solve_unique(m, rhs) {
            let feasible = rows.iter().all(|(coeffs, b)| {
                let lhs = coeffs
                    .iter()
                    .zip(&rho)
                    .map(|(c, r)| c * r)
                    .fold(Rat::zero(), |a, x| a + x);
                lhs >= *b
            });
            if feasible {
                return Ok(true);
            }
        }
        // next (k-1)-combination of row indices
        if !next_combination(&mut chosen, rows.len()) {
            break;
        }
    }
    Ok(false)
}

/// Advances `subset` to the next combination out of `n`; false when done.
fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let size = subset.len();
    if size == 0 {
        return false;
    }
    let mut k = size;
    while k > 0 {
        k -= 1;
        if subset[k] != k + n - size {
            subset[k] += 1;
            for j in (k + 1)..size {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

// ---------------------------------------------------------------------------
// the oracle's refinement loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Signature {
    Coop(Vec<ClassDistribution>),
    Comp(BTreeSet<PolytopeKey>),
}

fn oracle_signature(
    m: &Imdp,
    s: StateId,
    p: &Partition,
    kind: BisimKind,
    cfg: &OracleConfig,
) -> Result<Signature, OracleError> {
    match kind {
        BisimKind::Cooperative => {
            let mut pool: Vec<ClassDistribution> = Vec::new();
            for &a in m.enabled(s) {
                let poly = class_polytope(m, s, a, p).expect("valid model");
                pool.extend(poly.vertices().expect("valid model").iter().cloned());
            }
            Ok(Signature::Coop(extreme_points(&pool, cfg.work_cap)?))
        }
        BisimKind::Competitive => {
            let distinct = distinct_polytopes(m, s, p).expect("valid model");
            let mut set = BTreeSet::new();
            let mut work = Work::new(cfg.work_cap);
            for (key, poly) in &distinct {
                let others: Vec<ClassPolytope> = distinct
                    .iter()
                    .filter(|(k, _)| k != key)
                    .map(|(_, q)| q.clone())
                    .collect();
                if !exists_containment(&others, poly, cfg, &mut work)? {
                    set.insert(key.clone());
                }
            }
            Ok(Signature::Comp(set))
        }
    }
}

/// Same contract as [`crate::bisim::bisimulation`], by an independent code
/// path; refuses models above `cfg.max_states`.
pub fn brute_force_bisimulation(
    m: &Imdp,
    kind: BisimKind,
    cfg: &OracleConfig,
) -> Result<Partition, OracleError> {
    if m.num_states() > cfg.max_states {
        return Err(OracleError::StateBound {
            states: m.num_states(),
            bound: cfg.max_states,
        });
    }
    // label grouping (independent of bisim::initial_partition)
    let mut label_blocks: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let mut block_of: Vec<usize> = Vec::with_capacity(m.num_states());
    for s in m.states() {
        let key: Vec<usize> = m.label(s).iter().map(|p| p.0).collect();
        let next = label_blocks.len();
        let id = *label_blocks.entry(key).or_insert(next);
        block_of.push(id);
    }
    let mut p = Partition::from_block_of(&block_of);
    loop {
        let mut sigs: Vec<Option<Signature>> = vec![None; m.num_states()];
        for s in m.states() {
            sigs[s.0] = Some(oracle_signature(m, s, &p, kind, cfg)?);
        }
        // group each block by signature
        let mut next_block_of = vec![0usize; m.num_states()];
        let mut next_id = 0usize;
        for (_, members) in p.blocks() {
            let mut groups: BTreeMap<&Signature, usize> = BTreeMap::new();
            for &s in members {
                let sig = sigs[s.0].as_ref().expect("computed above");
                let id = *groups.entry(sig).or_insert_with(|| {
                    let id = next_id;
                    next_id += 1;
                    id
                });
                next_block_of[s.0] = id;
            }
        }
        let refined = Partition::from_block_of(&next_block_of);
        if refined.num_blocks() == p.num_blocks() {
            return Ok(refined.canonicalize());
        }
        p = refined;
    }
}
