//! Partition-refinement engines for the cooperative and competitive
//! bisimulations, and the quotient construction.
//!
//! Both engines follow the same refinement loop: start from the
//! label-equivalence partition and repeatedly split the block of each state
//! `s` into `D = { t : Violate(s,t,R) }` and the rest, until stable. They
//! differ only in the violation check:
//!
//! * cooperative: `s` and `t` violate iff the convex hulls of their action
//!   polytope families over the current blocks differ;
//! * competitive: they violate iff their sets of strictly minimal polytopes
//!   differ (as sets of canonical polytopes).
//!
//! Violation of a pair is equality of per-state fingerprints (the canonical
//! hull, respectively the canonical minimal set), so the loop caches one
//! fingerprint per state within a sweep and compares. Cached entries are
//! dropped as soon as a split could change them — a fingerprint depends on
//! the current partition only through the block ids of the state's own
//! successors, so exactly the predecessors of re-blocked states go stale.
//! Distinct states' fingerprints may be computed in parallel; splits are
//! applied by the coordinating loop only.

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{
    class_polytope, combination_fits_inside, distinct_polytopes, hull_equal, hull_family,
    ClassDistribution, GeometryError, PolytopeKey,
};
use crate::interval::Interval;
use crate::model::{Imdp, ImdpBuilder, ModelError, StateId};
use crate::partition::Partition;

pub use crate::oracle::{brute_force_bisimulation, OracleConfig, OracleError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BisimKind {
    /// `∼(∀)`: scheduler and nature resolved jointly.
    Cooperative,
    /// `∼(∃∀)`: the coinciding control/parameter-synthesis bisimulations.
    Competitive,
}

/// Blocks are the label-equivalence classes.
pub fn initial_partition(m: &Imdp) -> Partition {
    let mut seen: Vec<(&std::collections::BTreeSet<crate::model::PropId>, usize)> = Vec::new();
    let mut block_of = Vec::with_capacity(m.num_states());
    for s in m.states() {
        let label = m.label(s);
        let id = match seen.iter().find(|(l, _)| *l == label) {
            Some(&(_, id)) => id,
            None => {
                let id = seen.len();
                seen.push((label, id));
                id
            }
        };
        block_of.push(id);
    }
    Partition::from_block_of(&block_of)
}

/// Cooperative violation: the hulls of the two states' families differ.
pub fn violate_coop(
    m: &Imdp,
    s: StateId,
    t: StateId,
    p: &Partition,
) -> Result<bool, GeometryError> {
    let fs = hull_family(m, s, p)?;
    let ft = hull_family(m, t, p)?;
    Ok(!hull_equal(&fs, &ft)?)
}

/// Competitive violation: the canonical sets of strictly minimal polytopes
/// differ.
pub fn violate_comp(
    m: &Imdp,
    s: StateId,
    t: StateId,
    p: &Partition,
) -> Result<bool, GeometryError> {
    Ok(minimal_set(m, s, p)? != minimal_set(m, t, p)?)
}

/// The canonical strictly-minimal polytope set of a state.
pub fn minimal_set(
    m: &Imdp,
    s: StateId,
    p: &Partition,
) -> Result<BTreeSet<PolytopeKey>, GeometryError> {
    let distinct = distinct_polytopes(m, s, p)?;
    let mut set = BTreeSet::new();
    for (key, poly) in &distinct {
        let others: Vec<_> = distinct
            .iter()
            .filter(|(k, _)| k != key)
            .map(|(_, q)| q.clone())
            .collect();
        if !combination_fits_inside(&others, poly)? {
            set.insert(key.clone());
        }
    }
    Ok(set)
}

/// The canonical extreme-point set of `CH(s,P)`; equal fingerprints are
/// exactly hull equality (a polytope has a unique minimal vertex
/// representation).
pub fn hull_fingerprint(
    m: &Imdp,
    s: StateId,
    p: &Partition,
) -> Result<Vec<ClassDistribution>, GeometryError> {
    let fam = hull_family(m, s, p)?;
    Ok(extreme_filter(fam.vertex_pool()?))
}

/// Keeps exactly the extreme points of a deduplicated pool. The unique
/// maximiser or minimiser of any coordinate is certified extreme without an
/// LP; the rest fall back to exact hull membership against the other
/// points.
fn extreme_filter(pool: Vec<ClassDistribution>) -> Vec<ClassDistribution> {
    if pool.len() <= 2 {
        return pool;
    }
    let coords: BTreeSet<crate::partition::BlockId> =
        pool.iter().flat_map(|v| v.support()).collect();
    let mut certified = vec![false; pool.len()];
    for &c in &coords {
        let weights: Vec<crate::rational::Rat> = pool.iter().map(|v| v.weight(c)).collect();
        for pick_max in [false, true] {
            let best = weights
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| {
                    if pick_max {
                        a.cmp(b)
                    } else {
                        b.cmp(a)
                    }
                })
                .map(|(i, _)| i)
                .expect("non-empty pool");
            if weights
                .iter()
                .enumerate()
                .all(|(i, w)| i == best || w != &weights[best])
            {
                certified[best] = true;
            }
        }
    }
    pool.iter()
        .enumerate()
        .filter(|(i, v)| {
            if certified[*i] {
                return true;
            }
            let rest: Vec<ClassDistribution> = pool
                .iter()
                .enumerate()
                .filter(|(j, _)| j != i)
                .map(|(_, w)| w.clone())
                .collect();
            !crate::geometry::in_convex_hull(v, &rest)
        })
        .map(|(_, v)| v.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Fingerprint {
    Coop(Vec<ClassDistribution>),
    Comp(BTreeSet<PolytopeKey>),
}

/// A fingerprint with a precomputed hash; block scans compare hashes and
/// only fall back to deep equality on collision.
#[derive(Debug, Clone)]
struct HashedFp {
    hash: u64,
    fp: Fingerprint,
}

impl HashedFp {
    fn new(fp: Fingerprint) -> Self {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        fp.hash(&mut h);
        HashedFp { hash: h.finish(), fp }
    }

    fn same(&self, other: &HashedFp) -> bool {
        self.hash == other.hash && self.fp == other.fp
    }
}

fn fingerprint(m: &Imdp, s: StateId, p: &Partition, kind: BisimKind) -> HashedFp {
    HashedFp::new(match kind {
        BisimKind::Cooperative => {
            Fingerprint::Coop(hull_fingerprint(m, s, p).expect("valid model"))
        }
        BisimKind::Competitive => Fingerprint::Comp(minimal_set(m, s, p).expect("valid model")),
    })
}

/// The set of class-lifted H-forms of a state's rows. States sharing a
/// family key have the same polytope family and therefore the same
/// fingerprint, so one computation serves the whole group. Plain interval
/// sums; no vertex enumeration.
fn family_key(m: &Imdp, s: StateId, p: &Partition) -> Vec<Vec<(usize, Interval)>> {
    let rows: BTreeSet<Vec<(usize, Interval)>> = m
        .enabled(s)
        .iter()
        .map(|&a| {
            class_polytope(m, s, a, p)
                .expect("enabled action")
                .bounds()
                .iter()
                .map(|(b, iv)| (b.0, iv.clone()))
                .collect()
        })
        .collect();
    rows.into_iter().collect()
}

/// The coarsest bisimulation of the given kind, by partition refinement in
/// natural state order. Expects a valid model.
pub fn bisimulation(m: &Imdp, kind: BisimKind) -> Partition {
    let order: Vec<StateId> = m.states().collect();
    bisimulation_in_order(m, kind, &order)
}

/// Refinement with an explicit state iteration order. The result is the
/// coarsest fixpoint and therefore independent of the order; exposing the
/// order makes that property testable.
pub fn bisimulation_in_order(m: &Imdp, kind: BisimKind, order: &[StateId]) -> Partition {
    bisimulation_with_sweeps(m, kind, order).0
}

/// Like [`bisimulation_in_order`], also reporting the number of refinement
/// sweeps. Every sweep but the last splits at least one block, so the count
/// is at most `|S| - (initial blocks) + 1`.
pub fn bisimulation_with_sweeps(
    m: &Imdp,
    kind: BisimKind,
    order: &[StateId],
) -> (Partition, usize) {
    let n = m.num_states();
    // predecessor lists drive exact cache invalidation
    let mut preds: Vec<BTreeSet<StateId>> = vec![BTreeSet::new(); n];
    for (s, _, row) in m.rows() {
        for (t, _) in row {
            preds[t.0].insert(s);
        }
    }
    let mut p = initial_partition(m);
    // Fingerprints stay valid across sweeps until one of the state's
    // successors is re-blocked, so the cache is invalidated per split
    // rather than per sweep. A block whose members were all seen equal and
    // untouched since is skipped: every visit would compute an empty split.
    let mut cache: Vec<Option<HashedFp>> = vec![None; n];
    let mut uniform: Vec<bool> = vec![false; p.num_blocks()];
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut changed = false;
        for &s in order {
            let b = p.block_of(s);
            if uniform[b.0] {
                continue;
            }
            let members: Vec<StateId> = p.block(b).to_vec();
            if members.len() <= 1 {
                uniform[b.0] = true;
                continue;
            }
            let missing: Vec<StateId> = members
                .iter()
                .copied()
                .filter(|x| cache[x.0].is_none())
                .collect();
            // one fingerprint per distinct row family
            let mut groups: std::collections::HashMap<Vec<Vec<(usize, Interval)>>, Vec<StateId>> =
                std::collections::HashMap::new();
            for &x in &missing {
                groups.entry(family_key(m, x, &p)).or_default().push(x);
            }
            let groups: Vec<Vec<StateId>> = groups.into_values().collect();
            let computed: Vec<(Vec<StateId>, HashedFp)> = groups
                .into_par_iter()
                .map(|xs| {
                    let fp = fingerprint(m, xs[0], &p, kind);
                    (xs, fp)
                })
                .collect();
            for (xs, fp) in computed {
                for x in xs {
                    cache[x.0] = Some(fp.clone());
                }
            }
            let fp_s = cache[s.0].clone().expect("fingerprint just ensured");
            let detached: BTreeSet<StateId> = members
                .iter()
                .copied()
                .filter(|&t| {
                    t != s && !cache[t.0].as_ref().expect("block ensured").same(&fp_s)
                })
                .collect();
            if p.split(b, &detached) {
                changed = true;
                // the retained part is fingerprint-uniform; the detached part
                // may still mix and keeps its dirty status
                uniform[b.0] = true;
                uniform.push(false);
                debug_assert_eq!(uniform.len(), p.num_blocks());
                // fingerprints of predecessors of the re-blocked states are
                // stale; everything else still refers to unchanged block ids
                for &moved in &detached {
                    for &q in &preds[moved.0] {
                        if cache[q.0].take().is_some() {
                            uniform[p.block_of(q).0] = false;
                        }
                    }
                }
            } else {
                uniform[b.0] = true;
            }
        }
        if !changed {
            break;
        }
    }
    (p.canonicalize(), sweeps)
}

#[derive(Debug, Error)]
pub enum QuotientError {
    #[error("partition block {{{members}}} mixes labels")]
    NotLabelUniform { members: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The quotient IMDP of a bisimulation partition: one state per block, named
/// and labelled after the block's lexicographically least member, with class
/// intervals taken from that representative's rows.
pub fn quotient(m: &Imdp, p: &Partition) -> Result<Imdp, QuotientError> {
    assert_eq!(p.num_states(), m.num_states(), "partition over this model");
    let p = p.canonicalize();
    // label uniformity makes the quotient labelling well defined
    for (_, members) in p.blocks() {
        let first = m.label(members[0]);
        if members.iter().any(|&s| m.label(s) != first) {
            let names: Vec<&str> = members.iter().map(|&s| m.state_name(s)).collect();
            return Err(QuotientError::NotLabelUniform {
                members: names.join(" "),
            });
        }
    }
    let rep = |b: crate::partition::BlockId| -> StateId { p.block(b)[0] };
    let mut builder = ImdpBuilder::new();
    for (b, _) in p.blocks() {
        let r = rep(b);
        builder.state(m.state_name(r));
        for &prop in m.label(r) {
            builder.label(m.state_name(r), m.props()[prop.0].as_str());
        }
    }
    if let Some(init) = m.initial() {
        builder.initial(m.state_name(rep(p.block_of(init))));
    }
    for (b, _) in p.blocks() {
        let r = rep(b);
        for &a in m.enabled(r) {
            let poly = class_polytope(m, r, a, &p)?;
            let targets: Vec<(String, Interval)> = poly
                .bounds()
                .iter()
                .map(|(c, iv)| (m.state_name(rep(*c)).to_string(), iv.clone()))
                .collect();
            builder.row(m.state_name(r), m.action_name(a), targets);
        }
    }
    Ok(builder.build()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;
    use crate::workbench::gen_example1;

    fn block_names(m: &Imdp, p: &Partition) -> Vec<Vec<String>> {
        p.blocks()
            .map(|(_, members)| {
                members
                    .iter()
                    .map(|&s| m.state_name(s).to_string())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn initial_partition_groups_by_label() {
        let m = gen_example1();
        let p = initial_partition(&m);
        assert_eq!(p.num_blocks(), 3);
        let tops = m.state_index("s").unwrap();
        let u = m.state_index("u").unwrap();
        assert!(p.same_block(tops, u));
        let l = m.state_index("l").unwrap();
        let r = m.state_index("r").unwrap();
        assert!(!p.same_block(l, r));
    }

    #[test]
    fn initial_partition_extremes() {
        // all states identically labeled -> one block
        let mut b = ImdpBuilder::new();
        b.state("x").state("y");
        b.row("x", "a", vec![("x".to_string(), Interval::one())]);
        b.row("y", "a", vec![("y".to_string(), Interval::one())]);
        let m = b.build().unwrap();
        assert_eq!(initial_partition(&m).num_blocks(), 1);

        // all distinct -> discrete, and refinement stops immediately
        let mut b = ImdpBuilder::new();
        b.state("x").state("y");
        b.label("x", "px").label("y", "py");
        b.row("x", "a", vec![("x".to_string(), Interval::one())]);
        b.row("y", "a", vec![("y".to_string(), Interval::one())]);
        let m = b.build().unwrap();
        let p = bisimulation(&m, BisimKind::Cooperative);
        assert_eq!(p, Partition::discrete(2));
    }

    #[test]
    fn violate_ops_on_example1() {
        let m = gen_example1();
        let p = initial_partition(&m);
        let t = m.state_index("t").unwrap();
        let tbar = m.state_index("tbar").unwrap();
        let s = m.state_index("s").unwrap();
        let sbar = m.state_index("sbar").unwrap();
        let u = m.state_index("u").unwrap();
        let ubar = m.state_index("ubar").unwrap();
        assert!(!violate_coop(&m, t, tbar, &p).unwrap());
        assert!(violate_coop(&m, s, sbar, &p).unwrap());
        assert!(violate_coop(&m, u, ubar, &p).unwrap());
        assert!(!violate_coop(&m, s, s, &p).unwrap());
        assert!(violate_comp(&m, t, tbar, &p).unwrap());
        assert!(!violate_comp(&m, u, ubar, &p).unwrap());
        assert!(violate_comp(&m, s, sbar, &p).unwrap());
        assert!(!violate_comp(&m, u, u, &p).unwrap());
    }

    #[test]
    fn example1_cooperative_merges_exactly_t_tbar() {
        let m = gen_example1();
        let p = bisimulation(&m, BisimKind::Cooperative);
        let blocks = block_names(&m, &p);
        assert!(blocks.contains(&vec!["t".to_string(), "tbar".to_string()]));
        for single in ["s", "sbar", "u", "ubar"] {
            assert!(blocks.contains(&vec![single.to_string()]), "{blocks:?}");
        }
        assert_eq!(p.num_blocks(), 7);
    }

    #[test]
    fn example1_competitive_merges_exactly_u_ubar() {
        let m = gen_example1();
        let p = bisimulation(&m, BisimKind::Competitive);
        let blocks = block_names(&m, &p);
        assert!(blocks.contains(&vec!["u".to_string(), "ubar".to_string()]));
        for single in ["s", "sbar", "t", "tbar"] {
            assert!(blocks.contains(&vec![single.to_string()]), "{blocks:?}");
        }
        assert_eq!(p.num_blocks(), 7);
    }

    #[test]
    fn fingerprint_equality_matches_pairwise_violate() {
        let m = gen_example1();
        let p = initial_partition(&m);
        for s in m.states() {
            for t in m.states() {
                if !p.same_block(s, t) {
                    continue;
                }
                let coop_fp = hull_fingerprint(&m, s, &p).unwrap()
                    == hull_fingerprint(&m, t, &p).unwrap();
                assert_eq!(coop_fp, !violate_coop(&m, s, t, &p).unwrap());
                let comp_fp = minimal_set(&m, s, &p).unwrap() == minimal_set(&m, t, &p).unwrap();
                assert_eq!(comp_fp, !violate_comp(&m, s, t, &p).unwrap());
            }
        }
    }

    #[test]
    fn order_independence_on_example1() {
        let m = gen_example1();
        let natural = bisimulation(&m, BisimKind::Cooperative);
        let mut order: Vec<StateId> = m.states().collect();
        order.reverse();
        assert_eq!(natural, bisimulation_in_order(&m, BisimKind::Cooperative, &order));
        let natural = bisimulation(&m, BisimKind::Competitive);
        assert_eq!(natural, bisimulation_in_order(&m, BisimKind::Competitive, &order));
    }

    #[test]
    fn quotient_of_identity_partition_is_isomorphic() {
        let m = gen_example1();
        let q = quotient(&m, &Partition::discrete(m.num_states())).unwrap();
        assert_eq!(m, q);
    }

    #[test]
    fn quotient_collapses_t_block() {
        let m = gen_example1();
        let p = bisimulation(&m, BisimKind::Cooperative);
        let q = quotient(&m, &p).unwrap();
        assert_eq!(q.num_states(), 7);
        assert!(validate(&q).is_valid());
        assert!(q.state_index("t").is_some());
        assert!(q.state_index("tbar").is_none());
        // the representative keeps its two actions with class intervals
        let t = q.state_index("t").unwrap();
        assert_eq!(q.enabled(t).len(), 2);
    }

    #[test]
    fn quotient_rejects_mixed_labels() {
        let m = gen_example1();
        let p = Partition::unit(m.num_states());
        assert!(matches!(
            quotient(&m, &p),
            Err(QuotientError::NotLabelUniform { .. })
        ));
    }

    #[test]
    fn termination_within_split_budget() {
        // sweeps <= |S| - (initial blocks) + 1; checked indirectly: the
        // refinement of example1 stabilises and is a fixpoint under another
        // pass from its own blocks
        let m = gen_example1();
        let p = bisimulation(&m, BisimKind::Cooperative);
        for (_, members) in p.blocks() {
            for &s in members {
                for &t in members {
                    assert!(!violate_coop(&m, s, t, &p).unwrap());
                }
            }
        }
        assert!(p.refines(&initial_partition(&m)));
    }
}
