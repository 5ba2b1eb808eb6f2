//! Property batteries for the geometric and refinement invariants.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use imdp_core::bisim::{
    bisimulation, bisimulation_in_order, bisimulation_with_sweeps, initial_partition, violate_coop,
    BisimKind,
};
use imdp_core::format::{parse, serialize};
use imdp_core::geometry::{
    class_polytope, combination_point, hull_equal, hull_family, member_of_hull, strictly_minimal,
    ClassDistribution, ClassPolytope, HullFamily, WeightVector,
};
use imdp_core::interval::Interval;
use imdp_core::model::StateId;
use imdp_core::partition::BlockId;
use imdp_core::rational::{rat, Rat};
use imdp_core::workbench::{
    gen_random, gen_wsn, grid_containment_oracle, GridOracleConfig, RandomModelConfig,
};
use num::traits::{One, Zero};

fn random_polytope(rng: &mut ChaCha8Rng, max_blocks: usize) -> ClassPolytope {
    let k = rng.gen_range(1..=max_blocks);
    let den = 8i64;
    let mut cuts: Vec<i64> = (0..k - 1).map(|_| rng.gen_range(0..=den)).collect();
    cuts.sort_unstable();
    cuts.insert(0, 0);
    cuts.push(den);
    let mut bounds = Vec::with_capacity(k);
    for i in 0..k {
        let mass = Rat::new((cuts[i + 1] - cuts[i]).into(), den.into());
        let lo = (&mass - rat(rng.gen_range(0..=2), den)).max(Rat::zero());
        let hi = (&mass + rat(rng.gen_range(0..=2), den)).min(Rat::one());
        bounds.push((BlockId(i), Interval::new(lo, hi).unwrap()));
    }
    ClassPolytope::from_bounds(max_blocks, bounds)
}

/// All grid distributions with the given denominator inside the box of a
/// polytope's bounds.
fn grid_points(poly: &ClassPolytope, den: i64) -> Vec<ClassDistribution> {
    let blocks: Vec<BlockId> = poly.support().collect();
    let mut out = Vec::new();
    let mut current: Vec<i64> = Vec::new();
    fn rec(
        poly: &ClassPolytope,
        blocks: &[BlockId],
        den: i64,
        at: usize,
        left: i64,
        current: &mut Vec<i64>,
        out: &mut Vec<ClassDistribution>,
    ) {
        if at == blocks.len() {
            if left == 0 {
                let weights = blocks
                    .iter()
                    .zip(current.iter())
                    .filter(|(_, &c)| c > 0)
                    .map(|(&b, &c)| (b, Rat::new(c.into(), den.into())))
                    .collect();
                out.push(
                    ClassDistribution::new(poly.num_blocks(), weights).expect("grid distribution"),
                );
            }
            return;
        }
        for c in 0..=left {
            let w = Rat::new(c.into(), den.into());
            if !poly.bound(blocks[at]).contains(&w) {
                continue;
            }
            current.push(c);
            rec(poly, blocks, den, at + 1, left - c, current, out);
            current.pop();
        }
    }
    rec(poly, &blocks, den, 0, den, &mut current, &mut out);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Every feasible grid point with denominator 8 is recognised as a hull
    /// member of its own polytope: the enumerated vertex set spans the
    /// whole H-form.
    #[test]
    fn grid_points_inside_own_hull(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let poly = random_polytope(&mut rng, 4);
        prop_assume!(!poly.is_empty());
        let fam = HullFamily::new(vec![poly.clone()]).unwrap();
        for point in grid_points(&poly, 8) {
            prop_assert!(poly.contains(&point));
            prop_assert!(member_of_hull(&point, &fam).unwrap());
        }
    }

    /// Corner bound and exact H-form satisfaction for every vertex.
    #[test]
    fn vertex_bound_and_soundness(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let poly = random_polytope(&mut rng, 5);
        prop_assume!(!poly.is_empty());
        let verts = poly.vertices().unwrap();
        let k = poly.bounds().len();
        prop_assert!(verts.len() <= k.max(1) * (1 << k.saturating_sub(1)));
        for v in verts {
            prop_assert!(poly.contains(v));
        }
    }

    /// Hull equality is reflexive, symmetric and stable under member
    /// reordering and duplication.
    #[test]
    fn hull_equality_is_an_equivalence_shape(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut members = Vec::new();
        for _ in 0..rng.gen_range(1..=3usize) {
            let p = random_polytope(&mut rng, 3);
            if !p.is_empty() {
                members.push(p);
            }
        }
        prop_assume!(!members.is_empty());
        let f1 = HullFamily::new(members.clone()).unwrap();
        prop_assert!(hull_equal(&f1, &f1).unwrap());
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        shuffled.push(members[0].clone());
        let f2 = HullFamily::new(shuffled).unwrap();
        prop_assert!(hull_equal(&f1, &f2).unwrap());
        prop_assert!(hull_equal(&f2, &f1).unwrap());
    }

    /// The combination criterion: a weighted combination polytope sits
    /// inside a target iff every corner combination does. Random corner
    /// mixtures of the combination polytope stay inside whenever the corner
    /// criterion holds; a violating corner is itself a point of the
    /// combination polytope outside the target.
    #[test]
    fn combination_criterion_equivalence(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..=3usize);
        let constituents: Vec<ClassPolytope> = (0..k)
            .map(|_| loop {
                let p = random_polytope(&mut rng, 3);
                if !p.is_empty() {
                    return p;
                }
            })
            .collect();
        let target = loop {
            let p = random_polytope(&mut rng, 3);
            if !p.is_empty() {
                break p;
            }
        };
        // a random weight vector on the grid
        let den = 8i64;
        let mut cuts: Vec<i64> = (0..k - 1).map(|_| rng.gen_range(0..=den)).collect();
        cuts.sort_unstable();
        cuts.insert(0, 0);
        cuts.push(den);
        let rho = WeightVector::new(
            (0..k)
                .map(|i| Rat::new((cuts[i + 1] - cuts[i]).into(), den.into()))
                .collect(),
        )
        .unwrap();

        // the literal corner-combination criterion
        let vertex_sets: Vec<&[ClassDistribution]> = constituents
            .iter()
            .map(|c| c.vertices().unwrap())
            .collect();
        let mut all_inside = true;
        let mut witness_outside: Option<ClassDistribution> = None;
        let mut pick = vec![0usize; k];
        'outer: loop {
            let corners: Vec<&ClassDistribution> =
                (0..k).map(|i| &vertex_sets[i][pick[i]]).collect();
            let point = combination_point(&rho, &corners).unwrap();
            if !target.contains(&point) {
                all_inside = false;
                witness_outside = Some(point);
                break;
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

        if all_inside {
            // sampled points of the combination polytope stay inside
            for _ in 0..10 {
                let corners: Vec<ClassDistribution> = vertex_sets
                    .iter()
                    .map(|vs| {
                        // random convex mix of two vertices on the grid
                        let a = &vs[rng.gen_range(0..vs.len())];
                        let b = &vs[rng.gen_range(0..vs.len())];
                        let w = rat(rng.gen_range(0..=8), 8);
                        let mix = WeightVector::new(vec![w.clone(), Rat::one() - w]).unwrap();
                        combination_point(&mix, &[a, b]).unwrap()
                    })
                    .collect();
                let refs: Vec<&ClassDistribution> = corners.iter().collect();
                let point = combination_point(&rho, &refs).unwrap();
                prop_assert!(target.contains(&point));
            }
        } else {
            // the violating corner combination certifies non-containment
            prop_assert!(!target.contains(&witness_outside.unwrap()));
        }
    }

    /// Refinement is order independent: shuffling the state iteration order
    /// yields the identical partition.
    #[test]
    fn order_independence(seed in 0u64..10_000, shuffle_seed in 0u64..10_000) {
        let cfg = RandomModelConfig::default();
        let m = gen_random(&cfg, seed);
        let mut order: Vec<StateId> = m.states().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
        order.shuffle(&mut rng);
        for kind in [BisimKind::Cooperative, BisimKind::Competitive] {
            let natural = bisimulation(&m, kind);
            let shuffled = bisimulation_in_order(&m, kind, &order);
            prop_assert_eq!(&natural, &shuffled);
        }
    }

    /// Monotone refinement: the result refines the label partition and the
    /// sweep count respects the split budget.
    #[test]
    fn refinement_is_monotone_and_terminates_in_budget(seed in 0u64..10_000) {
        let cfg = RandomModelConfig::default();
        let m = gen_random(&cfg, seed);
        let order: Vec<StateId> = m.states().collect();
        let init = initial_partition(&m);
        for kind in [BisimKind::Cooperative, BisimKind::Competitive] {
            let (p, sweeps) = bisimulation_with_sweeps(&m, kind, &order);
            prop_assert!(p.refines(&init));
            prop_assert!(sweeps <= m.num_states() - init.num_blocks() + 1);
        }
    }

    /// Parse of a serialisation is the identity.
    #[test]
    fn parse_serialize_roundtrip(seed in 0u64..10_000) {
        let cfg = RandomModelConfig::default();
        let m = gen_random(&cfg, seed);
        let text = serialize(&m);
        let back = parse(&text).unwrap();
        prop_assert_eq!(&m, &back);
        prop_assert_eq!(serialize(&back), text);
    }

    /// A grid containment witness always implies non-minimality.
    #[test]
    fn grid_witness_implies_not_strictly_minimal(seed in 0u64..10_000) {
        let cfg = RandomModelConfig::default();
        let m = gen_random(&cfg, seed);
        let p = initial_partition(&m);
        let grid_cfg = GridOracleConfig::default();
        for s in m.states() {
            for &a in m.enabled(s) {
                if grid_containment_oracle(&m, s, a, &p, &grid_cfg).unwrap() {
                    prop_assert!(!strictly_minimal(&m, s, a, &p).unwrap());
                }
            }
        }
    }

    /// Driver-level violation agrees with the pairwise operation.
    #[test]
    fn split_matches_pairwise_violate(seed in 0u64..10_000) {
        let cfg = RandomModelConfig::default();
        let m = gen_random(&cfg, seed);
        let p = bisimulation(&m, BisimKind::Cooperative);
        for (_, members) in p.blocks() {
            for &s in members {
                for &t in members {
                    prop_assert!(!violate_coop(&m, s, t, &p).unwrap());
                }
            }
        }
    }
}

/// On one-dimensional families (segments), the combination-containment
/// decision agrees with direct interval arithmetic: some mixture of the
/// remaining segments fits inside the target iff a single segment fits or
/// a two-segment mixture does (pairs suffice in the plane of endpoint
/// vectors).
#[test]
fn segment_containment_matches_interval_arithmetic() {
    use imdp_core::geometry::combination_fits_inside;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e9);
    let seg = |lo: Rat, hi: Rat| -> ClassPolytope {
        ClassPolytope::from_bounds(
            2,
            vec![
                (BlockId(0), Interval::new(lo, hi).unwrap()),
                (BlockId(1), Interval::full()),
            ],
        )
    };
    for _ in 0..300 {
        let rand_seg = |rng: &mut ChaCha8Rng| {
            let a = rng.gen_range(0..=8i64);
            let b = rng.gen_range(a..=8i64);
            (rat(a, 8), rat(b, 8))
        };
        let k = rng.gen_range(1..=3usize);
        let parts: Vec<(Rat, Rat)> = (0..k).map(|_| rand_seg(&mut rng)).collect();
        let (ta, tb) = rand_seg(&mut rng);
        let constituents: Vec<ClassPolytope> =
            parts.iter().map(|(a, b)| seg(a.clone(), b.clone())).collect();
        let target = seg(ta.clone(), tb.clone());

        // direct interval arithmetic: single segments, then pair mixtures;
        // in the plane of (lower, upper) endpoint pairs a feasible mixture
        // exists iff a vertex or an edge of their hull meets the feasible
        // quadrant, so pairs are enough
        let single = parts.iter().any(|(a, b)| a >= &ta && b <= &tb);
        let mut pair = false;
        'pairs: for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                let (ai, bi) = &parts[i];
                let (aj, bj) = &parts[j];
                // t*ai + (1-t)*aj >= ta  and  t*bi + (1-t)*bj <= tb, t in [0,1]
                let t_range_for = |ci: &Rat, cj: &Rat, bound: &Rat, at_least: bool| -> (Rat, Rat) {
                    // t*ci + (1-t)*cj  cmp  bound
                    let denom = ci - cj;
                    if denom.is_zero() {
                        let ok = if at_least { cj >= bound } else { cj <= bound };
                        if ok {
                            (Rat::zero(), Rat::one())
                        } else {
                            (Rat::one(), Rat::zero()) // empty
                        }
                    } else {
                        let cut = (bound - cj) / &denom;
                        let upward = denom > Rat::zero();
                        if at_least == upward {
                            (cut.max(Rat::zero()), Rat::one())
                        } else {
                            (Rat::zero(), cut.min(Rat::one()))
                        }
                    }
                };
                let (l1, u1) = t_range_for(ai, aj, &ta, true);
                let (l2, u2) = t_range_for(bi, bj, &tb, false);
                let lo = l1.max(l2);
                let hi = u1.min(u2);
                if lo <= hi {
                    pair = true;
                    break 'pairs;
                }
            }
        }
        let expected = single || pair;
        let got = combination_fits_inside(&constituents, &target).unwrap();
        assert_eq!(got, expected, "parts {parts:?} target [{ta},{tb}]");
    }
}

#[test]
fn wsn_quotient_law_up_to_twelve_sensors() {
    for (lo, hi) in [(1i64, 2i64), (3, 3), (1, 7)] {
        let p = Interval::new(rat(lo, 10), rat(hi, 10)).unwrap();
        for n in 1..=6usize {
            let m = gen_wsn(n, &p).unwrap();
            let part = bisimulation(&m, BisimKind::Cooperative);
            assert_eq!(part.num_blocks(), n + 1, "n = {n}, p = [{lo}/10,{hi}/10]");
        }
    }
    // the full range on the reference parameters
    let p = Interval::new(rat(1, 10), rat(2, 10)).unwrap();
    for n in 7..=12usize {
        let m = gen_wsn(n, &p).unwrap();
        let part = bisimulation(&m, BisimKind::Cooperative);
        assert_eq!(part.num_blocks(), n + 1, "n = {n}");
    }
}

/// The class polytopes of every generated model are non-empty for enabled
/// actions, and hull families over the initial partition are well formed.
#[test]
fn class_polytopes_of_valid_models_are_non_empty() {
    let cfg = RandomModelConfig::default();
    for seed in 0..40u64 {
        let m = gen_random(&cfg, seed);
        let p = initial_partition(&m);
        for s in m.states() {
            let fam = hull_family(&m, s, &p).unwrap();
            for member in fam.members() {
                assert!(!member.is_empty());
                assert!(!member.vertices().unwrap().is_empty());
            }
            for &a in m.enabled(s) {
                let poly = class_polytope(&m, s, a, &p).unwrap();
                let dump = poly.dump();
                assert!(!dump.is_empty());
            }
        }
    }
}

/// Unions of label classes are block-closed for any bisimulation, so the
/// query battery construction used in the acceptance suite is sound.
#[test]
fn bisimulations_refine_label_classes() {
    let cfg = RandomModelConfig::default();
    for seed in 0..40u64 {
        let m = gen_random(&cfg, seed);
        for kind in [BisimKind::Cooperative, BisimKind::Competitive] {
            let p = bisimulation(&m, kind);
            for (_, members) in p.blocks() {
                let label = m.label(members[0]);
                for &s in members {
                    assert_eq!(m.label(s), label);
                }
            }
        }
    }
}

/// Pools used in membership queries reject distributions over a different
/// block universe.
#[test]
fn block_mismatch_is_reported() {
    let poly = ClassPolytope::from_bounds(
        2,
        vec![
            (BlockId(0), Interval::full()),
            (BlockId(1), Interval::full()),
        ],
    );
    let fam = HullFamily::new(vec![poly]).unwrap();
    let foreign = ClassDistribution::new(
        3,
        [(BlockId(2), Rat::one())].into_iter().collect(),
    )
    .unwrap();
    assert!(member_of_hull(&foreign, &fam).is_err());
}

/// Two states of one block never split under a permuted revisit: stability
/// of the final partition as a fixpoint.
#[test]
fn final_partition_is_a_fixpoint() {
    let cfg = RandomModelConfig::default();
    for seed in 0..30u64 {
        let m = gen_random(&cfg, seed);
        for kind in [BisimKind::Cooperative, BisimKind::Competitive] {
            let p = bisimulation(&m, kind);
            let mut order: Vec<StateId> = m.states().collect();
            order.reverse();
            let again = bisimulation_in_order(&m, kind, &order);
            assert_eq!(p, again, "seed {seed} {kind:?}");
        }
    }
}

/// The outer/inner factorisation of the game values agrees with explicit
/// scheduler enumeration: maximin equals the best nature-adversarial value
/// over all deterministic time-dependent action maps, and minimax the
/// worst nature-friendly one.
#[test]
fn game_values_match_scheduler_enumeration() {
    use imdp_core::model::ActionId;
    use imdp_core::semantics::{extremal_bounded_until, QuantifierMode};

    let cfg = RandomModelConfig {
        max_states: 3,
        max_actions_per_state: 2,
        ..RandomModelConfig::default()
    };
    for seed in 0..25u64 {
        let m = gen_random(&cfg, seed);
        let n = m.num_states();
        let k = 2u32;
        let t1: BTreeSet<StateId> = m.states().collect();
        let t2: BTreeSet<StateId> = m
            .states()
            .filter(|s| !m.label(*s).is_empty())
            .collect();

        // nature-extremal value of one fixed time-dependent scheduler
        let fixed_sched_value = |choice: &[Vec<ActionId>], maximize_nature: bool| -> Vec<Rat> {
            let mut v: Vec<Rat> = m
                .states()
                .map(|s| if t2.contains(&s) { Rat::one() } else { Rat::zero() })
                .collect();
            for step in (0..k as usize).rev() {
                v = m
                    .states()
                    .map(|s| {
                        if t2.contains(&s) {
                            return Rat::one();
                        }
                        if !t1.contains(&s) {
                            return Rat::zero();
                        }
                        let a = choice[step][s.0];
                        let row = m.row(s, a).unwrap();
                        // nature's inner optimum over the row polytope, by
                        // enumerating its vertices (the acceptance path uses
                        // the greedy; this is the slow reference)
                        let poly = ClassPolytope::from_bounds(
                            n,
                            row.iter().map(|(t, iv)| (BlockId(t.0), iv.clone())).collect(),
                        );
                        let mut best: Option<Rat> = None;
                        for vx in poly.vertices().unwrap() {
                            let val: Rat = vx
                                .iter()
                                .map(|(b, w)| w * &v[b.0])
                                .fold(Rat::zero(), |a, x| a + x);
                            best = Some(match best {
                                None => val,
                                Some(cur) => {
                                    if maximize_nature {
                                        cur.max(val)
                                    } else {
                                        cur.min(val)
                                    }
                                }
                            });
                        }
                        best.unwrap()
                    })
                    .collect();
            }
            v
        };

        // every deterministic time-dependent action map
        let per_state: Vec<Vec<ActionId>> = m.states().map(|s| m.enabled(s).to_vec()).collect();
        let mut schedulers: Vec<Vec<Vec<ActionId>>> = vec![vec![]];
        for _ in 0..k {
            let mut next = Vec::new();
            // all per-state assignments for this step
            let mut step_maps: Vec<Vec<ActionId>> = vec![vec![]];
            for s in 0..n {
                let mut grown = Vec::new();
                for partial in &step_maps {
                    for &a in &per_state[s] {
                        let mut q = partial.clone();
                        q.push(a);
                        grown.push(q);
                    }
                }
                step_maps = grown;
            }
            for sched in &schedulers {
                for step_map in &step_maps {
                    let mut q = sched.clone();
                    q.push(step_map.clone());
                    next.push(q);
                }
            }
            schedulers = next;
        }

        let maximin = extremal_bounded_until(&m, &t1, &t2, k, QuantifierMode::MaxiMin);
        let minimax = extremal_bounded_until(&m, &t1, &t2, k, QuantifierMode::MiniMax);
        for s in m.states() {
            let best_adversarial = schedulers
                .iter()
                .map(|c| fixed_sched_value(c, false)[s.0].clone())
                .max()
                .unwrap();
            assert_eq!(maximin[s.0], best_adversarial, "seed {seed} maximin");
            let worst_friendly = schedulers
                .iter()
                .map(|c| fixed_sched_value(c, true)[s.0].clone())
                .min()
                .unwrap();
            assert_eq!(minimax[s.0], worst_friendly, "seed {seed} minimax");
        }
    }
}

/// Spot check: merged pairs of the cooperative bisimulation share one-step
/// next values, mirroring the bounded-until preservation at horizon 1.
#[test]
fn next_values_respect_cooperative_blocks() {
    use imdp_core::semantics::{extremal_next, QuantifierMode};
    let cfg = RandomModelConfig::default();
    for seed in 0..30u64 {
        let m = gen_random(&cfg, seed);
        let p = bisimulation(&m, BisimKind::Cooperative);
        // label-class union target
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t: BTreeSet<StateId> = {
            let mut classes: std::collections::BTreeMap<Vec<usize>, Vec<StateId>> =
                Default::default();
            for s in m.states() {
                classes
                    .entry(m.label(s).iter().map(|p| p.0).collect())
                    .or_default()
                    .push(s);
            }
            classes
                .values()
                .filter(|_| rng.gen_bool(0.5))
                .flatten()
                .copied()
                .collect()
        };
        for mode in [QuantifierMode::MinMin, QuantifierMode::MaxMax] {
            let v = extremal_next(&m, &t, mode);
            for (_, members) in p.blocks() {
                let first = &v[members[0].0];
                for &s in members {
                    assert_eq!(&v[s.0], first, "seed {seed} {mode:?}");
                }
            }
        }
    }
}
