//! Fixture and model generators, the grid containment oracle, and
//! reduction reporting.
//!
//! All generators are deterministic in their parameters (and seed, for the
//! random family) and produce models that pass [`crate::model::validate`].

use num::traits::{One, ToPrimitive, Zero};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{class_polytope, distinct_polytopes, GeometryError};
use crate::interval::Interval;
use crate::model::{ActionId, Imdp, ImdpBuilder, StateId};
use crate::oracle::{grid_containment_witness, OracleError};
use crate::partition::Partition;
use crate::rational::{rat_int, Rat};

#[derive(Debug, Error)]
pub enum WorkbenchError {
    #[error("invalid interval parameter: {0}")]
    InvalidInterval(String),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

// ---------------------------------------------------------------------------
// fixtures
// ---------------------------------------------------------------------------

/// The six-pair fixture from the introduction example: top states
/// `s/sbar`, `t/tbar`, `u/ubar` over shared absorbing targets `l` and `r`.
pub fn gen_example1() -> Imdp {
    let iv = |lo: (i64, i64), hi: (i64, i64)| {
        Interval::new(Rat::new(lo.0.into(), lo.1.into()), Rat::new(hi.0.into(), hi.1.into()))
            .expect("fixture bounds")
    };
    let full = Interval::full();
    let mut b = ImdpBuilder::new();
    for s in ["s", "sbar", "t", "tbar", "u", "ubar", "l", "r"] {
        b.state(s);
    }
    b.label("l", "left").label("r", "right");
    b.row(
        "s",
        "a",
        vec![
            ("l".to_string(), iv((3, 10), (7, 10))),
            ("r".to_string(), full.clone()),
        ],
    );
    b.row(
        "s",
        "b",
        vec![
            ("r".to_string(), iv((2, 10), (6, 10))),
            ("l".to_string(), full.clone()),
        ],
    );
    b.row(
        "sbar",
        "a",
        vec![
            ("l".to_string(), iv((3, 10), (7, 10))),
            ("r".to_string(), full.clone()),
        ],
    );
    b.row(
        "sbar",
        "c",
        vec![
            ("r".to_string(), iv((7, 10), (8, 10))),
            ("l".to_string(), full.clone()),
        ],
    );
    b.row(
        "t",
        "a",
        vec![
            ("l".to_string(), iv((1, 10), (3, 10))),
            ("r".to_string(), iv((8, 10), (1, 1))),
        ],
    );
    b.row(
        "t",
        "b",
        vec![
            ("r".to_string(), full.clone()),
            ("l".to_string(), iv((2, 10), (6, 10))),
        ],
    );
    b.row(
        "tbar",
        "c",
        vec![
            ("l".to_string(), iv((1, 10), (1, 1))),
            ("r".to_string(), iv((4, 10), (9, 10))),
        ],
    );
    b.row(
        "tbar",
        "d",
        vec![
            ("r".to_string(), iv((0, 1), (8, 10))),
            ("l".to_string(), iv((2, 10), (4, 10))),
        ],
    );
    b.row(
        "u",
        "a",
        vec![
            ("l".to_string(), iv((1, 10), (6, 10))),
            ("r".to_string(), full.clone()),
        ],
    );
    b.row(
        "u",
        "b",
        vec![
            ("r".to_string(), full.clone()),
            ("l".to_string(), iv((0, 1), (6, 10))),
        ],
    );
    b.row(
        "ubar",
        "a",
        vec![
            ("l".to_string(), iv((1, 10), (6, 10))),
            ("r".to_string(), full.clone()),
        ],
    );
    b.row(
        "ubar",
        "c",
        vec![
            ("r".to_string(), full),
            ("l".to_string(), iv((1, 10), (8, 10))),
        ],
    );
    b.row("l", "loop", vec![("l".to_string(), Interval::one())]);
    b.row("r", "loop", vec![("r".to_string(), Interval::one())]);
    b.build().expect("fixture builds")
}

/// The closed wireless-sensor-network model: global states are the
/// fail/success status vectors of `n` sensors, action `send<i>` flips
/// sensor `i` to failed with probability in `p` and to successful with the
/// complementary interval. States are labelled `f<k>` by failure count, so
/// the label classes are the failure-count classes.
pub fn gen_wsn(n: usize, p: &Interval) -> Result<Imdp, WorkbenchError> {
    if n == 0 {
        return Err(WorkbenchError::BadParameter(
            "sensor count must be at least 1".into(),
        ));
    }
    if n > 20 {
        return Err(WorkbenchError::BadParameter(
            "sensor count above 20 would generate more than a million states".into(),
        ));
    }
    if p.hi() >= &Rat::one() {
        return Err(WorkbenchError::InvalidInterval(format!(
            "loss probability {p} must have upper bound below 1"
        )));
    }
    let fail = p.clone();
    let succ = Interval::new(Rat::one() - p.hi(), Rat::one() - p.lo()).expect("complement");
    let name = |mask: usize| -> String {
        let mut s = String::with_capacity(n + 1);
        s.push('c');
        for i in 0..n {
            s.push(if mask & (1 << i) != 0 { '1' } else { '0' });
        }
        s
    };
    let mut b = ImdpBuilder::new();
    for mask in 0..(1usize << n) {
        let state = name(mask);
        b.state(&state);
        b.label(&state, format!("f{}", (mask as u32).count_ones()));
        for i in 0..n {
            let fail_target = name(mask | (1 << i));
            let succ_target = name(mask & !(1 << i));
            b.row(
                &state,
                format!("send{i}"),
                vec![
                    (fail_target, fail.clone()),
                    (succ_target, succ.clone()),
                ],
            );
        }
    }
    b.initial(name(0));
    Ok(b.build().expect("generator builds"))
}

// ---------------------------------------------------------------------------
// CSMA-style contention model
// ---------------------------------------------------------------------------

/// Per-node protocol position of the contention model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeStatus {
    /// About to attempt a transmission, `m` collisions so far.
    Ready(u32),
    /// Just collided for the `m`-th time; picks a backoff delay.
    Backoff(u32),
    /// Counting down `d` remaining delay slots at collision level `m`.
    Wait(u32, u32),
    /// Frame delivered.
    Done,
}

impl NodeStatus {
    fn code(self) -> String {
        match self {
            NodeStatus::Ready(m) => format!("r{m}"),
            NodeStatus::Backoff(m) => format!("b{m}"),
            NodeStatus::Wait(m, d) => format!("w{m}-{d}"),
            NodeStatus::Done => "dn".to_string(),
        }
    }
}

/// A simplified shared-medium contention model with exponential backoff.
///
/// Each of `nodes` stations repeatedly attempts to transmit one frame.
/// An attempt either delivers the frame, suffers a collision (probability
/// known only up to the interval `p_collide`, scaled by the per-slot
/// transmission probability `p_send`), or stays put for this slot. After
/// the `m`-th collision a station nondeterministically picks a delay within
/// its contention window and counts it down before retrying; the window
/// doubles per collision and is capped after `max_collisions` doublings.
/// Stations are persistent (no abort), and the collision counter is carried
/// in the state up to a fixed ceiling of `max(4, max_collisions + 1)`
/// attempts, the way a naive explicit-state build of the protocol
/// description carries it. Global states are labelled `d<k>` by the number
/// of delivered frames.
pub fn gen_csma(
    nodes: usize,
    max_collisions: u32,
    p_send: &Interval,
    p_collide: &Interval,
) -> Imdp {
    assert!(nodes >= 2, "contention needs at least two nodes");
    assert!(max_collisions >= 1, "the backoff window must double at least once");
    let cap = max_collisions;
    let ceiling = 4u32.max(cap + 1);
    let window = |m: u32| -> u32 { 1 << m.min(cap) };

    let mut statuses: Vec<NodeStatus> = Vec::new();
    for m in 0..=ceiling {
        statuses.push(NodeStatus::Ready(m));
    }
    for m in 1..=ceiling {
        statuses.push(NodeStatus::Backoff(m));
        for d in 1..window(m) {
            statuses.push(NodeStatus::Wait(m, d));
        }
    }
    statuses.push(NodeStatus::Done);

    let global_name = |g: &[NodeStatus]| -> String {
        let codes: Vec<String> = g.iter().map(|s| s.code()).collect();
        format!("n{}", codes.join("_"))
    };

    // interval arithmetic for the attempt outcome
    let one = Rat::one();
    let deliver = Interval::new(
        p_send.lo() * (&one - p_collide.hi()),
        p_send.hi() * (&one - p_collide.lo()),
    )
    .expect("product of unit intervals");
    let collide = Interval::new(p_send.lo() * p_collide.lo(), p_send.hi() * p_collide.hi())
        .expect("product of unit intervals");
    let stay = Interval::new(&one - p_send.hi(), &one - p_send.lo()).expect("complement");

    let mut b = ImdpBuilder::new();
    let mut stack: Vec<Vec<NodeStatus>> = vec![Vec::new()];
    // cartesian product of per-node statuses
    let mut globals: Vec<Vec<NodeStatus>> = Vec::new();
    while let Some(partial) = stack.pop() {
        if partial.len() == nodes {
            globals.push(partial);
            continue;
        }
        for &st in statuses.iter().rev() {
            let mut next = partial.clone();
            next.push(st);
            stack.push(next);
        }
    }

    for g in &globals {
        let state = global_name(g);
        b.state(&state);
        let done = g.iter().filter(|s| matches!(s, NodeStatus::Done)).count();
        b.label(&state, format!("d{done}"));
        for (i, &st) in g.iter().enumerate() {
            let with = |ns: NodeStatus| -> String {
                let mut h = g.clone();
                h[i] = ns;
                global_name(&h)
            };
            match st {
                NodeStatus::Ready(m) => {
                    let next_level = (m + 1).min(ceiling);
                    let mut targets = vec![
                        (with(NodeStatus::Done), deliver.clone()),
                        (with(NodeStatus::Backoff(next_level)), collide.clone()),
                    ];
                    if !stay.is_zero() {
                        targets.push((state.clone(), stay.clone()));
                    }
                    b.row(&state, format!("attempt{i}"), targets);
                }
                NodeStatus::Backoff(m) => {
                    for d in 0..window(m) {
                        let target = if d == 0 {
                            with(NodeStatus::Ready(m))
                        } else {
                            with(NodeStatus::Wait(m, d))
                        };
                        b.row(
                            &state,
                            format!("pick{i}d{d}"),
                            vec![(target, Interval::one())],
                        );
                    }
                }
                NodeStatus::Wait(m, d) => {
                    let target = if d == 1 {
                        with(NodeStatus::Ready(m))
                    } else {
                        with(NodeStatus::Wait(m, d - 1))
                    };
                    b.row(&state, format!("tick{i}"), vec![(target, Interval::one())]);
                }
                NodeStatus::Done => {
                    b.row(&state, format!("idle{i}"), vec![(state.clone(), Interval::one())]);
                }
            }
        }
    }
    b.initial(global_name(&vec![NodeStatus::Ready(0); nodes]));
    b.build().expect("generator builds")
}

// ---------------------------------------------------------------------------
// random models
// ---------------------------------------------------------------------------

/// Parameters of the random model family used by the randomized batteries.
#[derive(Debug, Clone)]
pub struct RandomModelConfig {
    pub max_states: usize,
    pub max_actions_per_state: usize,
    pub max_fanout: usize,
    /// Denominator grid for generated probabilities.
    pub denominator: i64,
    /// Largest widening (in grid steps) applied around the sampled point
    /// distributions; zero generates point-interval models.
    pub max_slack_steps: i64,
}

impl Default for RandomModelConfig {
    fn default() -> Self {
        RandomModelConfig {
            max_states: 5,
            max_actions_per_state: 3,
            max_fanout: 3,
            denominator: 8,
            max_slack_steps: 2,
        }
    }
}

/// A random valid model. Beyond uniform noise, the generator plants
/// behavioural coincidences so that bisimulations have something to merge:
/// states may be clones of earlier states whose rows describe the same
/// polytopes with different interval syntax (redundant bounds tightened or
/// slackened), under permuted action names, optionally with an extra
/// widened (dominated-for-the-minimal-set) action.
pub fn gen_random(cfg: &RandomModelConfig, seed: u64) -> Imdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let den = cfg.denominator;
    let n = rng.gen_range(2..=cfg.max_states.max(2));
    let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let action_pool = ["a", "b", "c", "d"];

    // label classes from a small pool so labels often coincide
    let label_of = |class: usize| -> Vec<&'static str> {
        match class {
            0 => vec![],
            1 => vec!["p0"],
            _ => vec!["p1"],
        }
    };

    let mut b = ImdpBuilder::new();
    for s in &names {
        b.state(s);
    }

    // rows are kept around so later states can clone earlier ones
    type RawRow = Vec<(usize, Rat, Rat)>; // (target, lo, hi)
    let mut state_rows: Vec<Vec<RawRow>> = Vec::new();
    let mut state_class: Vec<usize> = Vec::new();

    for s in 0..n {
        let clone_source = if s > 0 && rng.gen_bool(0.45) {
            Some(rng.gen_range(0..s))
        } else {
            None
        };
        let (rows, class) = match clone_source {
            Some(src) => {
                let mut rows: Vec<RawRow> = state_rows[src]
                    .iter()
                    .map(|row| resyntax_row(row, den, cfg.max_slack_steps, &mut rng))
                    .collect();
                if rows.len() < action_pool.len() && rng.gen_bool(0.3) {
                    let donor = rows[rng.gen_range(0..rows.len())].clone();
                    rows.push(widen_row(&donor, den, cfg.max_slack_steps, &mut rng));
                }
                (rows, state_class[src])
            }
            None => {
                let num_actions = rng.gen_range(1..=cfg.max_actions_per_state);
                let rows = (0..num_actions)
                    .map(|_| random_row(n, cfg.max_fanout, den, cfg.max_slack_steps, &mut rng))
                    .collect();
                (rows, rng.gen_range(0..3))
            }
        };
        for p in label_of(class) {
            b.label(&names[s], p);
        }
        // permuted action names keep the bisimulations honest about ignoring them
        let mut action_order: Vec<usize> = (0..rows.len()).collect();
        action_order.shuffle(&mut rng);
        for (row, &ai) in rows.iter().zip(&action_order) {
            let targets: Vec<(String, Interval)> = row
                .iter()
                .map(|(t, lo, hi)| {
                    let iv = Interval::new(lo.clone(), hi.clone()).expect("generated bounds");
                    (names[*t].clone(), iv)
                })
                .collect();
            b.row(&names[s], action_pool[ai], targets);
        }
        state_rows.push(rows);
        state_class.push(class);
    }
    let m = b.build().expect("generator builds");
    debug_assert!(crate::model::validate(&m).is_valid());
    m
}

/// A feasible random row: a point distribution on up to `max_fanout`
/// targets, widened by random slack on both sides.
fn random_row(
    n: usize,
    max_fanout: usize,
    den: i64,
    slack: i64,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, Rat, Rat)> {
    let fanout = rng.gen_range(1..=max_fanout.min(n));
    let mut targets: Vec<usize> = (0..n).collect();
    targets.shuffle(rng);
    targets.truncate(fanout);
    // random composition of `den` into `fanout` nonnegative parts
    let mut cuts: Vec<i64> = (0..fanout - 1).map(|_| rng.gen_range(0..=den)).collect();
    cuts.sort_unstable();
    cuts.insert(0, 0);
    cuts.push(den);
    let mut row = Vec::with_capacity(fanout);
    for (i, &t) in targets.iter().enumerate() {
        let mass = Rat::new((cuts[i + 1] - cuts[i]).into(), den.into());
        let slack_lo = Rat::new(rng.gen_range(0..=slack).into(), den.into());
        let slack_hi = Rat::new(rng.gen_range(0..=slack).into(), den.into());
        let lo = (&mass - slack_lo).max(Rat::zero());
        let hi = (&mass + slack_hi).min(Rat::one());
        if hi.is_zero() {
            continue;
        }
        row.push((t, lo, hi));
    }
    if row.is_empty() {
        // all mass collapsed to a dropped zero entry; put a Dirac somewhere
        row.push((targets[0], Rat::one(), Rat::one()));
    }
    row
}

/// Rewrites interval bounds without changing the described polytope:
/// tightens a bound to its implied extreme or slackens an already redundant
/// bound further.
fn resyntax_row(
    row: &[(usize, Rat, Rat)],
    den: i64,
    slack: i64,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, Rat, Rat)> {
    if slack == 0 {
        // point rows have no redundant bounds to rewrite
        return row.to_vec();
    }
    let sum_lo: Rat = row.iter().map(|(_, lo, _)| lo.clone()).fold(Rat::zero(), |a, b| a + b);
    let sum_hi: Rat = row.iter().map(|(_, _, hi)| hi.clone()).fold(Rat::zero(), |a, b| a + b);
    let one = Rat::one();
    row.iter()
        .map(|(t, lo, hi)| {
            let others_hi = &sum_hi - hi;
            let others_lo = &sum_lo - lo;
            // feasible range of this coordinate inside the row polytope
            let implied_lo = (&one - &others_hi).max(Rat::zero()).max(lo.clone());
            let implied_hi = (&one - &others_lo).min(Rat::one()).min(hi.clone());
            let mut new_lo = lo.clone();
            let mut new_hi = hi.clone();
            match rng.gen_range(0..3) {
                0 => new_lo = implied_lo.clone(),
                1 => {
                    // slacken when redundant: any lower value keeps the set
                    let redundancy_edge = (&one - &others_hi).max(Rat::zero());
                    if *lo <= redundancy_edge {
                        let steps = (redundancy_edge.clone() * rat_int(den)).floor().to_integer();
                        let steps: i64 = steps.try_into().unwrap_or(0);
                        if steps >= 0 {
                            new_lo = Rat::new(rng.gen_range(0..=steps).into(), den.into());
                        }
                    }
                }
                _ => {}
            }
            match rng.gen_range(0..3) {
                0 => new_hi = implied_hi.clone(),
                1 => {
                    let redundancy_edge = (&one - &others_lo).min(Rat::one());
                    if *hi >= redundancy_edge {
                        let lo_steps = (redundancy_edge.clone() * rat_int(den)).ceil().to_integer();
                        let lo_steps: i64 = lo_steps.try_into().unwrap_or(den);
                        if lo_steps <= den {
                            new_hi = Rat::new(rng.gen_range(lo_steps..=den).into(), den.into());
                        }
                    }
                }
                _ => {}
            }
            if new_lo > new_hi {
                // mutations collided; fall back to the original bounds
                (*t, lo.clone(), hi.clone())
            } else {
                (*t, new_lo, new_hi)
            }
        })
        .collect()
}

/// A strictly wider copy of a row: a polytope containing the original, so
/// the strictly-minimal set is unchanged while the hull may grow.
fn widen_row(
    row: &[(usize, Rat, Rat)],
    den: i64,
    slack: i64,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, Rat, Rat)> {
    row.iter()
        .map(|(t, lo, hi)| {
            let slack_lo = Rat::new(rng.gen_range(0..=slack).into(), den.into());
            let slack_hi = Rat::new(rng.gen_range(0..=slack).into(), den.into());
            let new_lo = (lo - slack_lo).max(Rat::zero());
            let new_hi = (hi + slack_hi).min(Rat::one());
            (*t, new_lo, new_hi)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// grid containment oracle
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GridOracleConfig {
    pub denominator: u64,
    /// Cap on grid points times corner combinations.
    pub combination_cap: usize,
}

impl Default for GridOracleConfig {
    fn default() -> Self {
        GridOracleConfig {
            denominator: 8,
            combination_cap: 4_000_000,
        }
    }
}

/// Searches the weight grid for a witness that some combination of the
/// remaining distinct polytopes of `(s, a)` fits inside `H(s,a,P)`.
///
/// Sound one way only: a witness implies [`crate::geometry::strictly_minimal`]
/// must return false; absence of a grid witness decides nothing.
pub fn grid_containment_oracle(
    m: &Imdp,
    s: StateId,
    a: ActionId,
    p: &Partition,
    cfg: &GridOracleConfig,
) -> Result<bool, WorkbenchError> {
    let target = class_polytope(m, s, a, p)?;
    let target_key = target.canonical()?;
    let others: Vec<_> = distinct_polytopes(m, s, p)?
        .into_iter()
        .filter(|(key, _)| key != &target_key)
        .map(|(_, poly)| poly)
        .collect();
    if others.is_empty() {
        return Ok(false);
    }
    let witness =
        grid_containment_witness(&others, &target, cfg.denominator, cfg.combination_cap)?;
    Ok(witness.is_some())
}

// ---------------------------------------------------------------------------
// reduction reporting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionReport {
    pub original_states: usize,
    pub original_transitions: usize,
    pub quotient_states: usize,
    pub quotient_transitions: usize,
}

impl ReductionReport {
    /// `1 - quotient/original`, exactly.
    pub fn state_reduction_factor(&self) -> Rat {
        reduction_factor(self.original_states, self.quotient_states)
    }

    pub fn transition_reduction_factor(&self) -> Rat {
        reduction_factor(self.original_transitions, self.quotient_transitions)
    }

    /// Machine-readable `key=value` lines; exact rationals.
    pub fn render_kv(&self) -> String {
        format!(
            "originalStates={}\noriginalTransitions={}\nquotientStates={}\nquotientTransitions={}\nstateReductionFactor={}\ntransitionReductionFactor={}\n",
            self.original_states,
            self.original_transitions,
            self.quotient_states,
            self.quotient_transitions,
            self.state_reduction_factor(),
            self.transition_reduction_factor(),
        )
    }

    /// Aligned human-readable table.
    pub fn render_table(&self) -> String {
        let percent = |r: &Rat| -> String {
            let v = r.to_f64().unwrap_or(f64::NAN) * 100.0;
            format!("{v:.2}%")
        };
        let sf = self.state_reduction_factor();
        let tf = self.transition_reduction_factor();
        let mut out = String::new();
        out.push_str(&format!(
            "{:<20} {:>12} {:>14}\n",
            "", "states", "transitions"
        ));
        out.push_str(&format!(
            "{:<20} {:>12} {:>14}\n",
            "original", self.original_states, self.original_transitions
        ));
        out.push_str(&format!(
            "{:<20} {:>12} {:>14}\n",
            "minimised", self.quotient_states, self.quotient_transitions
        ));
        out.push_str(&format!(
            "{:<20} {:>12} {:>14}\n",
            "reduction factor",
            percent(&sf),
            percent(&tf)
        ));
        out
    }
}

fn reduction_factor(original: usize, quotient: usize) -> Rat {
    if original == 0 {
        return Rat::zero();
    }
    Rat::one() - Rat::new((quotient as i64).into(), (original as i64).into())
}

pub fn reduction_report(original: &Imdp, quotient: &Imdp) -> ReductionReport {
    let mo = crate::model::metrics(original);
    let mq = crate::model::metrics(quotient);
    ReductionReport {
        original_states: mo.state_count,
        original_transitions: mo.transition_count,
        quotient_states: mq.state_count,
        quotient_transitions: mq.transition_count,
    }
}
