//! Restricted parallel composition.
//!
//! Binary CSP-style product with an explicit synchronisation set. Actions
//! in `sync` fire only when enabled in both components and must carry point
//! intervals on every target in both components — synchronising uncertain
//! actions would need non-interval constraints, so it is rejected up front.
//! Any other action interleaves: one component moves, the other idles with
//! a point self-distribution.
//!
//! Product states are the reachable pairs from the two initial states,
//! named `s1|s2`, labelled with the union of the component labels. An
//! interleaved action keeps its name unless both components use the same
//! name outside `sync`; colliding names get an `l.`/`r.` prefix so each
//! `(state, action)` pair keeps a single transition row.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::interval::Interval;
use crate::model::{ActionId, Imdp, ImdpBuilder, ModelError, StateId};
use crate::rational::Rat;

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("component {component} has no initial state; composition pairs the initial states")]
    MissingInitial { component: usize },
    #[error(
        "synchronised action `{action}` carries a non-point interval in component {component}, state `{state}`"
    )]
    SyncUncertainty {
        component: usize,
        state: String,
        action: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub fn compose(m1: &Imdp, m2: &Imdp, sync: &BTreeSet<String>) -> Result<Imdp, ComposeError> {
    let i1 = m1.initial().ok_or(ComposeError::MissingInitial { component: 1 })?;
    let i2 = m2.initial().ok_or(ComposeError::MissingInitial { component: 2 })?;

    let used1 = used_actions(m1);
    let used2 = used_actions(m2);
    // a synchronised action that can actually fire must be point-valued on
    // both sides
    for name in sync {
        if used1.contains(name.as_str()) && used2.contains(name.as_str()) {
            check_point_only(m1, 1, name)?;
            check_point_only(m2, 2, name)?;
        }
    }
    let collides = |name: &str| -> bool {
        !sync.contains(name) && used1.contains(name) && used2.contains(name)
    };

    let pair_name =
        |s1: StateId, s2: StateId| format!("{}|{}", m1.state_name(s1), m2.state_name(s2));

    let mut builder = ImdpBuilder::new();
    let mut seen: BTreeSet<(StateId, StateId)> = BTreeSet::new();
    let mut queue: VecDeque<(StateId, StateId)> = VecDeque::new();
    seen.insert((i1, i2));
    queue.push_back((i1, i2));
    builder.initial(pair_name(i1, i2));

    while let Some((s1, s2)) = queue.pop_front() {
        let state = pair_name(s1, s2);
        builder.state(&state);
        for &p in m1.label(s1) {
            builder.label(&state, m1.props()[p.0].as_str());
        }
        for &p in m2.label(s2) {
            builder.label(&state, m2.props()[p.0].as_str());
        }

        let mut reach = |t1: StateId, t2: StateId| {
            if seen.insert((t1, t2)) {
                queue.push_back((t1, t2));
            }
        };

        // interleaving moves of the left component
        for &a in m1.enabled(s1) {
            let name = m1.action_name(a);
            if sync.contains(name) {
                continue;
            }
            let final_name = if collides(name) {
                format!("l.{name}")
            } else {
                name.to_string()
            };
            let row = m1.row(s1, a).expect("enabled row");
            let targets: Vec<(String, Interval)> = row
                .iter()
                .map(|(t1, iv)| {
                    reach(*t1, s2);
                    (pair_name(*t1, s2), iv.clone())
                })
                .collect();
            builder.row(&state, final_name, targets);
        }
        // interleaving moves of the right component
        for &a in m2.enabled(s2) {
            let name = m2.action_name(a);
            if sync.contains(name) {
                continue;
            }
            let final_name = if collides(name) {
                format!("r.{name}")
            } else {
                name.to_string()
            };
            let row = m2.row(s2, a).expect("enabled row");
            let targets: Vec<(String, Interval)> = row
                .iter()
                .map(|(t2, iv)| {
                    reach(s1, *t2);
                    (pair_name(s1, *t2), iv.clone())
                })
                .collect();
            builder.row(&state, final_name, targets);
        }
        // synchronised moves: pointwise product of the two point rows
        for name in sync {
            let (Some(a1), Some(a2)) = (m1.action_index(name), m2.action_index(name)) else {
                continue;
            };
            let (Some(row1), Some(row2)) = (m1.row(s1, a1), m2.row(s2, a2)) else {
                continue;
            };
            let mut product: BTreeMap<(StateId, StateId), Rat> = BTreeMap::new();
            for (t1, iv1) in row1 {
                for (t2, iv2) in row2 {
                    let p = iv1.lo() * iv2.lo();
                    product.insert((*t1, *t2), p);
                }
            }
            let targets: Vec<(String, Interval)> = product
                .into_iter()
                .map(|((t1, t2), p)| {
                    reach(t1, t2);
                    let iv = Interval::point(p).expect("product of probabilities");
                    (pair_name(t1, t2), iv)
                })
                .collect();
            builder.row(&state, name, targets);
        }
    }
    Ok(builder.build()?)
}

fn used_actions(m: &Imdp) -> BTreeSet<&str> {
    m.rows().map(|(_, a, _)| m.action_name(a)).collect()
}

fn check_point_only(m: &Imdp, component: usize, action: &str) -> Result<(), ComposeError> {
    let Some(a): Option<ActionId> = m.action_index(action) else {
        return Ok(());
    };
    for s in m.states() {
        if let Some(row) = m.row(s, a) {
            if row.iter().any(|(_, iv)| !iv.is_point()) {
                return Err(ComposeError::SyncUncertainty {
                    component,
                    state: m.state_name(s).to_string(),
                    action: action.to_string(),
                });
            }
        }
    }
    Ok(())
}
