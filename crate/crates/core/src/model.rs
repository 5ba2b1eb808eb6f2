//! The interval MDP data model: states, actions, labels and a sparse
//! interval transition function, plus validation and size metrics.
//!
//! Models are immutable after construction and canonically ordered: state,
//! action and proposition tables are sorted lexicographically by name, so
//! two models with the same content compare equal regardless of declaration
//! order. Undeclared `(s,a,s')` triples denote the point interval `[0,0]`;
//! explicitly declared `[0,0]` entries are dropped at build time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::traits::{One, Zero};
use thiserror::Error;

use crate::interval::Interval;
use crate::rational::Rat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PropId(pub usize);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("duplicate state `{0}`")]
    DuplicateState(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("duplicate transition row for state `{state}` and action `{action}`")]
    DuplicateRow { state: String, action: String },
    #[error("duplicate target `{target}` in row ({state}, {action})")]
    DuplicateTarget {
        state: String,
        action: String,
        target: String,
    },
    #[error("model has no states")]
    NoStates,
}

/// One transition row: the sparse successor intervals of a `(state, action)`
/// pair. Targets are sorted by state id and never carry `[0,0]`.
pub type Row = Vec<(StateId, Interval)>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Imdp {
    states: Vec<String>,
    actions: Vec<String>,
    props: Vec<String>,
    labels: Vec<BTreeSet<PropId>>,
    initial: Option<StateId>,
    rows: BTreeMap<(StateId, ActionId), Row>,
    /// Enabled actions per state, derived from `rows`.
    enabled: Vec<Vec<ActionId>>,
}

impl Imdp {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.states.len()).map(StateId)
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.states[s.0]
    }

    pub fn state_index(&self, name: &str) -> Option<StateId> {
        self.states
            .binary_search_by(|n| n.as_str().cmp(name))
            .ok()
            .map(StateId)
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.actions[a.0]
    }

    pub fn action_index(&self, name: &str) -> Option<ActionId> {
        self.actions
            .binary_search_by(|n| n.as_str().cmp(name))
            .ok()
            .map(ActionId)
    }

    pub fn actions(&self) -> impl Iterator<Item = ActionId> {
        (0..self.actions.len()).map(ActionId)
    }

    pub fn props(&self) -> &[String] {
        &self.props
    }

    pub fn prop_index(&self, name: &str) -> Option<PropId> {
        self.props
            .binary_search_by(|n| n.as_str().cmp(name))
            .ok()
            .map(PropId)
    }

    pub fn label(&self, s: StateId) -> &BTreeSet<PropId> {
        &self.labels[s.0]
    }

    pub fn initial(&self) -> Option<StateId> {
        self.initial
    }

    pub fn enabled(&self, s: StateId) -> &[ActionId] {
        &self.enabled[s.0]
    }

    pub fn row(&self, s: StateId, a: ActionId) -> Option<&Row> {
        self.rows.get(&(s, a))
    }

    pub fn rows(&self) -> impl Iterator<Item = (StateId, ActionId, &Row)> {
        self.rows.iter().map(|(&(s, a), row)| (s, a, row))
    }

    /// The interval of `(s,a,t)`; `[0,0]` when undeclared.
    pub fn interval(&self, s: StateId, a: ActionId, t: StateId) -> Interval {
        self.row(s, a)
            .and_then(|row| {
                row.iter()
                    .find(|(tgt, _)| *tgt == t)
                    .map(|(_, iv)| iv.clone())
            })
            .unwrap_or_else(Interval::zero)
    }
}

/// Collects model parts by name and freezes them into a canonical [`Imdp`].
#[derive(Debug, Default, Clone)]
pub struct ImdpBuilder {
    states: BTreeSet<String>,
    labels: BTreeMap<String, BTreeSet<String>>,
    initial: Option<String>,
    rows: Vec<(String, String, Vec<(String, Interval)>)>,
}

impl ImdpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(&mut self, name: impl Into<String>) -> &mut Self {
        self.states.insert(name.into());
        self
    }

    pub fn label(&mut self, state: impl Into<String>, prop: impl Into<String>) -> &mut Self {
        self.labels
            .entry(state.into())
            .or_default()
            .insert(prop.into());
        self
    }

    pub fn initial(&mut self, state: impl Into<String>) -> &mut Self {
        self.initial = Some(state.into());
        self
    }

    pub fn row(
        &mut self,
        state: impl Into<String>,
        action: impl Into<String>,
        targets: Vec<(String, Interval)>,
    ) -> &mut Self {
        self.rows.push((state.into(), action.into(), targets));
        self
    }

    pub fn build(&self) -> Result<Imdp, ModelError> {
        if self.states.is_empty() {
            return Err(ModelError::NoStates);
        }
        let states: Vec<String> = self.states.iter().cloned().collect();
        let state_id = |name: &str| -> Result<StateId, ModelError> {
            states
                .binary_search_by(|n| n.as_str().cmp(name))
                .map(StateId)
                .map_err(|_| ModelError::UnknownState(name.to_string()))
        };

        let mut action_names: BTreeSet<String> = BTreeSet::new();
        for (_, a, _) in &self.rows {
            action_names.insert(a.clone());
        }
        let actions: Vec<String> = action_names.into_iter().collect();
        let action_id = |name: &str| -> ActionId {
            ActionId(
                actions
                    .binary_search_by(|n| n.as_str().cmp(name))
                    .expect("action interned above"),
            )
        };

        let mut prop_names: BTreeSet<String> = BTreeSet::new();
        for props in self.labels.values() {
            prop_names.extend(props.iter().cloned());
        }
        let props: Vec<String> = prop_names.into_iter().collect();

        let mut labels = vec![BTreeSet::new(); states.len()];
        for (state, ps) in &self.labels {
            let s = state_id(state)?;
            for p in ps {
                let idx = props
                    .binary_search_by(|n| n.as_str().cmp(p))
                    .expect("prop interned above");
                labels[s.0].insert(PropId(idx));
            }
        }

        let initial = match &self.initial {
            Some(name) => Some(state_id(name)?),
            None => None,
        };

        let mut rows: BTreeMap<(StateId, ActionId), Row> = BTreeMap::new();
        for (state, action, targets) in &self.rows {
            let s = state_id(state)?;
            let a = action_id(action);
            let mut row: Row = Vec::new();
            let mut seen = BTreeSet::new();
            for (target, iv) in targets {
                let t = state_id(target)?;
                if !seen.insert(t) {
                    return Err(ModelError::DuplicateTarget {
                        state: state.clone(),
                        action: action.clone(),
                        target: target.clone(),
                    });
                }
                if iv.is_zero() {
                    continue; // declared [0,0] is the same as undeclared
                }
                row.push((t, iv.clone()));
            }
            row.sort_by_key(|(t, _)| *t);
            if rows.insert((s, a), row).is_some() {
                return Err(ModelError::DuplicateRow {
                    state: state.clone(),
                    action: action.clone(),
                });
            }
        }

        let mut enabled = vec![Vec::new(); states.len()];
        for &(s, a) in rows.keys() {
            enabled[s.0].push(a);
        }

        Ok(Imdp {
            states,
            actions,
            props,
            labels,
            initial,
            rows,
            enabled,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// `Σ lo > 1` or `Σ hi < 1`: the uncertainty set of `(s,a)` is empty.
    InfeasibleRow {
        state: String,
        action: String,
        sum_lo: Rat,
        sum_hi: Rat,
    },
    /// A state with no enabled action.
    NoEnabledAction { state: String },
    /// An interval violating `0 <= lo <= hi <= 1`. Unreachable through the
    /// builder; reported for completeness when models are assembled by hand.
    MalformedInterval {
        state: String,
        action: String,
        target: String,
        interval: Interval,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InfeasibleRow {
                state,
                action,
                sum_lo,
                sum_hi,
            } => write!(
                f,
                "infeasible row ({state}, {action}): sum of lower bounds {sum_lo}, sum of upper bounds {sum_hi}"
            ),
            Violation::NoEnabledAction { state } => {
                write!(f, "state {state} has no enabled action")
            }
            Violation::MalformedInterval {
                state,
                action,
                target,
                interval,
            } => write!(
                f,
                "malformed interval {interval} on ({state}, {action}, {target})"
            ),
        }
    }
}

/// Result of [`validate`]: empty iff the model is valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            writeln!(f, "valid")
        } else {
            for v in &self.violations {
                writeln!(f, "{v}")?;
            }
            Ok(())
        }
    }
}

/// Checks feasibility of every enabled row and that every state can act.
pub fn validate(m: &Imdp) -> ValidationReport {
    let mut violations = Vec::new();
    for (s, a, row) in m.rows() {
        let mut sum_lo = Rat::zero();
        let mut sum_hi = Rat::zero();
        for (t, iv) in row {
            if iv.lo() > iv.hi() || iv.lo() < &Rat::zero() || iv.hi() > &Rat::one() {
                violations.push(Violation::MalformedInterval {
                    state: m.state_name(s).to_string(),
                    action: m.action_name(a).to_string(),
                    target: m.state_name(*t).to_string(),
                    interval: iv.clone(),
                });
            }
            sum_lo += iv.lo();
            sum_hi += iv.hi();
        }
        if sum_lo > Rat::one() || sum_hi < Rat::one() {
            violations.push(Violation::InfeasibleRow {
                state: m.state_name(s).to_string(),
                action: m.action_name(a).to_string(),
                sum_lo,
                sum_hi,
            });
        }
    }
    for s in m.states() {
        if m.enabled(s).is_empty() {
            violations.push(Violation::NoEnabledAction {
                state: m.state_name(s).to_string(),
            });
        }
    }
    ValidationReport { violations }
}

/// Size parameters of a model: `max_fanout` is the largest action support
/// and `max_distinct_actions` the largest number of distinct transition rows
/// of any state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelMetrics {
    pub state_count: usize,
    pub transition_count: usize,
    pub max_fanout: usize,
    pub max_distinct_actions: usize,
}

pub fn metrics(m: &Imdp) -> ModelMetrics {
    let mut max_fanout = 0;
    let mut transition_count = 0;
    let mut max_distinct = 0;
    for s in m.states() {
        let mut distinct: BTreeSet<&Row> = BTreeSet::new();
        for &a in m.enabled(s) {
            let row = m.row(s, a).expect("enabled row");
            transition_count += 1;
            max_fanout = max_fanout.max(row.len());
            distinct.insert(row);
        }
        max_distinct = max_distinct.max(distinct.len());
    }
    ModelMetrics {
        state_count: m.num_states(),
        transition_count,
        max_fanout,
        max_distinct_actions: max_distinct,
    }
}
