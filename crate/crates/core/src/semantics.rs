//! Bounded PCTL evaluation under the four quantifier modes, by robust
//! value iteration with exact arithmetic.
//!
//! Uncertainty is resolved dynamically: at every step the action choice
//! optimises over the enabled actions and nature picks a feasible successor
//! distribution inside `H(s,a)`, so one step of the recurrence is
//!
//! ```text
//! v'(s) = OPT_a  INNER_{x in H(s,a)}  Σ_t x(t) · v(t)
//! ```
//!
//! with `(OPT, INNER)` being (min,min), (max,max), (max,min) or (min,max)
//! for the modes `minmin`, `maxmax`, `maximin`, `minimax`. A linear
//! objective over an interval polytope attains its optimum at a vertex; the
//! inner step computes it directly by the exact greedy: start every
//! successor at its lower bound and spend the residual mass on successors
//! in value order. Deterministic action choice is lossless here because the
//! outer objective is linear in the scheduler's randomisation.
//!
//! Only bounded path operators are supported; unbounded until is rejected
//! at the formula surface.

use std::collections::BTreeSet;

use num::traits::{One, Zero};
use thiserror::Error;

use crate::model::{Imdp, PropId, Row, StateId};
use crate::rational::{parse_rat, Rat};

/// How the two non-determinisms are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantifierMode {
    /// Infimum over scheduler and nature jointly.
    MinMin,
    /// Supremum over both.
    MaxMax,
    /// Best scheduler against adversarial nature.
    MaxiMin,
    /// Adversarial scheduler against best-case... the dual: infimum over
    /// scheduler of the supremum over nature.
    MiniMax,
}

impl QuantifierMode {
    pub const ALL: [QuantifierMode; 4] = [
        QuantifierMode::MinMin,
        QuantifierMode::MaxMax,
        QuantifierMode::MaxiMin,
        QuantifierMode::MiniMax,
    ];

    fn outer_is_max(self) -> bool {
        matches!(self, QuantifierMode::MaxMax | QuantifierMode::MaxiMin)
    }

    fn inner_is_max(self) -> bool {
        matches!(self, QuantifierMode::MaxMax | QuantifierMode::MiniMax)
    }

    pub fn parse(s: &str) -> Option<QuantifierMode> {
        match s {
            "minmin" => Some(QuantifierMode::MinMin),
            "maxmax" => Some(QuantifierMode::MaxMax),
            "maximin" => Some(QuantifierMode::MaxiMin),
            "minimax" => Some(QuantifierMode::MiniMax),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            QuantifierMode::MinMin => "minmin",
            QuantifierMode::MaxMax => "maxmax",
            QuantifierMode::MaxiMin => "maximin",
            QuantifierMode::MiniMax => "minimax",
        }
    }
}

/// Per-state exact probabilities.
pub type ValueVector = Vec<Rat>;

/// Nature's inner optimum of `Σ x(t)·v(t)` over the interval polytope of a
/// row: lower bounds first, residual mass spent greedily in value order.
fn inner_opt(row: &Row, v: &[Rat], maximize: bool) -> Rat {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&i, &j| {
        let vi = &v[row[i].0 .0];
        let vj = &v[row[j].0 .0];
        if maximize {
            vj.cmp(vi)
        } else {
            vi.cmp(vj)
        }
    });
    let mut value = Rat::zero();
    let mut residual = Rat::one();
    for (t, iv) in row {
        value += iv.lo() * &v[t.0];
        residual -= iv.lo();
    }
    debug_assert!(!residual.is_negative(), "feasible row");
    for i in order {
        if residual.is_zero() {
            break;
        }
        let (t, iv) = &row[i];
        let width = iv.hi() - iv.lo();
        let take = if width < residual { width } else { residual.clone() };
        value += &take * &v[t.0];
        residual -= take;
    }
    debug_assert!(residual.is_zero(), "upper bounds sum to at least one");
    value
}

use num::traits::Signed;

fn optimize_state(m: &Imdp, s: StateId, v: &[Rat], mode: QuantifierMode) -> Rat {
    let mut best: Option<Rat> = None;
    for &a in m.enabled(s) {
        let row = m.row(s, a).expect("enabled row");
        let val = inner_opt(row, v, mode.inner_is_max());
        best = Some(match best {
            None => val,
            Some(cur) => {
                if mode.outer_is_max() {
                    cur.max(val)
                } else {
                    cur.min(val)
                }
            }
        });
    }
    best.expect("valid models enable an action in every state")
}

/// `k`-step bounded-until values: probability of reaching `t2` within `k`
/// steps while staying in `t1`, extremised per mode. States in `t2` freeze
/// at 1; states outside `t1 ∪ t2` are stuck at 0.
pub fn extremal_bounded_until(
    m: &Imdp,
    t1: &BTreeSet<StateId>,
    t2: &BTreeSet<StateId>,
    k: u32,
    mode: QuantifierMode,
) -> ValueVector {
    let mut v: ValueVector = m
        .states()
        .map(|s| if t2.contains(&s) { Rat::one() } else { Rat::zero() })
        .collect();
    for _ in 0..k {
        let next: ValueVector = m
            .states()
            .map(|s| {
                if t2.contains(&s) {
                    Rat::one()
                } else if !t1.contains(&s) {
                    Rat::zero()
                } else {
                    optimize_state(m, s, &v, mode)
                }
            })
            .collect();
        v = next;
    }
    v
}

/// One-step next values: the `k = 1` recurrence from the indicator of `t`,
/// without any freezing.
pub fn extremal_next(m: &Imdp, t: &BTreeSet<StateId>, mode: QuantifierMode) -> ValueVector {
    let v0: ValueVector = m
        .states()
        .map(|s| if t.contains(&s) { Rat::one() } else { Rat::zero() })
        .collect();
    m.states().map(|s| optimize_state(m, s, &v0, mode)).collect()
}

// ---------------------------------------------------------------------------
// state formulas
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Lt,
    Ge,
    Gt,
}

impl Cmp {
    pub fn holds(self, value: &Rat, bound: &Rat) -> bool {
        match self {
            Cmp::Le => value <= bound,
            Cmp::Lt => value < bound,
            Cmp::Ge => value >= bound,
            Cmp::Gt => value > bound,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Le => "<=",
            Cmp::Lt => "<",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathFormula {
    Next(Box<StateFormula>),
    BoundedUntil(Box<StateFormula>, Box<StateFormula>, u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateFormula {
    True,
    Atom(String),
    Not(Box<StateFormula>),
    And(Box<StateFormula>, Box<StateFormula>),
    Threshold {
        cmp: Cmp,
        bound: Rat,
        mode: QuantifierMode,
        path: PathFormula,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SemanticsError {
    #[error("unknown proposition `{0}`")]
    UnknownProposition(String),
}

/// The satisfying states, bottom-up. Threshold nodes compare the mode's
/// extremal value against the bound.
pub fn check_state_formula(m: &Imdp, phi: &StateFormula) -> Result<BTreeSet<StateId>, SemanticsError> {
    match phi {
        StateFormula::True => Ok(m.states().collect()),
        StateFormula::Atom(name) => {
            let p: PropId = m
                .prop_index(name)
                .ok_or_else(|| SemanticsError::UnknownProposition(name.clone()))?;
            Ok(m.states().filter(|&s| m.label(s).contains(&p)).collect())
        }
        StateFormula::Not(inner) => {
            let sat = check_state_formula(m, inner)?;
            Ok(m.states().filter(|s| !sat.contains(s)).collect())
        }
        StateFormula::And(a, b) => {
            let sa = check_state_formula(m, a)?;
            let sb = check_state_formula(m, b)?;
            Ok(sa.intersection(&sb).copied().collect())
        }
        StateFormula::Threshold { cmp, bound, mode, path } => {
            let values = path_values(m, path, *mode)?;
            Ok(m
                .states()
                .filter(|s| cmp.holds(&values[s.0], bound))
                .collect())
        }
    }
}

/// The extremal value vector of a path formula under a mode.
pub fn path_values(
    m: &Imdp,
    path: &PathFormula,
    mode: QuantifierMode,
) -> Result<ValueVector, SemanticsError> {
    match path {
        PathFormula::Next(phi) => {
            let t = check_state_formula(m, phi)?;
            Ok(extremal_next(m, &t, mode))
        }
        PathFormula::BoundedUntil(phi1, phi2, k) => {
            let t1 = check_state_formula(m, phi1)?;
            let t2 = check_state_formula(m, phi2)?;
            Ok(extremal_bounded_until(m, &t1, &t2, *k, mode))
        }
    }
}

// ---------------------------------------------------------------------------
// formula surface syntax
// ---------------------------------------------------------------------------
//
//   formula := clause ('&' clause)*
//   clause  := '!' clause | 'true' | '"' prop '"' | '(' formula ')'
//            | 'P' cmp number '[' path ']' 'mode' '=' mode
//   path    := 'X' formula | formula 'U' '<=' integer formula
//   cmp     := '>=' | '>' | '<=' | '<'
//   mode    := 'minmin' | 'maxmax' | 'maximin' | 'minimax'

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("formula error: {0}")]
pub struct FormulaError(pub String);

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Quoted(String),
    Bang,
    Amp,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Equals,
    Cmp(Cmp),
}

fn lex(text: &str) -> Result<Vec<Tok>, FormulaError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '!' => {
                out.push(Tok::Bang);
                i += 1;
            }
            '&' => {
                out.push(Tok::Amp);
                i += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            '[' => {
                out.push(Tok::LBracket);
                i += 1;
            }
            ']' => {
                out.push(Tok::RBracket);
                i += 1;
            }
            '=' => {
                out.push(Tok::Equals);
                i += 1;
            }
            '>' | '<' => {
                let eq = i + 1 < chars.len() && chars[i + 1] == '=';
                out.push(Tok::Cmp(match (c, eq) {
                    ('>', true) => Cmp::Ge,
                    ('>', false) => Cmp::Gt,
                    ('<', true) => Cmp::Le,
                    _ => Cmp::Lt,
                }));
                i += if eq { 2 } else { 1 };
            }
            '"' => {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && chars[j] != '"' {
                    j += 1;
                }
                if j == chars.len() {
                    return Err(FormulaError("unterminated quoted proposition".into()));
                }
                out.push(Tok::Quoted(chars[start..j].iter().collect()));
                i = j + 1;
            }
            c if c.is_ascii_alphanumeric() || c == '.' || c == '/' || c == '_' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric()
                        || chars[i] == '.'
                        || chars[i] == '/'
                        || chars[i] == '_')
                {
                    i += 1;
                }
                out.push(Tok::Word(chars[start..i].iter().collect()));
            }
            other => return Err(FormulaError(format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).cloned();
        if t.is_some() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<(), FormulaError> {
        match self.next() {
            Some(t) if &t == tok => Ok(()),
            other => Err(FormulaError(format!("expected {what}, found {other:?}"))),
        }
    }

    fn formula(&mut self) -> Result<StateFormula, FormulaError> {
        let mut left = self.clause()?;
        while matches!(self.peek(), Some(Tok::Amp)) {
            self.next();
            let right = self.clause()?;
            left = StateFormula::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn clause(&mut self) -> Result<StateFormula, FormulaError> {
        match self.next() {
            Some(Tok::Bang) => Ok(StateFormula::Not(Box::new(self.clause()?))),
            Some(Tok::Quoted(name)) => Ok(StateFormula::Atom(name)),
            Some(Tok::LParen) => {
                let inner = self.formula()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Tok::Word(w)) if w == "true" => Ok(StateFormula::True),
            Some(Tok::Word(w)) if w == "P" => self.threshold(),
            other => Err(FormulaError(format!(
                "expected a state formula, found {other:?}"
            ))),
        }
    }

    fn threshold(&mut self) -> Result<StateFormula, FormulaError> {
        let cmp = match self.next() {
            Some(Tok::Cmp(c)) => c,
            other => {
                return Err(FormulaError(format!(
                    "expected a comparison after `P`, found {other:?}"
                )))
            }
        };
        let bound = match self.next() {
            Some(Tok::Word(w)) => parse_rat(&w).map_err(FormulaError)?,
            other => {
                return Err(FormulaError(format!(
                    "expected a probability bound, found {other:?}"
                )))
            }
        };
        if bound < Rat::zero() || bound > Rat::one() {
            return Err(FormulaError(format!(
                "probability bound {bound} outside [0,1]"
            )));
        }
        self.expect(&Tok::LBracket, "`[`")?;
        let path = self.path()?;
        self.expect(&Tok::RBracket, "`]`")?;
        match self.next() {
            Some(Tok::Word(w)) if w == "mode" => {}
            other => {
                return Err(FormulaError(format!(
                    "expected `mode=<mode>` after the path formula, found {other:?}"
                )))
            }
        }
        self.expect(&Tok::Equals, "`=`")?;
        let mode = match self.next() {
            Some(Tok::Word(w)) => QuantifierMode::parse(&w)
                .ok_or_else(|| FormulaError(format!("unknown mode `{w}`")))?,
            other => return Err(FormulaError(format!("expected a mode, found {other:?}"))),
        };
        Ok(StateFormula::Threshold { cmp, bound, mode, path })
    }

    fn path(&mut self) -> Result<PathFormula, FormulaError> {
        if matches!(self.peek(), Some(Tok::Word(w)) if w == "X") {
            self.next();
            let phi = self.clause()?;
            return Ok(PathFormula::Next(Box::new(phi)));
        }
        let left = self.formula()?;
        match self.next() {
            Some(Tok::Word(w)) if w == "U" => {}
            other => {
                return Err(FormulaError(format!(
                    "expected `U<=k` in a path formula, found {other:?}"
                )))
            }
        }
        match self.peek() {
            Some(Tok::Cmp(Cmp::Le)) => {
                self.next();
            }
            _ => {
                return Err(FormulaError(
                    "unbounded until is not supported; use `U<=k`".into(),
                ))
            }
        }
        let k = match self.next() {
            Some(Tok::Word(w)) => w
                .parse::<u32>()
                .map_err(|_| FormulaError(format!("malformed horizon `{w}`")))?,
            other => return Err(FormulaError(format!("expected a horizon, found {other:?}"))),
        };
        let right = self.formula()?;
        Ok(PathFormula::BoundedUntil(Box::new(left), Box::new(right), k))
    }
}

pub fn parse_formula(text: &str) -> Result<StateFormula, FormulaError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, at: 0 };
    let phi = p.formula()?;
    if p.at != p.toks.len() {
        return Err(FormulaError(format!(
            "trailing tokens after the formula: {:?}",
            &p.toks[p.at..]
        )));
    }
    Ok(phi)
}
