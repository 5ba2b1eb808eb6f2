//! Line-oriented text format for models.
//!
//! ```text
//! # comment
//! imdp
//! states: s1 s2 ...
//! initial: s1
//! label s1: p1 p2
//! s1 a -> s2 [0.3,0.7], s3 [3/10,1]
//! ```
//!
//! Interval bounds are decimals or `num/den` rationals, both parsed exactly.
//! Duplicate `(state, action)` lines and duplicate targets within a line are
//! errors. Serialisation emits canonical order (states, then actions,
//! lexicographic), so `serialize(parse(t))` is a fixpoint and
//! `parse(serialize(m)) == m` for every model.

use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::interval::Interval;
use crate::model::{Imdp, ImdpBuilder, ModelError};
use crate::rational::parse_rat;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl ParseError {
    fn new(line: usize, col: usize, msg: impl Into<String>) -> Self {
        ParseError {
            line,
            col,
            msg: msg.into(),
        }
    }
}

/// A token with its 1-based column.
struct Tok<'a> {
    text: &'a str,
    col: usize,
}

fn tokens(line: &str) -> Vec<Tok<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Tok {
                    text: &line[s..i],
                    col: s + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Tok {
            text: &line[s..],
            col: s + 1,
        });
    }
    out
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | '|'))
}

pub fn parse(text: &str) -> Result<Imdp, ParseError> {
    let mut builder = ImdpBuilder::new();
    let mut declared: Vec<String> = Vec::new();
    let mut saw_header = false;
    let mut saw_states = false;
    let mut saw_initial = false;

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let toks = tokens(line);
        if toks.is_empty() {
            continue;
        }
        if !saw_header {
            if toks[0].text != "imdp" || toks.len() != 1 {
                return Err(ParseError::new(
                    lineno,
                    toks[0].col,
                    "expected `imdp` header line",
                ));
            }
            saw_header = true;
            continue;
        }
        match toks[0].text {
            "states:" => {
                if saw_states {
                    return Err(ParseError::new(lineno, toks[0].col, "duplicate states line"));
                }
                if toks.len() == 1 {
                    return Err(ParseError::new(lineno, toks[0].col, "states line is empty"));
                }
                for t in &toks[1..] {
                    if !valid_name(t.text) {
                        return Err(ParseError::new(
                            lineno,
                            t.col,
                            format!("invalid state name `{}`", t.text),
                        ));
                    }
                    if declared.iter().any(|d| d == t.text) {
                        return Err(ParseError::new(
                            lineno,
                            t.col,
                            format!("duplicate state `{}`", t.text),
                        ));
                    }
                    declared.push(t.text.to_string());
                    builder.state(t.text);
                }
                saw_states = true;
            }
            "initial:" => {
                if saw_initial {
                    return Err(ParseError::new(
                        lineno,
                        toks[0].col,
                        "duplicate initial line",
                    ));
                }
                if toks.len() != 2 {
                    return Err(ParseError::new(
                        lineno,
                        toks[0].col,
                        "expected exactly one initial state",
                    ));
                }
                check_known(&declared, &toks[1], lineno)?;
                builder.initial(toks[1].text);
                saw_initial = true;
            }
            "label" => {
                // label s: p1 p2 ...
                if toks.len() < 2 {
                    return Err(ParseError::new(
                        lineno,
                        toks[0].col,
                        "label line needs a state",
                    ));
                }
                let state_tok = &toks[1];
                let state = match state_tok.text.strip_suffix(':') {
                    Some(s) => s,
                    None => {
                        return Err(ParseError::new(
                            lineno,
                            state_tok.col,
                            "expected `label <state>: <props>`",
                        ))
                    }
                };
                check_known_name(&declared, state, lineno, state_tok.col)?;
                for t in &toks[2..] {
                    if !valid_name(t.text) {
                        return Err(ParseError::new(
                            lineno,
                            t.col,
                            format!("invalid proposition name `{}`", t.text),
                        ));
                    }
                    builder.label(state, t.text);
                }
            }
            _ => {
                // s a -> t1 [lo,hi], t2 [lo,hi]
                parse_transition(&mut builder, &declared, &toks, lineno)?;
            }
        }
    }

    if !saw_header {
        return Err(ParseError::new(1, 1, "missing `imdp` header"));
    }
    if !saw_states {
        return Err(ParseError::new(1, 1, "missing states line"));
    }
    builder.build().map_err(model_error)
}

fn model_error(e: ModelError) -> ParseError {
    // Builder-level duplicates carry no position; report at line 0.
    ParseError::new(0, 0, e.to_string())
}

fn check_known(declared: &[String], tok: &Tok<'_>, lineno: usize) -> Result<(), ParseError> {
    check_known_name(declared, tok.text, lineno, tok.col)
}

fn check_known_name(
    declared: &[String],
    name: &str,
    lineno: usize,
    col: usize,
) -> Result<(), ParseError> {
    if declared.iter().any(|d| d == name) {
        Ok(())
    } else {
        Err(ParseError::new(
            lineno,
            col,
            format!("unknown state reference `{name}`"),
        ))
    }
}

fn parse_transition(
    builder: &mut ImdpBuilder,
    declared: &[String],
    toks: &[Tok<'_>],
    lineno: usize,
) -> Result<(), ParseError> {
    if toks.len() < 4 || toks[2].text != "->" {
        return Err(ParseError::new(
            lineno,
            toks[0].col,
            "expected `state action -> target [lo,hi], ...`",
        ));
    }
    check_known(declared, &toks[0], lineno)?;
    if !valid_name(toks[1].text) {
        return Err(ParseError::new(
            lineno,
            toks[1].col,
            format!("invalid action name `{}`", toks[1].text),
        ));
    }
    let mut targets: Vec<(String, Interval)> = Vec::new();
    let mut rest = &toks[3..];
    loop {
        if rest.len() < 2 {
            return Err(ParseError::new(
                lineno,
                rest.first().map_or(toks[0].col, |t| t.col),
                "expected `target [lo,hi]`",
            ));
        }
        let target = &rest[0];
        check_known(declared, target, lineno)?;
        if targets.iter().any(|(t, _)| t == target.text) {
            return Err(ParseError::new(
                lineno,
                target.col,
                format!("duplicate target `{}` in transition", target.text),
            ));
        }
        let iv_tok = &rest[1];
        let (iv, more) = parse_interval(iv_tok, lineno)?;
        targets.push((target.text.to_string(), iv));
        if more {
            rest = &rest[2..];
        } else {
            if rest.len() > 2 {
                return Err(ParseError::new(
                    lineno,
                    rest[2].col,
                    "unexpected trailing tokens (missing `,`?)",
                ));
            }
            break;
        }
    }
    builder.row(toks[0].text, toks[1].text, targets);
    Ok(())
}

/// Parses `[lo,hi]` or `[lo,hi],`; returns the interval and whether a
/// trailing comma announces another target.
fn parse_interval(tok: &Tok<'_>, lineno: usize) -> Result<(Interval, bool), ParseError> {
    let text = tok.text;
    let (body, more) = match text.strip_suffix(',') {
        Some(b) => (b, true),
        None => (text, false),
    };
    let inner = body
        .strip_prefix('[')
        .and_then(|b| b.strip_suffix(']'))
        .ok_or_else(|| {
            ParseError::new(lineno, tok.col, format!("expected `[lo,hi]`, got `{text}`"))
        })?;
    let (lo_s, hi_s) = inner.split_once(',').ok_or_else(|| {
        ParseError::new(lineno, tok.col, "interval needs two comma-separated bounds")
    })?;
    let lo = parse_rat(lo_s).map_err(|e| ParseError::new(lineno, tok.col, e))?;
    let hi = parse_rat(hi_s).map_err(|e| ParseError::new(lineno, tok.col, e))?;
    let iv = Interval::new(lo, hi).map_err(|e| ParseError::new(lineno, tok.col, e.to_string()))?;
    Ok((iv, more))
}

/// Canonical text form: states, labels and transition rows in lexicographic
/// order, interval bounds as reduced rationals.
pub fn serialize(m: &Imdp) -> String {
    let mut out = String::from("imdp\n");
    let names: Vec<&str> = m.states().map(|s| m.state_name(s)).collect();
    writeln!(out, "states: {}", names.join(" ")).expect("string write");
    if let Some(init) = m.initial() {
        writeln!(out, "initial: {}", m.state_name(init)).expect("string write");
    }
    for s in m.states() {
        let label = m.label(s);
        if !label.is_empty() {
            let props: Vec<&str> = label.iter().map(|&p| m.props()[p.0].as_str()).collect();
            writeln!(out, "label {}: {}", m.state_name(s), props.join(" ")).expect("string write");
        }
    }
    for (s, a, row) in m.rows() {
        let targets: Vec<String> = row
            .iter()
            .map(|(t, iv)| format!("{} {}", m.state_name(*t), iv))
            .collect();
        writeln!(
            out,
            "{} {} -> {}",
            m.state_name(s),
            m.action_name(a),
            targets.join(", ")
        )
        .expect("string write");
    }
    out
}

impl fmt::Display for Imdp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize(self))
    }
}
