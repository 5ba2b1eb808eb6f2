//! Exact linear programming over rationals.
//!
//! A small dense two-phase simplex with Bland's rule. Every pivot is exact,
//! so feasibility answers are decisions, not approximations; Bland's rule
//! guarantees termination on degenerate instances. All variables are
//! implicitly nonnegative, which is the form every caller in this crate
//! needs (convex-combination coefficients, distribution weights).

use num::traits::{One, Signed, Zero};

use crate::rational::Rat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Infeasible,
    Unbounded,
    Optimal { value: Rat, point: Vec<Rat> },
}

/// `min/max c·x  s.t.  A x {<=,=,>=} b,  x >= 0`.
#[derive(Debug, Clone)]
pub struct LinProg {
    num_vars: usize,
    rows: Vec<(Vec<Rat>, Rel, Rat)>,
}

impl LinProg {
    pub fn new(num_vars: usize) -> Self {
        LinProg {
            num_vars,
            rows: Vec::new(),
        }
    }

    pub fn add(&mut self, coeffs: Vec<Rat>, rel: Rel, rhs: Rat) {
        assert_eq!(coeffs.len(), self.num_vars, "coefficient length mismatch");
        self.rows.push((coeffs, rel, rhs));
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Exact feasibility of the constraint system (phase 1 only).
    pub fn is_feasible(&self) -> bool {
        self.feasible_point().is_some()
    }

    /// A feasible point if one exists.
    pub fn feasible_point(&self) -> Option<Vec<Rat>> {
        let mut t = Tableau::build(self);
        if !t.phase_one() {
            return None;
        }
        Some(t.point(self.num_vars))
    }

    pub fn maximize(&self, obj: &[Rat]) -> LpOutcome {
        assert_eq!(obj.len(), self.num_vars);
        let mut t = Tableau::build(self);
        if !t.phase_one() {
            return LpOutcome::Infeasible;
        }
        // Phase 2 minimises -obj over the structural columns.
        let mut cost = vec![Rat::zero(); t.cols];
        for (j, c) in obj.iter().enumerate() {
            cost[j] = -c.clone();
        }
        if !t.run_simplex(&cost) {
            return LpOutcome::Unbounded;
        }
        let point = t.point(self.num_vars);
        let value = obj
            .iter()
            .zip(&point)
            .map(|(c, x)| c * x)
            .fold(Rat::zero(), |a, b| a + b);
        LpOutcome::Optimal { value, point }
    }

    pub fn minimize(&self, obj: &[Rat]) -> LpOutcome {
        let neg: Vec<Rat> = obj.iter().map(|c| -c.clone()).collect();
        match self.maximize(&neg) {
            LpOutcome::Optimal { value, point } => LpOutcome::Optimal {
                value: -value,
                point,
            },
            other => other,
        }
    }
}

struct Tableau {
    /// Constraint rows in canonical form; last entry of each row is the rhs.
    a: Vec<Vec<Rat>>,
    basis: Vec<usize>,
    cols: usize,
    /// Columns that may enter the basis (artificials are retired after phase 1).
    live: Vec<bool>,
    first_artificial: usize,
}

impl Tableau {
    fn build(lp: &LinProg) -> Tableau {
        let n = lp.num_vars;
        // Normalise to nonnegative rhs so slacks/artificials can start basic.
        let mut rows: Vec<(Vec<Rat>, Rel, Rat)> = lp.rows.clone();
        for (coeffs, rel, rhs) in rows.iter_mut() {
            if rhs.is_negative() {
                for c in coeffs.iter_mut() {
                    *c = -c.clone();
                }
                *rhs = -rhs.clone();
                *rel = match *rel {
                    Rel::Le => Rel::Ge,
                    Rel::Ge => Rel::Le,
                    Rel::Eq => Rel::Eq,
                };
            }
        }
        let num_slack = rows
            .iter()
            .filter(|(_, rel, _)| !matches!(rel, Rel::Eq))
            .count();
        let num_art = rows
            .iter()
            .filter(|(_, rel, _)| !matches!(rel, Rel::Le))
            .count();
        let cols = n + num_slack + num_art;
        let mut a = Vec::with_capacity(rows.len());
        let mut basis = Vec::with_capacity(rows.len());
        let mut slack_at = n;
        let mut art_at = n + num_slack;
        for (coeffs, rel, rhs) in rows {
            let mut row = vec![Rat::zero(); cols + 1];
            row[..n].clone_from_slice(&coeffs);
            row[cols] = rhs;
            match rel {
                Rel::Le => {
                    row[slack_at] = Rat::one();
                    basis.push(slack_at);
                    slack_at += 1;
                }
                Rel::Ge => {
                    row[slack_at] = -Rat::one();
                    slack_at += 1;
                    row[art_at] = Rat::one();
                    basis.push(art_at);
                    art_at += 1;
                }
                Rel::Eq => {
                    row[art_at] = Rat::one();
                    basis.push(art_at);
                    art_at += 1;
                }
            }
            a.push(row);
        }
        Tableau {
            a,
            basis,
            cols,
            live: vec![true; cols],
            first_artificial: n + num_slack,
        }
    }

    /// Minimises the cost vector with Bland's rule. Returns false on
    /// unboundedness.
    fn run_simplex(&mut self, cost: &[Rat]) -> bool {
        loop {
            // Reduced costs r_j = c_j - c_B · T_j, recomputed per iteration;
            // the tableau stays small enough that this beats bookkeeping.
            let mut entering = None;
            for j in 0..self.cols {
                if !self.live[j] || self.basis.contains(&j) {
                    continue;
                }
                let mut r = cost[j].clone();
                for (i, row) in self.a.iter().enumerate() {
                    let cb = &cost[self.basis[i]];
                    if !cb.is_zero() && !row[j].is_zero() {
                        r -= cb * &row[j];
                    }
                }
                if r.is_negative() {
                    entering = Some(j);
                    break; // Bland: smallest improving index
                }
            }
            let Some(j) = entering else {
                return true;
            };
            let mut leaving: Option<(usize, Rat)> = None;
            for (i, row) in self.a.iter().enumerate() {
                if row[j].is_positive() {
                    let ratio = &row[self.cols] / &row[j];
                    match &leaving {
                        None => leaving = Some((i, ratio)),
                        Some((li, lr)) => {
                            // Bland tie-break: smallest basis variable index.
                            if ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]) {
                                leaving = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((i, _)) = leaving else {
                return false;
            };
            self.pivot(i, j);
        }
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let pivot = self.a[pr][pc].clone();
        for v in self.a[pr].iter_mut() {
            *v = &*v / &pivot;
        }
        for i in 0..self.a.len() {
            if i == pr {
                continue;
            }
            let factor = self.a[i][pc].clone();
            if factor.is_zero() {
                continue;
            }
            for j in 0..=self.cols {
                if !self.a[pr][j].is_zero() {
                    let delta = &factor * &self.a[pr][j];
                    self.a[i][j] -= delta;
                }
            }
        }
        self.basis[pr] = pc;
    }

    /// Drives the artificial variables to zero. Returns false if the system
    /// is infeasible.
    fn phase_one(&mut self) -> bool {
        if self.first_artificial == self.cols {
            return true; // all rows started with a slack basis
        }
        let mut cost = vec![Rat::zero(); self.cols];
        for c in cost.iter_mut().skip(self.first_artificial) {
            *c = Rat::one();
        }
        let bounded = self.run_simplex(&cost);
        debug_assert!(bounded, "phase-1 objective is bounded below by zero");
        let total: Rat = (0..self.a.len())
            .filter(|&i| self.basis[i] >= self.first_artificial)
            .map(|i| self.a[i][self.cols].clone())
            .fold(Rat::zero(), |a, b| a + b);
        if !total.is_zero() {
            return false;
        }
        // Pivot lingering (degenerate) artificials out of the basis, or drop
        // redundant rows outright.
        let mut i = 0;
        while i < self.a.len() {
            if self.basis[i] >= self.first_artificial {
                let col = (0..self.first_artificial)
                    .find(|&j| self.live[j] && !self.a[i][j].is_zero());
                match col {
                    Some(j) => self.pivot(i, j),
                    None => {
                        self.a.remove(i);
                        self.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
        for j in self.first_artificial..self.cols {
            self.live[j] = false;
        }
        true
    }

    fn point(&self, n: usize) -> Vec<Rat> {
        let mut x = vec![Rat::zero(); n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.a[i][self.cols].clone();
            }
        }
        x
    }
}
