use std::fmt::Write as _;

use serde::Serialize;

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

/// One constraint `Σ coeffs · x  cmp  rhs`, coefficients sorted by variable index.
#[derive(Clone, Debug, PartialEq)]
pub struct Row<S> {
    pub coeffs: Vec<(usize, S)>,
    pub cmp: Cmp,
    pub rhs: S,
}

impl<S: Scalar> Row<S> {
    /// Builds a row, merging duplicate indices and dropping zero coefficients.
    pub fn new(coeffs: impl IntoIterator<Item = (usize, S)>, cmp: Cmp, rhs: S) -> Self {
        let mut v: Vec<(usize, S)> = coeffs.into_iter().collect();
        v.sort_by_key(|(i, _)| *i);
        let mut merged: Vec<(usize, S)> = Vec::with_capacity(v.len());
        for (i, a) in v {
            match merged.last_mut() {
                Some((j, b)) if *j == i => *b += a,
                _ => merged.push((i, a)),
            }
        }
        merged.retain(|(_, a)| *a != S::zero());
        Row {
            coeffs: merged,
            cmp,
            rhs,
        }
    }

    /// `Σ_{i ∈ vars} x_i  cmp  rhs`
    pub fn sum(vars: impl IntoIterator<Item = usize>, cmp: Cmp, rhs: S) -> Self {
        Self::new(vars.into_iter().map(|i| (i, S::one())), cmp, rhs)
    }

    pub fn activity(&self, x: &[S]) -> S {
        let mut acc = S::zero();
        for (i, a) in &self.coeffs {
            acc += a.mul_ref(&x[*i]);
        }
        acc
    }

    /// Amount by which `x` violates the row (zero when satisfied).
    pub fn violation(&self, x: &[S]) -> S {
        let lhs = self.activity(x);
        let zero = S::zero();
        match self.cmp {
            Cmp::Le => S::max_of(lhs.sub_ref(&self.rhs), zero),
            Cmp::Ge => S::max_of(self.rhs.sub_ref(&lhs), zero),
            Cmp::Eq => lhs.sub_ref(&self.rhs).abs(),
        }
    }

    pub fn is_satisfied(&self, x: &[S]) -> bool {
        let lhs = self.activity(x);
        match self.cmp {
            Cmp::Le => lhs.le_tol(&self.rhs),
            Cmp::Ge => lhs.ge_tol(&self.rhs),
            Cmp::Eq => lhs.eq_tol(&self.rhs),
        }
    }

    pub fn is_tight(&self, x: &[S]) -> bool {
        self.activity(x).eq_tol(&self.rhs)
    }
}

/// `minimize objective · x` subject to rows and `lower ≤ x ≤ upper`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram<S> {
    pub num_vars: usize,
    pub objective: Vec<S>,
    pub rows: Vec<Row<S>>,
    pub lower: Vec<S>,
    /// `None` means unbounded above.
    pub upper: Vec<Option<S>>,
    pub names: Option<Vec<String>>,
}

impl<S: Scalar> LinearProgram<S> {
    /// Zero objective, no rows, every variable in `[0, 1]`.
    pub fn unit_box(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            objective: vec![S::zero(); num_vars],
            rows: Vec::new(),
            lower: vec![S::zero(); num_vars],
            upper: vec![Some(S::one()); num_vars],
            names: None,
        }
    }

    pub fn push(&mut self, row: Row<S>) -> usize {
        debug_assert!(row.coeffs.iter().all(|(i, _)| *i < self.num_vars));
        self.rows.push(row);
        self.rows.len() - 1
    }

    pub fn objective_value(&self, x: &[S]) -> S {
        let mut acc = S::zero();
        for (c, v) in self.objective.iter().zip(x) {
            if *c != S::zero() {
                acc += c.mul_ref(v);
            }
        }
        acc
    }

    /// First violated row or bound, if any.
    pub fn first_violation(&self, x: &[S]) -> Option<String> {
        for i in 0..self.num_vars {
            if x[i].lt_tol(&self.lower[i]) {
                return Some(format!("x{i} = {} below lower bound {}", x[i], self.lower[i]));
            }
            if let Some(u) = &self.upper[i] {
                if x[i].gt_tol(u) {
                    return Some(format!("x{i} = {} above upper bound {u}", x[i]));
                }
            }
        }
        self.rows
            .iter()
            .position(|r| !r.is_satisfied(x))
            .map(|r| format!("row {r} violated by {}", self.rows[r].violation(x)))
    }

    pub fn is_feasible(&self, x: &[S]) -> bool {
        self.first_violation(x).is_none()
    }

    fn var_name(&self, i: usize) -> String {
        match &self.names {
            Some(n) => n[i].clone(),
            None => format!("x{i}"),
        }
    }

    /// Text in the CPLEX LP format, for cross-checking with external solvers.
    pub fn to_lp_format(&self) -> String {
        let term = |out: &mut String, first: bool, c: &S, name: &str| {
            let v = c.to_f64();
            if first {
                let _ = write!(out, " {v} {name}");
            } else if v < 0.0 {
                let _ = write!(out, " - {} {name}", -v);
            } else {
                let _ = write!(out, " + {v} {name}");
            }
        };
        let mut out = String::from("Minimize\n obj:");
        let mut first = true;
        for (i, c) in self.objective.iter().enumerate() {
            if *c != S::zero() {
                term(&mut out, first, c, &self.var_name(i));
                first = false;
            }
        }
        if first {
            out.push_str(" 0");
        }
        out.push_str("\nSubject To\n");
        for (r, row) in self.rows.iter().enumerate() {
            let _ = write!(out, " c{r}:");
            if row.coeffs.is_empty() {
                out.push_str(" 0 x0");
            }
            for (k, (i, a)) in row.coeffs.iter().enumerate() {
                term(&mut out, k == 0, a, &self.var_name(*i));
            }
            let op = match row.cmp {
                Cmp::Le => "<=",
                Cmp::Ge => ">=",
                Cmp::Eq => "=",
            };
            let _ = writeln!(out, " {op} {}", row.rhs.to_f64());
        }
        out.push_str("Bounds\n");
        for i in 0..self.num_vars {
            match &self.upper[i] {
                Some(u) => {
                    let _ = writeln!(out, " {} <= {} <= {}", self.lower[i].to_f64(), self.var_name(i), u.to_f64());
                }
                None => {
                    let _ = writeln!(out, " {} >= {}", self.var_name(i), self.lower[i].to_f64());
                }
            }
        }
        out.push_str("End\n");
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl LpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        }
    }
}

#[derive(Clone, Debug)]
pub struct LpSolution<S> {
    pub status: LpStatus,
    pub values: Vec<S>,
    pub objective: S,
    /// Structural variables in the final basis.
    pub basic: Vec<usize>,
    /// Nonbasic structural variables resting at their upper bound (all others rest at the lower bound).
    pub at_upper: Vec<usize>,
    pub iterations: usize,
    /// Separation rounds performed (zero for a plain solve).
    pub rounds: usize,
}

impl<S: Scalar> LpSolution<S> {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}
