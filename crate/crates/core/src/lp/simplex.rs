//! Dense bounded-variable two-phase primal simplex.
//!
//! Variables are shifted so every lower bound is zero. Inequality rows get a
//! slack column; rows whose slack cannot start basic get an artificial column.
//! Pricing is Dantzig's rule, switching to Bland's rule whenever a run of
//! degenerate pivots exceeds `stall_limit`; Bland's rule is kept until the
//! objective strictly improves, so the method cannot cycle.

use super::model::{Cmp, LinearProgram, LpSolution, LpStatus};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    /// `None` picks a cap proportional to the tableau size.
    pub max_iterations: Option<usize>,
    pub stall_limit: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_iterations: None,
            stall_limit: 50,
        }
    }
}

/// Solves `lp` to an optimal basic feasible solution, or reports infeasibility/unboundedness.
pub fn solve<S: Scalar>(lp: &LinearProgram<S>) -> Result<LpSolution<S>> {
    solve_with(lp, &SimplexOptions::default())
}

pub fn solve_with<S: Scalar>(lp: &LinearProgram<S>, opts: &SimplexOptions) -> Result<LpSolution<S>> {
    if !validate_shape(lp)? {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            values: lp.lower.clone(),
            objective: lp.objective_value(&lp.lower),
            basic: Vec::new(),
            at_upper: Vec::new(),
            iterations: 0,
            rounds: 0,
        });
    }
    let mut tab = Tableau::build(lp);
    let cap = opts
        .max_iterations
        .unwrap_or(50_000 + 50 * (tab.rows + tab.cols));

    if tab.first_artificial < tab.cols {
        let cost: Vec<S> = (0..tab.cols)
            .map(|c| if c >= tab.first_artificial { S::one() } else { S::zero() })
            .collect();
        tab.set_cost(cost);
        match tab.run(cap, opts.stall_limit)? {
            Phase::Optimal => {}
            Phase::Unbounded => return Err(Error::invariant("phase one cannot be unbounded")),
        }
        let infeasibility = S::sum(tab.value[tab.first_artificial..].iter());
        if infeasibility.is_pos() {
            return Ok(tab.finish(lp, LpStatus::Infeasible));
        }
        tab.drive_out_artificials();
    }
    let mut cost = vec![S::zero(); tab.cols];
    cost[..lp.num_vars].clone_from_slice(&lp.objective);
    tab.set_cost(cost);
    let status = match tab.run(cap, opts.stall_limit)? {
        Phase::Optimal => LpStatus::Optimal,
        Phase::Unbounded => LpStatus::Unbounded,
    };
    Ok(tab.finish(lp, status))
}

/// Checks dimensions; returns `false` when some upper bound lies below its lower bound.
fn validate_shape<S: Scalar>(lp: &LinearProgram<S>) -> Result<bool> {
    let n = lp.num_vars;
    if lp.objective.len() != n || lp.lower.len() != n || lp.upper.len() != n {
        return Err(Error::InvalidInput("LP vector lengths disagree with num_vars".into()));
    }
    for (r, row) in lp.rows.iter().enumerate() {
        if row.coeffs.iter().any(|(i, _)| *i >= n) {
            return Err(Error::InvalidInput(format!("row {r} references an unknown variable")));
        }
        if row.coeffs.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidInput(format!("row {r} is not sorted by variable index")));
        }
    }
    for i in 0..n {
        if let Some(u) = &lp.upper[i] {
            if u.lt_tol(&lp.lower[i]) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

enum Phase {
    Optimal,
    Unbounded,
}

struct Tableau<S> {
    rows: usize,
    cols: usize,
    first_artificial: usize,
    t: Vec<Vec<S>>,
    /// Current value of every column (shifted so lower bounds are zero).
    value: Vec<S>,
    upper: Vec<Option<S>>,
    basis: Vec<usize>,
    basic_row: Vec<Option<usize>>,
    at_upper: Vec<bool>,
    enabled: Vec<bool>,
    cost: Vec<S>,
    d: Vec<S>,
    iterations: usize,
}

fn nonzero<S: Scalar>(a: &S) -> bool {
    if S::EXACT {
        *a != S::zero()
    } else {
        a.to_f64().abs() > 1e-9
    }
}

impl<S: Scalar> Tableau<S> {
    fn build(lp: &LinearProgram<S>) -> Self {
        let n = lp.num_vars;
        let m = lp.rows.len();
        let slack_count = lp.rows.iter().filter(|r| r.cmp != Cmp::Eq).count();
        // Decide per row: flip sign? slack basic? artificial?
        let mut rhs = Vec::with_capacity(m);
        let mut flip = Vec::with_capacity(m);
        let mut needs_art = Vec::with_capacity(m);
        for row in &lp.rows {
            let mut b = row.rhs.clone();
            for (i, a) in &row.coeffs {
                b.sub_mul_assign(a, &lp.lower[*i]);
            }
            let neg = b < S::zero();
            let slack_sign = match row.cmp {
                Cmp::Le => Some(1),
                Cmp::Ge => Some(-1),
                Cmp::Eq => None,
            };
            let slack_basic = matches!(slack_sign, Some(s) if (s == 1) != neg);
            rhs.push(if neg { -b } else { b });
            flip.push(neg);
            needs_art.push(!slack_basic);
        }
        let art_count = needs_art.iter().filter(|&&a| a).count();
        let first_slack = n;
        let first_artificial = n + slack_count;
        let cols = first_artificial + art_count;

        let mut t = vec![vec![S::zero(); cols]; m];
        let mut basis = vec![0; m];
        let mut slack = first_slack;
        let mut art = first_artificial;
        for (r, row) in lp.rows.iter().enumerate() {
            let sign = if flip[r] { -S::one() } else { S::one() };
            for (i, a) in &row.coeffs {
                t[r][*i] = a.mul_ref(&sign);
            }
            if row.cmp != Cmp::Eq {
                let s = if row.cmp == Cmp::Le { S::one() } else { -S::one() };
                t[r][slack] = s.mul_ref(&sign);
                if !needs_art[r] {
                    basis[r] = slack;
                }
                slack += 1;
            }
            if needs_art[r] {
                t[r][art] = S::one();
                basis[r] = art;
                art += 1;
            }
        }
        let mut upper = vec![None; cols];
        for i in 0..n {
            upper[i] = lp.upper[i].as_ref().map(|u| u.sub_ref(&lp.lower[i]));
        }
        let mut value = vec![S::zero(); cols];
        let mut basic_row = vec![None; cols];
        for r in 0..m {
            value[basis[r]] = rhs[r].clone();
            basic_row[basis[r]] = Some(r);
        }
        Tableau {
            rows: m,
            cols,
            first_artificial,
            t,
            value,
            upper,
            basis,
            basic_row,
            at_upper: vec![false; cols],
            enabled: vec![true; cols],
            cost: vec![S::zero(); cols],
            d: vec![S::zero(); cols],
            iterations: 0,
        }
    }

    fn set_cost(&mut self, cost: Vec<S>) {
        let mut d = cost.clone();
        for r in 0..self.rows {
            let cb = &cost[self.basis[r]];
            if *cb == S::zero() {
                continue;
            }
            for (c, a) in self.t[r].iter().enumerate() {
                if *a != S::zero() {
                    d[c].sub_mul_assign(cb, a);
                }
            }
        }
        for r in 0..self.rows {
            d[self.basis[r]] = S::zero();
        }
        self.cost = cost;
        self.d = d;
    }

    fn eligible(&self, c: usize) -> bool {
        if !self.enabled[c] || self.basic_row[c].is_some() {
            return false;
        }
        if let Some(u) = &self.upper[c] {
            if !u.is_pos() {
                return false;
            }
        }
        if self.at_upper[c] {
            self.d[c].is_pos()
        } else {
            self.d[c].is_neg()
        }
    }

    fn choose_entering(&self, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, S)> = None;
        for c in 0..self.cols {
            if !self.eligible(c) {
                continue;
            }
            if bland {
                return Some(c);
            }
            let score = self.d[c].abs();
            if best.as_ref().is_none_or(|(_, s)| score > *s) {
                best = Some((c, score));
            }
        }
        best.map(|(c, _)| c)
    }

    fn run(&mut self, cap: usize, stall_limit: usize) -> Result<Phase> {
        let mut degenerate_run = 0usize;
        loop {
            let bland = degenerate_run >= stall_limit;
            let Some(e) = self.choose_entering(bland) else {
                return Ok(Phase::Optimal);
            };
            if self.iterations >= cap {
                return Err(Error::IterationLimit(cap));
            }
            self.iterations += 1;
            let increasing = !self.at_upper[e];

            // Ratio test: `None` leaving row means the entering variable flips bounds.
            let mut theta: Option<S> = self.upper[e].clone();
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_key: Option<(usize, S)> = None;
            for r in 0..self.rows {
                let a = &self.t[r][e];
                if !nonzero(a) {
                    continue;
                }
                let s = if increasing { a.clone() } else { -a.clone() };
                let b = self.basis[r];
                let (lim, to_upper) = if s > S::zero() {
                    (self.value[b].div_ref(&s), false)
                } else if let Some(u) = &self.upper[b] {
                    (u.sub_ref(&self.value[b]).div_ref(&(-s.clone())), true)
                } else {
                    continue;
                };
                let lim = if lim < S::zero() { S::zero() } else { lim };
                let better = match &theta {
                    None => true,
                    Some(best) if lim < *best => true,
                    Some(best) if lim == *best => match &leave_key {
                        None => false,
                        Some((kb, ka)) => {
                            if bland || S::EXACT {
                                b < *kb
                            } else {
                                s.abs() > *ka
                            }
                        }
                    },
                    _ => false,
                };
                if better {
                    theta = Some(lim);
                    leave = Some((r, to_upper));
                    leave_key = Some((b, s.abs()));
                }
            }
            let Some(theta) = theta else {
                return Ok(Phase::Unbounded);
            };
            if theta.is_zero_tol() {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            if theta != S::zero() {
                let step = if increasing { theta.clone() } else { -theta.clone() };
                for r in 0..self.rows {
                    let a = &self.t[r][e];
                    if *a != S::zero() {
                        let b = self.basis[r];
                        let delta = a.mul_ref(&step);
                        self.value[b] -= delta;
                    }
                }
                self.value[e] += step;
            }
            match leave {
                None => {
                    self.at_upper[e] = !self.at_upper[e];
                    self.value[e] = if self.at_upper[e] {
                        self.upper[e].clone().expect("flip needs a finite bound")
                    } else {
                        S::zero()
                    };
                }
                Some((r, to_upper)) => {
                    let b = self.basis[r];
                    self.value[b] = if to_upper {
                        self.upper[b].clone().expect("finite bound")
                    } else {
                        S::zero()
                    };
                    self.at_upper[b] = to_upper;
                    self.pivot(r, e);
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let mut pr = std::mem::take(&mut self.t[r]);
        let piv = pr[e].clone();
        let mut nz = Vec::new();
        for (c, v) in pr.iter_mut().enumerate() {
            if *v == S::zero() {
                continue;
            }
            if !S::EXACT && v.to_f64().abs() < 1e-13 {
                *v = S::zero();
                continue;
            }
            *v = v.div_ref(&piv);
            nz.push(c);
        }
        pr[e] = S::one();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.t[i][e].clone();
            if f == S::zero() {
                continue;
            }
            let row = &mut self.t[i];
            for &c in &nz {
                row[c].sub_mul_assign(&f, &pr[c]);
            }
            row[e] = S::zero();
        }
        let f = self.d[e].clone();
        if f != S::zero() {
            for &c in &nz {
                self.d[c].sub_mul_assign(&f, &pr[c]);
            }
            self.d[e] = S::zero();
        }
        self.t[r] = pr;
        let old = self.basis[r];
        self.basic_row[old] = None;
        self.basis[r] = e;
        self.basic_row[e] = Some(r);
    }

    /// Pivots zero-valued artificials out of the basis and disables all artificials.
    fn drive_out_artificials(&mut self) {
        for r in 0..self.rows {
            if self.basis[r] < self.first_artificial {
                continue;
            }
            let mut pick: Option<usize> = None;
            for c in 0..self.first_artificial {
                if self.basic_row[c].is_some() || !nonzero(&self.t[r][c]) {
                    continue;
                }
                let better = match pick {
                    None => true,
                    Some(p) => !S::EXACT && self.t[r][c].abs() > self.t[r][p].abs(),
                };
                if better {
                    pick = Some(c);
                    if S::EXACT {
                        break;
                    }
                }
            }
            match pick {
                Some(c) => {
                    let a = self.basis[r];
                    self.value[a] = S::zero();
                    self.pivot(r, c);
                }
                // Redundant row: the artificial stays basic at zero and no
                // structural column can ever move it.
                None => {}
            }
        }
        for c in self.first_artificial..self.cols {
            self.enabled[c] = false;
            if self.basic_row[c].is_none() {
                self.value[c] = S::zero();
            }
        }
    }

    fn finish(&self, lp: &LinearProgram<S>, status: LpStatus) -> LpSolution<S> {
        let n = lp.num_vars;
        let mut values: Vec<S> = (0..n).map(|i| self.value[i].add_ref(&lp.lower[i])).collect();
        if !S::EXACT {
            for i in 0..n {
                if values[i] < lp.lower[i] {
                    values[i] = lp.lower[i].clone();
                }
                if let Some(u) = &lp.upper[i] {
                    if values[i] > *u {
                        values[i] = u.clone();
                    }
                }
            }
        }
        let objective = lp.objective_value(&values);
        let basic = (0..n).filter(|&i| self.basic_row[i].is_some()).collect();
        let at_upper = (0..n)
            .filter(|&i| self.basic_row[i].is_none() && self.at_upper[i])
            .collect();
        LpSolution {
            status,
            values,
            objective,
            basic,
            at_upper,
            iterations: self.iterations,
            rounds: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::model::Row;
    use crate::scalar::Rational;

    fn q(v: i64) -> Rational {
        Rational::from(v)
    }

    #[test]
    fn single_variable_bound() {
        let mut lp = LinearProgram::<Rational>::unit_box(1);
        lp.upper[0] = Some(q(10));
        lp.objective[0] = q(1);
        lp.push(Row::new([(0, q(1))], Cmp::Ge, q(3)));
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.values, vec![q(3)]);
        assert_eq!(s.objective, q(3));
    }

    #[test]
    fn symmetric_vertex() {
        let mut lp = LinearProgram::<Rational>::unit_box(2);
        lp.objective = vec![q(1), q(1)];
        lp.push(Row::sum([0, 1], Cmp::Ge, q(1)));
        let s = solve(&lp).unwrap();
        assert_eq!(s.objective, q(1));
        assert!(s.values == vec![q(1), q(0)] || s.values == vec![q(0), q(1)]);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::<Rational>::unit_box(2);
        lp.push(Row::sum([0, 1], Cmp::Ge, q(3)));
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);

        let mut lp = LinearProgram::<f64>::unit_box(1);
        lp.upper[0] = None;
        lp.objective[0] = -1.0;
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_rows_and_nonzero_lower_bounds() {
        // min 2x - y  s.t. x + y = 3, x - y <= 1, x in [1, 5], y in [0, 2]
        let mut lp = LinearProgram::<Rational>::unit_box(2);
        lp.lower = vec![q(1), q(0)];
        lp.upper = vec![Some(q(5)), Some(q(2))];
        lp.objective = vec![q(2), q(-1)];
        lp.push(Row::new([(0, q(1)), (1, q(1))], Cmp::Eq, q(3)));
        lp.push(Row::new([(0, q(1)), (1, q(-1))], Cmp::Le, q(1)));
        let s = solve(&lp).unwrap();
        assert_eq!(s.values, vec![q(1), q(2)]);
        assert_eq!(s.objective, q(0));
        let f = solve(&LinearProgram {
            num_vars: 2,
            objective: vec![2.0, -1.0],
            rows: vec![
                Row::new([(0, 1.0), (1, 1.0)], Cmp::Eq, 3.0),
                Row::new([(0, 1.0), (1, -1.0)], Cmp::Le, 1.0),
            ],
            lower: vec![1.0, 0.0],
            upper: vec![Some(5.0), Some(2.0)],
            names: None,
        })
        .unwrap();
        assert!((f.objective - 0.0).abs() < 1e-9);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::<Rational>::unit_box(2);
        lp.objective = vec![q(1), q(2)];
        lp.push(Row::sum([0, 1], Cmp::Eq, q(1)));
        lp.push(Row::new([(0, q(2)), (1, q(2))], Cmp::Eq, q(2)));
        let s = solve(&lp).unwrap();
        assert_eq!(s.values, vec![q(1), q(0)]);
    }
}
