//! Linear programs, a simplex solver and a cutting-plane loop.

mod model;
mod separation;
mod simplex;

pub use model::{Cmp, LinearProgram, LpSolution, LpStatus, Row};
pub use separation::{row_key, solve_with_separation, SeparationOptions, SeparationOutcome};
pub use simplex::{solve, solve_with, SimplexOptions};

use crate::scalar::Scalar;

/// Rank of the constraints active at `x` (tight rows plus variables at a bound).
/// `x` is a vertex of the feasible region exactly when the rank is `num_vars`.
pub fn active_rank<S: Scalar>(lp: &LinearProgram<S>, x: &[S]) -> usize {
    let n = lp.num_vars;
    let mut rows: Vec<Vec<S>> = Vec::new();
    for row in &lp.rows {
        if row.is_tight(x) {
            let mut dense = vec![S::zero(); n];
            for (i, a) in &row.coeffs {
                dense[*i] = a.clone();
            }
            rows.push(dense);
        }
    }
    for i in 0..n {
        let at_bound = x[i].eq_tol(&lp.lower[i]) || lp.upper[i].as_ref().is_some_and(|u| x[i].eq_tol(u));
        if at_bound {
            let mut unit = vec![S::zero(); n];
            unit[i] = S::one();
            rows.push(unit);
        }
    }
    rank(rows, n)
}

/// Row rank by Gaussian elimination (exact for rationals, partial pivoting for floats).
pub fn rank<S: Scalar>(mut rows: Vec<Vec<S>>, cols: usize) -> usize {
    let mut r = 0;
    for c in 0..cols {
        let mut best: Option<usize> = None;
        for i in r..rows.len() {
            if rows[i][c].is_zero_tol() {
                continue;
            }
            if best.is_none_or(|b| rows[i][c].abs() > rows[b][c].abs()) {
                best = Some(i);
                if S::EXACT {
                    break;
                }
            }
        }
        let Some(p) = best else { continue };
        rows.swap(r, p);
        let pivot = rows[r][c].clone();
        for i in r + 1..rows.len() {
            if rows[i][c] == S::zero() {
                continue;
            }
            let f = rows[i][c].div_ref(&pivot);
            for k in c..cols {
                let v = f.mul_ref(&rows[r][k]);
                rows[i][k] -= v;
            }
        }
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    r
}
