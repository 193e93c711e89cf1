//! Cutting-plane loop: solve, ask an oracle for violated rows, add them, repeat.

use std::collections::HashMap;

use super::model::{Cmp, LinearProgram, LpSolution, Row};
use super::simplex::{solve_with, SimplexOptions};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct SeparationOptions {
    pub max_rounds: usize,
    pub max_cuts_per_round: usize,
    pub simplex: SimplexOptions,
}

impl Default for SeparationOptions {
    fn default() -> Self {
        SeparationOptions {
            max_rounds: 200,
            max_cuts_per_round: 50,
            simplex: SimplexOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SeparationOutcome<S> {
    pub solution: LpSolution<S>,
    /// The base program plus every cut that was added.
    pub lp: LinearProgram<S>,
    pub cuts_added: usize,
}

/// Canonical text key of a row: `≤` rows are negated into `≥` form, then the row
/// is scaled so its first coefficient has absolute value one.
pub fn row_key<S: Scalar>(row: &Row<S>) -> String {
    let (mut coeffs, mut rhs, cmp) = match row.cmp {
        Cmp::Le => (
            row.coeffs.iter().map(|(i, a)| (*i, -a.clone())).collect::<Vec<_>>(),
            -row.rhs.clone(),
            Cmp::Ge,
        ),
        c => (row.coeffs.clone(), row.rhs.clone(), c),
    };
    if let Some((_, first)) = coeffs.first() {
        let scale = first.abs();
        for (_, a) in &mut coeffs {
            *a = a.div_ref(&scale);
        }
        rhs = rhs.div_ref(&scale);
    }
    let num = |v: &S| {
        if S::EXACT {
            v.to_rational().to_string()
        } else {
            format!("{:.9e}", v.to_f64())
        }
    };
    let mut key = format!("{cmp:?}|{}|", num(&rhs));
    for (i, a) in &coeffs {
        key.push_str(&format!("{i}:{};", num(a)));
    }
    key
}

/// Runs the cutting-plane loop. The oracle receives the current optimal point and
/// returns rows it violates (an empty list certifies feasibility).
pub fn solve_with_separation<S, F>(
    base: &LinearProgram<S>,
    mut oracle: F,
    opts: &SeparationOptions,
) -> Result<SeparationOutcome<S>>
where
    S: Scalar,
    F: FnMut(&[S]) -> Vec<Row<S>>,
{
    let mut lp = base.clone();
    let mut seen: HashMap<String, usize> = lp.rows.iter().enumerate().map(|(r, row)| (row_key(row), r)).collect();
    let mut cuts_added = 0;
    let mut rounds = 0;
    loop {
        let mut solution = solve_with(&lp, &opts.simplex)?;
        solution.rounds = rounds;
        if !solution.is_optimal() {
            return Ok(SeparationOutcome {
                solution,
                lp,
                cuts_added,
            });
        }
        let cuts = oracle(&solution.values);
        if cuts.is_empty() {
            return Ok(SeparationOutcome {
                solution,
                lp,
                cuts_added,
            });
        }
        if rounds >= opts.max_rounds {
            return Err(Error::RoundsExhausted {
                rounds,
                last_point: solution.values.iter().map(|v| v.to_f64()).collect(),
            });
        }
        rounds += 1;
        let mut added = 0;
        for cut in cuts {
            let key = row_key(&cut);
            if let Some(&existing) = seen.get(&key) {
                if existing < base.rows.len() + cuts_added {
                    return Err(Error::DuplicateCut(existing));
                }
                continue;
            }
            if added == opts.max_cuts_per_round {
                break;
            }
            seen.insert(key, lp.rows.len());
            lp.push(cut);
            added += 1;
        }
        cuts_added += added;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::simplex::solve;
    use crate::scalar::Rational;

    fn q(v: i64) -> Rational {
        Rational::from(v)
    }

    fn small_lp() -> LinearProgram<Rational> {
        let mut lp = LinearProgram::unit_box(2);
        lp.objective = vec![q(1), q(1)];
        lp.push(Row::sum([0, 1], Cmp::Ge, q(1)));
        lp
    }

    #[test]
    fn silent_oracle_matches_plain_solve() {
        let lp = small_lp();
        let out = solve_with_separation(&lp, |_| vec![], &SeparationOptions::default()).unwrap();
        let plain = solve(&lp).unwrap();
        assert_eq!(out.solution.values, plain.values);
        assert_eq!(out.cuts_added, 0);
    }

    #[test]
    fn adds_cuts_until_clean() {
        let lp = small_lp();
        let out = solve_with_separation(
            &lp,
            |x| {
                if x[0] < q(1) / q(2) {
                    vec![Row::new([(0, q(2))], Cmp::Ge, q(1))]
                } else {
                    vec![]
                }
            },
            &SeparationOptions::default(),
        )
        .unwrap();
        assert!(out.solution.values[0] >= q(1) / q(2));
        assert_eq!(out.solution.objective, q(1));
    }

    #[test]
    fn duplicate_cut_is_an_error() {
        let lp = small_lp();
        let err = solve_with_separation(
            &lp,
            |_| vec![Row::new([(0, q(-2)), (1, q(-2))], Cmp::Le, q(-2))],
            &SeparationOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateCut(0)));
    }

    #[test]
    fn rounds_exhausted_carries_point() {
        let lp = small_lp();
        let mut k = 0;
        let opts = SeparationOptions {
            max_rounds: 3,
            ..Default::default()
        };
        let err = solve_with_separation(
            &lp,
            |_| {
                k += 1;
                vec![Row::new([(0, q(1)), (1, q(k))], Cmp::Ge, q(0))]
            },
            &opts,
        )
        .unwrap_err();
        match err {
            Error::RoundsExhausted { rounds, last_point } => {
                assert_eq!(rounds, 3);
                assert_eq!(last_point.len(), 2);
            }
            other => panic!("unexpected {other}"),
        }
    }
}
