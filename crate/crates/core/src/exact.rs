//! Enumeration oracles and the exact solvers for line and HST metrics.
//!
//! On a line, or on an HST whose leaves are equidistant from every ancestor, each
//! client can be served by one contiguous stretch of facility mass. Cutting the
//! mass axis at every stretch endpoint gives an LP whose rows are intervals, so
//! its vertices are integral.

use std::cmp::Ordering;

use crate::error::{ensure_invariant, Error, Result};
use crate::instance::{
    evaluate_ftfl_cost, evaluate_ftmed_cost, Distances, FtflInstance, FtmedInstance, Metric, OpenSet, Point,
};
use crate::lp::{self, Cmp, LinearProgram, Row};
use crate::relaxation::{build_ftmed_lp, y_var};
use crate::scalar::{Rational, Scalar};

pub const BRUTE_FTMED_CAP: u64 = 2_000_000;
pub const BRUTE_FTFL_CAP: u64 = 1 << 22;

#[derive(Clone, Debug, PartialEq)]
pub struct ExactSolution<S> {
    pub value: S,
    pub open: OpenSet,
}

/// `C(n, k)`, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for t in 0..k {
        acc = acc * (n - t) as u128 / (t + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

fn better<S: Scalar>(cost: &S, set: &[usize], best: &Option<(S, Vec<usize>)>) -> bool {
    match best {
        None => true,
        Some((c, s)) => match cost.partial_cmp(c) {
            Some(Ordering::Less) => true,
            Some(Ordering::Equal) => set < s.as_slice(),
            _ => false,
        },
    }
}

/// Minimum over all `k`-subsets; ties go to the lexicographically smallest subset.
pub fn brute_force_ftmed<S: Scalar>(inst: &FtmedInstance, dist: &Distances<S>, cap: u64) -> Result<ExactSolution<S>> {
    let (n, k) = (inst.n(), inst.k);
    let count = binomial(n, k);
    if count > cap {
        return Err(Error::CapExceeded { count: count as u128, cap: cap as u128 });
    }
    let mut combo: Vec<usize> = (0..k).collect();
    let mut best: Option<(S, Vec<usize>)> = None;
    loop {
        let open = OpenSet::new(combo.clone());
        let cost = evaluate_ftmed_cost(inst, dist, &open)?;
        if better(&cost, &combo, &best) {
            best = Some((cost, combo.clone()));
        }
        // next combination in lexicographic order
        let mut t = k;
        while t > 0 && combo[t - 1] == n - k + t - 1 {
            t -= 1;
        }
        if t == 0 {
            break;
        }
        combo[t - 1] += 1;
        for u in t..k {
            combo[u] = combo[u - 1] + 1;
        }
    }
    let (value, set) = best.ok_or_else(|| Error::Infeasible("no feasible subset".into()))?;
    Ok(ExactSolution {
        value,
        open: OpenSet::new(set),
    })
}

/// Minimum over all subsets with at least `max r_j` facilities.
pub fn brute_force_ftfl<S: Scalar>(inst: &FtflInstance, dist: &Distances<S>, cap: u64) -> Result<ExactSolution<S>> {
    let n = inst.n();
    let count = if n >= 64 { u64::MAX } else { 1u64 << n };
    if count > cap {
        return Err(Error::CapExceeded { count: count as u128, cap: cap as u128 });
    }
    let need = inst.max_requirement();
    let mut best: Option<(S, Vec<usize>)> = None;
    for mask in 0..count {
        if (mask.count_ones() as usize) < need {
            continue;
        }
        let set: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let cost = evaluate_ftfl_cost(inst, dist, &OpenSet::new(set.clone()))?;
        if better(&cost, &set, &best) {
            best = Some((cost, set));
        }
    }
    let (value, set) = best.ok_or_else(|| Error::Infeasible("no subset is large enough".into()))?;
    Ok(ExactSolution {
        value,
        open: OpenSet::new(set),
    })
}

/// First row whose support is not a contiguous range of variable indices.
pub fn check_interval_rows<S: Scalar>(lp: &LinearProgram<S>) -> std::result::Result<(), usize> {
    for (r, row) in lp.rows.iter().enumerate() {
        let ok = row.coeffs.windows(2).all(|w| w[1].0 == w[0].0 + 1);
        if !ok {
            return Err(r);
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct ConsecutiveSolution {
    pub value: Rational,
    pub open: OpenSet,
    pub lp1_value: Rational,
    pub lp2_value: Rational,
    /// Variables of the interval LP in axis order.
    pub pieces: Vec<(usize, Rational)>,
    /// Mass-axis stretch `[a, b)` serving each client.
    pub stretches: Vec<(Rational, Rational)>,
    pub lp2: LinearProgram<Rational>,
}

pub fn solve_line_exact(inst: &FtmedInstance) -> Result<ConsecutiveSolution> {
    if !matches!(inst.metric, Metric::Line { .. }) {
        return Err(Error::Unsupported("exact-line needs a line metric".into()));
    }
    solve_consecutive(inst)
}

pub fn solve_hst_exact(inst: &FtmedInstance) -> Result<ConsecutiveSolution> {
    if !matches!(inst.metric, Metric::Hst(_)) {
        return Err(Error::Unsupported("exact-hst needs an HST metric".into()));
    }
    solve_consecutive(inst)
}

/// Grows the stretch of client `j` ring by ring (facilities at equal distance),
/// each ring extending the current stretch on its left and right. A partial ring
/// is drawn first from the side that has grown less so far, ties to the right.
fn stretch_for(
    j: usize,
    r: usize,
    ord: &[usize],
    off: &[Rational],
    dist: &Distances<Rational>,
) -> Result<(Rational, Rational)> {
    let mut positions: Vec<usize> = (0..ord.len()).collect();
    positions.sort_by(|&a, &b| dist.fc(ord[a], j).cmp(dist.fc(ord[b], j)).then(a.cmp(&b)));
    let mut need = Rational::from(r);
    let zero = Rational::from(0);
    let (mut lo, mut hi) = (0usize, 0usize);
    let (mut a, mut b) = (zero.clone(), zero.clone());
    let (mut grown_left, mut grown_right) = (zero.clone(), zero.clone());
    let mut first = true;
    let mut idx = 0;
    while need > 0 {
        if idx == positions.len() {
            return Err(Error::Infeasible(format!("client {j} lacks volume")));
        }
        let d = dist.fc(ord[positions[idx]], j).clone();
        let mut ring = Vec::new();
        while idx < positions.len() && *dist.fc(ord[positions[idx]], j) == d {
            ring.push(positions[idx]);
            idx += 1;
        }
        ring.sort_unstable();
        let contiguous = ring.windows(2).all(|w| w[1] == w[0] + 1);
        if first {
            ensure_invariant!(contiguous, "client {j}: nearest facilities are not adjacent on the axis");
            lo = ring[0];
            hi = ring[ring.len() - 1] + 1;
            let take = (&off[hi] - &off[lo]).min(need.clone());
            a = off[lo].clone();
            b = &a + &take;
            need -= take;
            first = false;
            continue;
        }
        let left: Vec<usize> = ring.iter().copied().filter(|&p| p < lo).collect();
        let right: Vec<usize> = ring.iter().copied().filter(|&p| p >= hi).collect();
        let new_lo = lo - left.len();
        let new_hi = hi + right.len();
        ensure_invariant!(
            left.iter().copied().eq(new_lo..lo) && right.iter().copied().eq(hi..new_hi),
            "client {j}: facilities at distance {d} do not extend the served stretch"
        );
        let lm = &off[lo] - &off[new_lo];
        let rm = &off[new_hi] - &off[hi];
        if &lm + &rm <= need {
            need -= &lm + &rm;
            grown_left += lm;
            grown_right += rm;
            a = off[new_lo].clone();
            b = off[new_hi].clone();
        } else {
            let left_first = grown_left < grown_right;
            let (first_mass, second_mass) = if left_first { (&lm, &rm) } else { (&rm, &lm) };
            let t1 = first_mass.clone().min(need.clone());
            let t2 = second_mass.clone().min(&need - &t1);
            let (tl, tr) = if left_first { (t1, t2) } else { (t2, t1) };
            a = &off[lo] - &tl;
            b = &off[hi] + &tr;
            need = zero.clone();
        }
        lo = new_lo;
        hi = new_hi;
    }
    Ok((a, b))
}

/// The interval LP built from openings `y` (one variable per mass piece).
#[derive(Clone, Debug)]
pub struct IntervalLp {
    /// `(parent, volume)` per variable, in axis order.
    pub pieces: Vec<(usize, Rational)>,
    /// Mass-axis stretch `[a, b)` serving each client.
    pub stretches: Vec<(Rational, Rational)>,
    pub lp: LinearProgram<Rational>,
}

impl IntervalLp {
    /// The openings `y` restated on the pieces.
    pub fn split_point(&self) -> Vec<Rational> {
        self.pieces.iter().map(|(_, v)| v.clone()).collect()
    }
}

/// Facility order along the mass axis: by coordinate on a line, by preorder
/// leaf position on an HST (index order inside a leaf).
pub fn axis_order(inst: &FtmedInstance) -> Result<Vec<usize>> {
    match &inst.metric {
        Metric::Line { facilities, .. } => {
            let mut order: Vec<usize> = (0..facilities.len()).collect();
            order.sort_by(|&a, &b| facilities[a].cmp(&facilities[b]).then(a.cmp(&b)));
            Ok(order)
        }
        Metric::Hst(h) => {
            if !h.is_equidistant() {
                return Err(Error::Unsupported(
                    "exact-hst needs every node to be equidistant from the leaves below it".into(),
                ));
            }
            let mut order = Vec::new();
            for v in h.preorder() {
                let mut here: Vec<usize> = h.nodes()[v]
                    .points
                    .iter()
                    .filter_map(|p| match p {
                        Point::Facility(i) => Some(*i),
                        Point::Client(_) => None,
                    })
                    .collect();
                here.sort_unstable();
                order.extend(here);
            }
            Ok(order)
        }
        _ => Err(Error::Unsupported("consecutive serving needs a line or HST metric".into())),
    }
}

/// Cuts the mass axis at every client stretch endpoint and writes the LP
/// `min Σ_j Σ_{F_j} d y`, `y(F_j) ≥ r_j`, `y(sp(i)) ≤ 1`, `Σ y ≤ k`.
pub fn interval_lp(inst: &FtmedInstance, dist: &Distances<Rational>, y: &[Rational]) -> Result<IntervalLp> {
    let (n, m) = (inst.n(), inst.m());
    ensure_invariant!(y.len() == n, "{} openings for {n} facilities", y.len());
    let order = axis_order(inst)?;
    let ord: Vec<usize> = order.iter().copied().filter(|&i| y[i] > 0).collect();
    let mut off = vec![Rational::from(0)];
    for &i in &ord {
        let next = off.last().unwrap() + &y[i];
        off.push(next);
    }

    let mut stretches = Vec::with_capacity(m);
    for j in 0..m {
        stretches.push(stretch_for(j, inst.requirements[j], &ord, &off, dist)?);
    }
    let mut cuts: Vec<Rational> = off.clone();
    for (a, b) in &stretches {
        cuts.push(a.clone());
        cuts.push(b.clone());
    }
    cuts.sort();
    cuts.dedup();
    let mut pieces: Vec<(usize, Rational)> = Vec::new();
    let mut starts = Vec::new();
    let mut slot = 0;
    for w in cuts.windows(2) {
        while off[slot + 1] <= w[0] {
            slot += 1;
        }
        pieces.push((ord[slot], &w[1] - &w[0]));
        starts.push(w[0].clone());
    }
    let np = pieces.len();

    let mut lp2 = LinearProgram::unit_box(np);
    for (j, (a, b)) in stretches.iter().enumerate() {
        let members: Vec<usize> = (0..np).filter(|&p| starts[p] >= *a && starts[p] < *b).collect();
        for &p in &members {
            lp2.objective[p] += dist.fc(pieces[p].0, j).clone();
        }
        lp2.push(Row::sum(members, Cmp::Ge, Rational::from(inst.requirements[j])));
    }
    for i in 0..n {
        let members: Vec<usize> = (0..np).filter(|&p| pieces[p].0 == i).collect();
        if !members.is_empty() {
            lp2.push(Row::sum(members, Cmp::Le, Rational::from(1)));
        }
    }
    lp2.push(Row::sum(0..np, Cmp::Le, Rational::from(inst.k)));
    if let Err(r) = check_interval_rows(&lp2) {
        return Err(Error::invariant(format!("row {r} of the interval LP is not an interval")));
    }
    let out = IntervalLp {
        pieces,
        stretches,
        lp: lp2,
    };
    ensure_invariant!(out.lp.is_feasible(&out.split_point()), "split openings violate the interval LP");
    Ok(out)
}

/// Solves the interval LP, asserts an integral vertex, and maps it to facilities.
pub fn solve_interval_lp(inst: &FtmedInstance, dist: &Distances<Rational>, ilp: &IntervalLp) -> Result<(OpenSet, Rational)> {
    let sol = lp::solve(&ilp.lp)?;
    ensure_invariant!(sol.is_optimal(), "interval LP is {}", sol.status.as_str());
    let mut open = Vec::new();
    for (p, v) in sol.values.iter().enumerate() {
        ensure_invariant!(*v == 0 || *v == 1, "non-integral vertex: piece {p} = {v}");
        if *v == 1 {
            open.push(ilp.pieces[p].0);
        }
    }
    let count = open.len();
    let open = OpenSet::new(open);
    ensure_invariant!(open.len() == count, "two pieces of one facility are open");
    let value = evaluate_ftmed_cost(inst, dist, &open)?;
    ensure_invariant!(
        value <= sol.objective,
        "evaluated cost {value} exceeds interval LP value {}",
        sol.objective
    );
    Ok((open, sol.objective))
}

fn solve_consecutive(inst: &FtmedInstance) -> Result<ConsecutiveSolution> {
    let dist = Distances::<Rational>::new(&inst.metric)?;
    let lp1 = build_ftmed_lp(inst, &dist);
    let sol = lp::solve(&lp1)?;
    if !sol.is_optimal() {
        return Err(Error::Infeasible(format!("FTMed LP is {}", sol.status.as_str())));
    }
    let y: Vec<Rational> = (0..inst.n()).map(|i| sol.values[y_var(i)].clone()).collect();
    let ilp = interval_lp(inst, &dist, &y)?;
    let split_cost = ilp.lp.objective_value(&ilp.split_point());
    ensure_invariant!(
        split_cost == sol.objective,
        "split openings cost {split_cost}, LP value {}",
        sol.objective
    );
    let (open, lp2_value) = solve_interval_lp(inst, &dist, &ilp)?;
    ensure_invariant!(
        lp2_value == sol.objective,
        "interval LP value {lp2_value} differs from LP value {}",
        sol.objective
    );
    let value = evaluate_ftmed_cost(inst, &dist, &open)?;
    ensure_invariant!(value == lp2_value, "evaluated cost {value} differs from interval LP value {lp2_value}");
    Ok(ConsecutiveSolution {
        value,
        open,
        lp1_value: sol.objective,
        lp2_value,
        pieces: ilp.pieces,
        stretches: ilp.stretches,
        lp2: ilp.lp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: i64) -> Rational {
        Rational::from(v)
    }

    fn line(fac: &[i64], cli: &[i64], k: usize, r: Vec<usize>) -> FtmedInstance {
        FtmedInstance::new(
            Metric::Line {
                facilities: fac.iter().map(|&v| q(v)).collect(),
                clients: cli.iter().map(|&v| q(v)).collect(),
            },
            k,
            r,
        )
        .unwrap()
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(12, 4), 495);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(200, 100), u64::MAX);
    }

    #[test]
    fn three_point_line() {
        let inst = line(&[0, 1, 2], &[0], 2, vec![2]);
        let d = Distances::<Rational>::new(&inst.metric).unwrap();
        let brute = brute_force_ftmed(&inst, &d, BRUTE_FTMED_CAP).unwrap();
        assert_eq!(brute.value, q(1));
        assert_eq!(brute.open.facilities(), &[0, 1]);
        let exact = solve_line_exact(&inst).unwrap();
        assert_eq!(exact.value, q(1));
        assert_eq!(exact.lp1_value, q(1));
    }

    #[test]
    fn all_open_when_k_is_n() {
        let inst = line(&[5, 0, 3], &[1, 4], 3, vec![2, 3]);
        let d = Distances::<Rational>::new(&inst.metric).unwrap();
        let all = evaluate_ftmed_cost(&inst, &d, &OpenSet::new(vec![0, 1, 2])).unwrap();
        assert_eq!(brute_force_ftmed(&inst, &d, BRUTE_FTMED_CAP).unwrap().value, all);
        assert_eq!(solve_line_exact(&inst).unwrap().value, all);
    }

    #[test]
    fn cap_is_enforced() {
        let inst = line(&[0, 1, 2, 3], &[0], 2, vec![1]);
        let d = Distances::<Rational>::new(&inst.metric).unwrap();
        assert!(matches!(
            brute_force_ftmed(&inst, &d, 5),
            Err(Error::CapExceeded { count: 6, cap: 5 })
        ));
    }

    #[test]
    fn ftfl_single_facility() {
        let inst = FtflInstance::new(
            Metric::Line {
                facilities: vec![q(2)],
                clients: vec![q(0)],
            },
            vec![q(5)],
            vec![vec![q(1)]],
        )
        .unwrap();
        let d = Distances::<Rational>::new(&inst.metric).unwrap();
        assert_eq!(brute_force_ftfl(&inst, &d, BRUTE_FTFL_CAP).unwrap().value, q(7));
    }

    #[test]
    fn interval_rows() {
        let mut lp = LinearProgram::<Rational>::unit_box(4);
        lp.push(Row::sum([1, 2, 3], Cmp::Ge, q(1)));
        assert_eq!(check_interval_rows(&lp), Ok(()));
        lp.push(Row::sum([0, 2], Cmp::Ge, q(1)));
        assert_eq!(check_interval_rows(&lp), Err(1));
    }

    #[test]
    fn wrong_metric_is_rejected() {
        let inst = line(&[0, 1], &[0], 1, vec![1]);
        assert!(matches!(solve_hst_exact(&inst), Err(Error::Unsupported(_))));
    }
}
