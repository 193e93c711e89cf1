//! The natural FTMed LP and its normalization into clone form.
//!
//! After normalization every client `j` owns a set `F_j` of clones holding exactly
//! `r_j` volume, made of the closest available clone mass. Clones remember their
//! original facility (`parent`), which is the map `g`.

use std::cmp::Ordering;

use serde_json::{json, Value};

use crate::error::{ensure_invariant, Error, Result};
use crate::instance::{Distances, FtmedInstance};
use crate::lp::{self, Cmp, LinearProgram, LpSolution, Row};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct CloneFacility<S> {
    pub parent: usize,
    pub y: S,
}

#[derive(Clone, Debug)]
pub struct FractionalSolution<S> {
    /// Indexed by clone id.
    pub clones: Vec<CloneFacility<S>>,
    /// `served[j]` = clone ids of `F_j`, in ascending id order.
    pub served: Vec<Vec<usize>>,
    pub lp_value: S,
}

/// Statistics of the `t`-th unit of volume of a clone set, seen from one client.
#[derive(Clone, Debug, PartialEq)]
pub struct PrefixStats<S> {
    pub t: usize,
    pub d_av: S,
    pub d_max: S,
}

/// Distance statistics of a client with respect to its served set `F_j`.
#[derive(Clone, Debug)]
pub struct ClientStats<S> {
    pub d_av: S,
    pub d_max: S,
    /// `levels[t-1]` is the statistic of the `t`-th unit, for `t = 1..=r_j`.
    pub levels: Vec<PrefixStats<S>>,
}

impl<S: Scalar> ClientStats<S> {
    /// `d_av^{r_j}(j)`
    pub fn d_av_last(&self) -> &S {
        &self.levels.last().expect("r_j >= 1").d_av
    }
}

/// Index of `y_i` in the LP.
pub fn y_var(i: usize) -> usize {
    i
}

/// Index of `x_{i,j}` in the LP.
pub fn x_var(n: usize, i: usize, j: usize) -> usize {
    n + j * n + i
}

/// The natural relaxation: `y_i − x_ij ≥ 0`, `Σ_i x_ij = r_j`, `Σ_i y_i ≤ k`, all in `[0, 1]`.
pub fn build_ftmed_lp<S: Scalar>(inst: &FtmedInstance, dist: &Distances<S>) -> LinearProgram<S> {
    let (n, m) = (inst.n(), inst.m());
    let mut lp = LinearProgram::unit_box(n + n * m);
    for j in 0..m {
        for i in 0..n {
            lp.objective[x_var(n, i, j)] = dist.fc(i, j).clone();
        }
    }
    for j in 0..m {
        for i in 0..n {
            lp.push(Row::new(
                [(y_var(i), S::one()), (x_var(n, i, j), -S::one())],
                Cmp::Ge,
                S::zero(),
            ));
        }
    }
    for j in 0..m {
        lp.push(Row::sum(
            (0..n).map(|i| x_var(n, i, j)),
            Cmp::Eq,
            S::from_usize(inst.requirements[j]),
        ));
    }
    lp.push(Row::sum(0..n, Cmp::Le, S::from_usize(inst.k)));
    let mut names: Vec<String> = (0..n).map(|i| format!("y{i}")).collect();
    for j in 0..m {
        for i in 0..n {
            names.push(format!("x{i}_{j}"));
        }
    }
    lp.names = Some(names);
    lp
}

impl<S: Scalar> FractionalSolution<S> {
    pub fn distance(&self, dist: &Distances<S>, j: usize, clone: usize) -> S {
        dist.fc(self.clones[clone].parent, j).clone()
    }

    pub fn volume(&self, set: &[usize]) -> S {
        S::sum(set.iter().map(|&c| &self.clones[c].y))
    }

    pub fn total_volume(&self) -> S {
        S::sum(self.clones.iter().map(|c| &c.y))
    }

    pub fn parent_count(&self) -> usize {
        self.clones.iter().map(|c| c.parent + 1).max().unwrap_or(0)
    }

    /// Clone ids grouped by parent.
    pub fn classes(&self, n: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); n];
        for (id, c) in self.clones.iter().enumerate() {
            out[c.parent].push(id);
        }
        out
    }

    fn order(&self, dist: &Distances<S>, j: usize, a: usize, b: usize) -> Ordering {
        let (pa, pb) = (self.clones[a].parent, self.clones[b].parent);
        dist.fc(pa, j)
            .partial_cmp(dist.fc(pb, j))
            .unwrap_or(Ordering::Equal)
            .then(pa.cmp(&pb))
            .then(a.cmp(&b))
    }

    /// `set` sorted by (distance to `j`, parent, clone id).
    pub fn sorted_for(&self, dist: &Distances<S>, j: usize, set: &[usize]) -> Vec<usize> {
        let mut v = set.to_vec();
        v.sort_by(|&a, &b| self.order(dist, j, a, b));
        v
    }

    /// Splits `clone` so that it keeps volume `keep` and a new clone (returned)
    /// receives the remainder. Every served set holding `clone` gains the new clone.
    pub fn split_clone(&mut self, clone: usize, keep: S) -> usize {
        let rest = self.clones[clone].y.sub_ref(&keep);
        let parent = self.clones[clone].parent;
        self.clones[clone].y = keep;
        let id = self.clones.len();
        self.clones.push(CloneFacility { parent, y: rest });
        for set in &mut self.served {
            if set.contains(&clone) {
                set.push(id);
            }
        }
        id
    }

    /// Average and maximum distance from `j` to `set`.
    pub fn set_stats(&self, dist: &Distances<S>, j: usize, set: &[usize]) -> Result<(S, S)> {
        let vol = self.volume(set);
        if !vol.is_pos() {
            return Err(Error::InvalidInput("statistics of an empty set".into()));
        }
        let mut acc = S::zero();
        let mut max = S::zero();
        for &c in set {
            let d = self.distance(dist, j, c);
            acc += d.mul_ref(&self.clones[c].y);
            max = S::max_of(max, d);
        }
        Ok((acc.div_ref(&vol), max))
    }

    /// Statistics of the mass lying between cumulative volume `t−1` and `t` when
    /// `set` is sorted by distance from `j`; boundary clones count partially.
    pub fn prefix_stats(&self, dist: &Distances<S>, j: usize, set: &[usize], t: usize) -> Result<PrefixStats<S>> {
        if t == 0 {
            return Err(Error::InvalidInput("prefix level starts at 1".into()));
        }
        let vol = self.volume(set);
        let (lo_t, hi_t) = (S::from_usize(t - 1), S::from_usize(t));
        if vol.lt_tol(&hi_t) {
            return Err(Error::InvalidInput(format!(
                "set volume {vol} is below the requested level {t}"
            )));
        }
        let mut cum = S::zero();
        let mut acc = S::zero();
        let mut max = S::zero();
        let mut covered = S::zero();
        for c in self.sorted_for(dist, j, set) {
            let lo = cum.clone();
            cum += self.clones[c].y.clone();
            let overlap = S::min_of(cum.clone(), hi_t.clone()).sub_ref(&S::max_of(lo, lo_t.clone()));
            if overlap.is_pos() {
                let d = self.distance(dist, j, c);
                acc += d.mul_ref(&overlap);
                covered += overlap;
                max = S::max_of(max, d);
            }
            if cum.ge_tol(&hi_t) {
                break;
            }
        }
        Ok(PrefixStats {
            t,
            d_av: acc.div_ref(&covered),
            d_max: max,
        })
    }

    pub fn client_stats(&self, dist: &Distances<S>, j: usize, r: usize) -> Result<ClientStats<S>> {
        let set = &self.served[j];
        let (d_av, d_max) = self.set_stats(dist, j, set)?;
        let levels = (1..=r).map(|t| self.prefix_stats(dist, j, set, t)).collect::<Result<_>>()?;
        Ok(ClientStats { d_av, d_max, levels })
    }

    /// Σ_j Σ_{i ∈ F_j} d(j, i) y_i
    pub fn served_cost(&self, dist: &Distances<S>) -> S {
        let mut acc = S::zero();
        for (j, set) in self.served.iter().enumerate() {
            for &c in set {
                acc += self.distance(dist, j, c).mul_ref(&self.clones[c].y);
            }
        }
        acc
    }

    pub fn debug_json(&self) -> Value {
        json!({
            "lp_value": self.lp_value.to_string(),
            "clones": self.clones.iter().enumerate().map(|(id, c)| json!({
                "id": id, "parent": c.parent, "y": c.y.to_string(),
            })).collect::<Vec<_>>(),
            "served": self.served,
        })
    }
}

/// Turns an optimal LP solution into clone form with closest-volume served sets.
pub fn normalize<S: Scalar>(
    inst: &FtmedInstance,
    dist: &Distances<S>,
    lp: &LinearProgram<S>,
    sol: &LpSolution<S>,
) -> Result<FractionalSolution<S>> {
    if !sol.is_optimal() {
        return Err(Error::InvalidInput(format!("LP solution is {}", sol.status.as_str())));
    }
    if let Some(v) = lp.first_violation(&sol.values) {
        return Err(Error::InvalidInput(format!("LP solution is infeasible: {v}")));
    }
    let (n, m) = (inst.n(), inst.m());
    let x = &sol.values;

    // Split each facility at the distinct x_{i,j} levels so that every x becomes 0 or y;
    // client j is served by the pieces below its own level.
    let mut clones = Vec::new();
    let mut served = vec![Vec::new(); m];
    for i in 0..n {
        let y = &x[y_var(i)];
        if !y.is_pos() {
            continue;
        }
        let mut cuts: Vec<S> = (0..m)
            .map(|j| x[x_var(n, i, j)].clone())
            .filter(|v| v.is_pos() && v.lt_tol(y))
            .collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        cuts.dedup_by(|a, b| a.eq_tol(b));
        cuts.push(y.clone());
        let mut prev = S::zero();
        for cut in cuts {
            let id = clones.len();
            for (j, set) in served.iter_mut().enumerate() {
                if cut.le_tol(&x[x_var(n, i, j)]) {
                    set.push(id);
                }
            }
            clones.push(CloneFacility {
                parent: i,
                y: cut.sub_ref(&prev),
            });
            prev = cut;
        }
    }
    let fsol = FractionalSolution {
        clones,
        served,
        lp_value: sol.objective.clone(),
    };
    for j in 0..m {
        let vol = fsol.volume(&fsol.served[j]);
        if !vol.eq_tol(&S::from_usize(inst.requirements[j])) {
            return Err(Error::InvalidInput(format!(
                "client {j} is served {vol} volume, requirement {}",
                inst.requirements[j]
            )));
        }
    }
    // An optimal solution serves every client from its closest volume; a
    // violation means a cheaper assignment exists.
    if let Err(e) = check_fractional(inst, dist, &fsol) {
        return Err(Error::InvalidInput(format!("LP solution is not optimal: {e}")));
    }
    Ok(fsol)
}

/// Raises total volume to exactly `k` with fresh clones that serve nobody,
/// filling parents with residual capacity in ascending index order.
pub fn pad_to_k<S: Scalar>(mut fsol: FractionalSolution<S>, n: usize, k: usize) -> Result<FractionalSolution<S>> {
    let target = S::from_usize(k);
    let mut total = fsol.total_volume();
    if total.gt_tol(&target) {
        return Err(Error::InvalidInput(format!("total volume {total} exceeds k = {k}")));
    }
    let mut mass = vec![S::zero(); n];
    for c in &fsol.clones {
        mass[c.parent] += c.y.clone();
    }
    for (p, used) in mass.iter().enumerate() {
        let missing = target.sub_ref(&total);
        if !missing.is_pos() {
            break;
        }
        let residual = S::one().sub_ref(used);
        if !residual.is_pos() {
            continue;
        }
        let add = S::min_of(residual, missing);
        total += add.clone();
        fsol.clones.push(CloneFacility { parent: p, y: add });
    }
    if !total.eq_tol(&target) {
        return Err(Error::Infeasible(format!("cannot pad volume {total} up to k = {k}")));
    }
    Ok(fsol)
}

/// Checks the structural properties of a normalized solution.
pub fn check_fractional<S: Scalar>(
    inst: &FtmedInstance,
    dist: &Distances<S>,
    fsol: &FractionalSolution<S>,
) -> Result<()> {
    let n = inst.n();
    let mut mass = vec![S::zero(); n];
    for (id, c) in fsol.clones.iter().enumerate() {
        ensure_invariant!(c.y.is_pos() && c.y.le_tol(&S::one()), "clone {id} has mass {}", c.y);
        mass[c.parent] += c.y.clone();
    }
    for (p, v) in mass.iter().enumerate() {
        ensure_invariant!(v.le_tol(&S::one()), "parent {p} carries mass {v} > 1");
    }
    for (j, set) in fsol.served.iter().enumerate() {
        let vol = fsol.volume(set);
        ensure_invariant!(
            vol.eq_tol(&S::from_usize(inst.requirements[j])),
            "client {j}: y(F_j) = {vol} but r_j = {}",
            inst.requirements[j]
        );
        let inside = set.iter().map(|&c| fsol.distance(dist, j, c)).fold(S::zero(), S::max_of);
        for c in 0..fsol.clones.len() {
            if !set.contains(&c) {
                let d = fsol.distance(dist, j, c);
                ensure_invariant!(
                    inside.le_tol(&d),
                    "client {j}: clone {c} at {d} is outside F_j but closer than {inside}"
                );
            }
        }
    }
    let cost = fsol.served_cost(dist);
    ensure_invariant!(cost.eq_tol(&fsol.lp_value), "served cost {cost} != LP value {}", fsol.lp_value);
    check_facts(inst, dist, fsol)
}

/// Per-level statistics of every `F_j`: `d_av^t ≤ d_max^t`, `d_max^t ≤ d_av^{t+1}`,
/// and `d_av = (1/r) Σ_t d_av^t`.
pub fn check_facts<S: Scalar>(inst: &FtmedInstance, dist: &Distances<S>, fsol: &FractionalSolution<S>) -> Result<()> {
    for (j, &r) in inst.requirements.iter().enumerate() {
        let st = fsol.client_stats(dist, j, r)?;
        for (t, lv) in st.levels.iter().enumerate() {
            ensure_invariant!(
                lv.d_av.le_tol(&lv.d_max),
                "client {j}, level {}: d_av {} > d_max {}",
                t + 1,
                lv.d_av,
                lv.d_max
            );
            if let Some(next) = st.levels.get(t + 1) {
                ensure_invariant!(
                    lv.d_max.le_tol(&next.d_av),
                    "client {j}, level {}: d_max {} > next d_av {}",
                    t + 1,
                    lv.d_max,
                    next.d_av
                );
            }
        }
        let mean = S::sum(st.levels.iter().map(|l| &l.d_av)).div_ref(&S::from_usize(r));
        ensure_invariant!(st.d_av.eq_tol(&mean), "client {j}: d_av {} != mean level d_av {mean}", st.d_av);
    }
    Ok(())
}

/// Builds and solves the LP, normalizes, and pads to volume `k`.
pub fn solve_relaxation<S: Scalar>(inst: &FtmedInstance, dist: &Distances<S>) -> Result<FractionalSolution<S>> {
    let lp = build_ftmed_lp(inst, dist);
    let sol = lp::solve(&lp)?;
    if !sol.is_optimal() {
        return Err(Error::Infeasible(format!("FTMed LP is {}", sol.status.as_str())));
    }
    let fsol = normalize(inst, dist, &lp, &sol)?;
    let fsol = pad_to_k(fsol, inst.n(), inst.k)?;
    check_fractional(inst, dist, &fsol)?;
    Ok(fsol)
}

/// Clone form of an arbitrary opening vector `y` (not necessarily LP-optimal):
/// each client takes its closest `r_j` volume, ties by facility index. Useful for
/// exercising the rounding stages on fractional points the LP would not return.
pub fn fractional_from_openings<S: Scalar>(
    inst: &FtmedInstance,
    dist: &Distances<S>,
    y: &[S],
) -> Result<FractionalSolution<S>> {
    let (n, m) = (inst.n(), inst.m());
    if y.len() != n {
        return Err(Error::InvalidInput(format!("{} openings for {n} facilities", y.len())));
    }
    let lp = build_ftmed_lp(inst, dist);
    let mut values = vec![S::zero(); lp.num_vars];
    for (i, v) in y.iter().enumerate() {
        values[y_var(i)] = v.clone();
    }
    let support: Vec<usize> = (0..n).filter(|&i| y[i].is_pos()).collect();
    for j in 0..m {
        let mut left = S::from_usize(inst.requirements[j]);
        for i in dist.sorted_by_distance(j, &support) {
            if !left.is_pos() {
                break;
            }
            let take = S::min_of(y[i].clone(), left.clone());
            left = left.sub_ref(&take);
            values[x_var(n, i, j)] = take;
        }
        if left.is_pos() {
            return Err(Error::Infeasible(format!("client {j} cannot reach its requirement")));
        }
    }
    let sol = LpSolution {
        status: lp::LpStatus::Optimal,
        objective: lp.objective_value(&values),
        values,
        basic: Vec::new(),
        at_upper: Vec::new(),
        iterations: 0,
        rounds: 0,
    };
    let fsol = normalize(inst, dist, &lp, &sol)?;
    let fsol = pad_to_k(fsol, n, inst.k)?;
    check_fractional(inst, dist, &fsol)?;
    Ok(fsol)
}
