//! Fault-tolerant facility location: single-level reduction, the knapsack-cover
//! LP, and clustered threshold rounding with a fixed or random threshold.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{ensure_invariant, Error, Result};
use crate::instance::{evaluate_ftfl_cost, Distances, FtflInstance, OpenSet};
use crate::lp::{solve, solve_with_separation, Cmp, LinearProgram, Row, SeparationOptions};
use crate::scalar::{Rational, Scalar};

/// Rational stand-in for `e^{-3}`, the lower end of the random threshold range.
pub fn random_alpha_floor() -> Rational {
    Rational::from_unsigneds(49_787_068_367_864u64, 1_000_000_000_000_000u64)
}

/// A client copy that pays `weight` times the distance to its `level`-th closest
/// open facility and nothing else.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SingleLevelClient {
    pub origin: usize,
    pub level: usize,
    #[serde(serialize_with = "ser_rational")]
    pub weight: Rational,
}

fn ser_rational<Ser: serde::Serializer>(q: &Rational, s: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
    s.serialize_str(&q.to_string())
}

/// One copy per positive entry of each weight vector; zero entries are dropped.
pub fn expand_weight_vectors(inst: &FtflInstance) -> Vec<SingleLevelClient> {
    let mut out = Vec::new();
    for (j, w) in inst.weights.iter().enumerate() {
        for (t, v) in w.iter().enumerate() {
            if *v > 0 {
                out.push(SingleLevelClient {
                    origin: j,
                    level: t + 1,
                    weight: v.clone(),
                });
            }
        }
    }
    out
}

/// Opening cost plus `Σ w · d(origin, level-th closest open)` over the copies.
pub fn evaluate_reduced_cost<S: Scalar>(
    inst: &FtflInstance,
    clients: &[SingleLevelClient],
    dist: &Distances<S>,
    open: &OpenSet,
) -> Result<S> {
    let mut total = S::zero();
    for &i in open.facilities() {
        total += S::from_rational(&inst.opening_costs[i]);
    }
    for c in clients {
        if open.len() < c.level {
            return Err(Error::Infeasible(format!(
                "client {} needs {} facilities but only {} are open",
                c.origin,
                c.level,
                open.len()
            )));
        }
        let order = dist.sorted_by_distance(c.origin, open.facilities());
        total += S::from_rational(&c.weight).mul_ref(dist.fc(order[c.level - 1], c.origin));
    }
    Ok(total)
}

/// Facilities sorted by distance to one client, with `c[t]` the distance to the
/// `t`-th of them and `c[0] = 0`.
#[derive(Clone, Debug)]
pub struct NeighborOrder<S> {
    pub order: Vec<usize>,
    pub c: Vec<S>,
}

impl<S: Scalar> NeighborOrder<S> {
    pub fn new(dist: &Distances<S>, client: usize) -> Self {
        let all: Vec<usize> = (0..dist.facilities()).collect();
        let order = dist.sorted_by_distance(client, &all);
        let mut c = vec![S::zero()];
        c.extend(order.iter().map(|&i| dist.fc(i, client).clone()));
        NeighborOrder { order, c }
    }

    /// `N(j, t)`.
    pub fn prefix(&self, t: usize) -> &[usize] {
        &self.order[..t]
    }
}

/// Column layout of the knapsack-cover LP: `y_i`, then `x_{i,j}` per copy, then
/// `z_{j,t}` for `t = 1..=n` per copy.
#[derive(Clone, Copy, Debug)]
pub struct KcLayout {
    pub n: usize,
    pub clients: usize,
}

impl KcLayout {
    pub fn y(&self, i: usize) -> usize {
        i
    }

    pub fn x(&self, j: usize, i: usize) -> usize {
        self.n + j * self.n + i
    }

    /// Column of `z_{j,t}`, `1 ≤ t ≤ n`.
    pub fn z(&self, j: usize, t: usize) -> usize {
        debug_assert!(t >= 1 && t <= self.n);
        self.n + self.clients * self.n + j * self.n + t - 1
    }

    pub fn num_vars(&self) -> usize {
        self.n + 2 * self.clients * self.n
    }
}

#[derive(Clone, Debug)]
pub struct KcLp<S> {
    pub lp: LinearProgram<S>,
    pub layout: KcLayout,
    pub clients: Vec<SingleLevelClient>,
    pub orders: Vec<NeighborOrder<S>>,
    /// `Σ_j w_j c_{j,n}`; the LP objective omits this constant.
    pub offset: S,
}

/// LP over `y, x, z` with `Σ_i x_{i,j} ≥ r_j`, `y_i ≥ x_{i,j}`, `z_{j,n} = 1` and the
/// prefix rows `Σ_{N(j,t)} x_{i,j} ≥ r_j z_{j,t}` (the knapsack-cover rows with
/// `A = ∅`). Cuts with nonempty `A` come from [`KcLp::separate`].
pub fn build_kc_lp<S: Scalar>(inst: &FtflInstance, dist: &Distances<S>) -> KcLp<S> {
    let clients = expand_weight_vectors(inst);
    let n = inst.n();
    let layout = KcLayout {
        n,
        clients: clients.len(),
    };
    let orders: Vec<NeighborOrder<S>> = clients.iter().map(|c| NeighborOrder::new(dist, c.origin)).collect();
    let mut lp = LinearProgram::unit_box(layout.num_vars());
    for i in 0..n {
        lp.objective[layout.y(i)] = S::from_rational(&inst.opening_costs[i]);
    }
    let mut offset = S::zero();
    for (j, c) in clients.iter().enumerate() {
        let w = S::from_rational(&c.weight);
        let ord = &orders[j];
        offset += w.mul_ref(&ord.c[n]);
        for t in 1..n {
            let step = ord.c[t + 1].sub_ref(&ord.c[t]);
            lp.objective[layout.z(j, t)] = -w.mul_ref(&step);
        }
        lp.lower[layout.z(j, n)] = S::one();
        lp.push(Row::sum((0..n).map(|i| layout.x(j, i)), Cmp::Ge, S::from_usize(c.level)));
        for i in 0..n {
            lp.push(Row::new(
                [(layout.y(i), S::one()), (layout.x(j, i), -S::one())],
                Cmp::Ge,
                S::zero(),
            ));
        }
        for t in 1..=n {
            lp.push(kc_row(&layout, j, t, ord.prefix(t), c.level));
        }
    }
    KcLp {
        lp,
        layout,
        clients,
        orders,
        offset,
    }
}

/// `Σ_{i ∈ support} x_{i,j} − (r − a) z_{j,t} ≥ 0` where `a = |N(j,t)| − |support|`.
fn kc_row<S: Scalar>(layout: &KcLayout, j: usize, t: usize, support: &[usize], r: usize) -> Row<S> {
    let a = t - support.len();
    let mut coeffs: Vec<(usize, S)> = support.iter().map(|&i| (layout.x(j, i), S::one())).collect();
    coeffs.push((layout.z(j, t), -S::from_usize(r - a)));
    Row::new(coeffs, Cmp::Ge, S::zero())
}

/// A violated knapsack-cover constraint for one `(j, t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KcCut<S> {
    /// The removed set `A`, as facility ids, ascending.
    pub removed: Vec<usize>,
    /// `z − Σ_{N∖A} x / (r − |A|)`, positive when violated.
    pub violation: S,
}

/// Most violated cover among `A` = the `a` largest x-values of the prefix
/// (ties by facility id), `a = 0..=min(r−1, |N|)`. Violation is measured per unit
/// of residual requirement, so candidates with different `|A|` compare fairly.
///
/// `prefix` holds `(facility, x_{i,j})` for `i ∈ N(j,t)`.
pub fn kc_separation<S: Scalar>(prefix: &[(usize, S)], r: usize, z: &S) -> Option<KcCut<S>> {
    if !z.is_pos() || r == 0 {
        return None;
    }
    let mut sorted: Vec<&(usize, S)> = prefix.iter().collect();
    sorted.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    let mut rest = S::sum(prefix.iter().map(|(_, x)| x));
    let mut best: Option<(usize, S)> = None;
    for a in 0..=(r - 1).min(prefix.len()) {
        if a > 0 {
            rest -= sorted[a - 1].1.clone();
        }
        let need = S::from_usize(r - a).mul_ref(z);
        if need.gt_tol(&rest) {
            let v = need.sub_ref(&rest).div_ref(&S::from_usize(r - a));
            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                best = Some((a, v));
            }
        }
    }
    best.map(|(a, violation)| {
        let mut removed: Vec<usize> = sorted[..a].iter().map(|(i, _)| *i).collect();
        removed.sort_unstable();
        KcCut { removed, violation }
    })
}

/// Enumerates every `A ⊆ N(j,t)` with `|A| < r`; same contract as [`kc_separation`].
pub fn kc_separation_brute<S: Scalar>(prefix: &[(usize, S)], r: usize, z: &S) -> Option<KcCut<S>> {
    if !z.is_pos() || r == 0 {
        return None;
    }
    let len = prefix.len();
    assert!(len < 31, "brute-force separation is limited to small prefixes");
    let mut best: Option<(u32, S)> = None;
    for mask in 0u32..(1 << len) {
        let a = mask.count_ones() as usize;
        if a >= r {
            continue;
        }
        let rest = S::sum(prefix.iter().enumerate().filter(|(p, _)| mask & (1 << p) == 0).map(|(_, (_, x))| x));
        let need = S::from_usize(r - a).mul_ref(z);
        if need.gt_tol(&rest) {
            let v = need.sub_ref(&rest).div_ref(&S::from_usize(r - a));
            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                best = Some((mask, v));
            }
        }
    }
    best.map(|(mask, violation)| {
        let mut removed: Vec<usize> = (0..len).filter(|p| mask & (1 << p) != 0).map(|p| prefix[p].0).collect();
        removed.sort_unstable();
        KcCut { removed, violation }
    })
}

impl<S: Scalar> KcLp<S> {
    fn prefix_values(&self, x: &[S], j: usize, t: usize) -> Vec<(usize, S)> {
        self.orders[j]
            .prefix(t)
            .iter()
            .map(|&i| (i, x[self.layout.x(j, i)].clone()))
            .collect()
    }

    fn cut_row(&self, j: usize, t: usize, cut: &KcCut<S>) -> Row<S> {
        let support: Vec<usize> = self.orders[j]
            .prefix(t)
            .iter()
            .copied()
            .filter(|i| !cut.removed.contains(i))
            .collect();
        kc_row(&self.layout, j, t, &support, self.clients[j].level)
    }

    /// Violated cuts at `x`, most violated first (ties by `(j, t)`).
    pub fn separate(&self, x: &[S]) -> Vec<Row<S>> {
        let mut found: Vec<(S, usize, usize, KcCut<S>)> = Vec::new();
        for j in 0..self.clients.len() {
            for t in 1..=self.layout.n {
                let pre = self.prefix_values(x, j, t);
                let z = &x[self.layout.z(j, t)];
                if let Some(cut) = kc_separation(&pre, self.clients[j].level, z) {
                    found.push((cut.violation.clone(), j, t, cut));
                }
            }
        }
        found.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then((a.1, a.2).cmp(&(b.1, b.2)))
        });
        found.into_iter().map(|(_, j, t, cut)| self.cut_row(j, t, &cut)).collect()
    }

    /// First `(j, t, A)` whose cover row fails at `x`, by full subset enumeration.
    pub fn brute_force_violation(&self, x: &[S]) -> Option<(usize, usize, Vec<usize>)> {
        for j in 0..self.clients.len() {
            for t in 1..=self.layout.n {
                let pre = self.prefix_values(x, j, t);
                if let Some(cut) = kc_separation_brute(&pre, self.clients[j].level, &x[self.layout.z(j, t)]) {
                    return Some((j, t, cut.removed));
                }
            }
        }
        None
    }
}

#[derive(Clone, Debug)]
pub struct KcSolution<S> {
    pub y: Vec<S>,
    /// `x[j][i]` per reduced client.
    pub x: Vec<Vec<S>>,
    /// `z[j][t]` for `t = 0..=n`, with `z[j][0] = 0`, nondecreasing in `t`.
    pub z: Vec<Vec<S>>,
    pub facility_part: S,
    pub service_part: S,
    pub value: S,
    pub cuts_added: usize,
    pub rounds: usize,
    /// Number of `z` entries raised by monotonization.
    pub raised: usize,
}

/// `Σ_t (1 − z_t)(c_{t+1} − c_t)` for `t = 0..n−1`.
pub fn service_term<S: Scalar>(z: &[S], c: &[S]) -> S {
    let mut s = S::zero();
    for t in 0..c.len() - 1 {
        let gap = S::one().sub_ref(&z[t]);
        s += gap.mul_ref(&c[t + 1].sub_ref(&c[t]));
    }
    s
}

/// `∫_0^1 L(α) dα` where `L(α) = c_t` for the least `t` with `z_t > α`, evaluated
/// piecewise between the distinct values of `z`. Requires `z_n = 1`.
pub fn threshold_integral<S: Scalar>(z: &[S], c: &[S]) -> S {
    let mut cuts: Vec<S> = vec![S::zero(), S::one()];
    cuts.extend(z.iter().filter(|v| v.is_pos() && **v < S::one()).cloned());
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    cuts.dedup();
    let mut total = S::zero();
    for w in cuts.windows(2) {
        let t = z.iter().position(|v| *v > w[0]).expect("z ends at 1");
        total += c[t].mul_ref(&w[1].sub_ref(&w[0]));
    }
    total
}

/// Cutting-plane solve of the knapsack-cover LP followed by monotonization of `z`.
pub fn solve_kc_lp<S: Scalar>(kc: &KcLp<S>, opts: &SeparationOptions) -> Result<KcSolution<S>> {
    let out = solve_with_separation(&kc.lp, |x| kc.separate(x), opts)?;
    if !out.solution.is_optimal() {
        return Err(Error::LpStatus(out.solution.status.as_str()));
    }
    let sol = kc_solution_from(kc, &out.lp, &out.solution.values, out.solution.objective.clone(), true)?;
    Ok(KcSolution {
        cuts_added: out.cuts_added,
        rounds: out.solution.rounds,
        ..sol
    })
}

/// The LP with only the `A = ∅` rows; its optimum can be far below the integral one.
pub fn solve_natural_lp<S: Scalar>(kc: &KcLp<S>) -> Result<KcSolution<S>> {
    let sol = solve(&kc.lp)?;
    if !sol.is_optimal() {
        return Err(Error::LpStatus(sol.status.as_str()));
    }
    kc_solution_from(kc, &kc.lp, &sol.values, sol.objective, false)
}

fn kc_solution_from<S: Scalar>(
    kc: &KcLp<S>,
    lp: &LinearProgram<S>,
    values: &[S],
    objective: S,
    covers: bool,
) -> Result<KcSolution<S>> {
    let l = kc.layout;
    let y: Vec<S> = (0..l.n).map(|i| values[l.y(i)].clone()).collect();
    let x: Vec<Vec<S>> = (0..l.clients)
        .map(|j| (0..l.n).map(|i| values[l.x(j, i)].clone()).collect())
        .collect();
    let mut raised = 0;
    let mut z = Vec::with_capacity(l.clients);
    let mut point = values.to_vec();
    for j in 0..l.clients {
        let mut row = vec![S::zero()];
        let mut run = S::zero();
        for t in 1..=l.n {
            let v = values[l.z(j, t)].clone();
            if v > run {
                run = v;
            } else if v < run {
                raised += 1;
                point[l.z(j, t)] = run.clone();
            }
            row.push(run.clone());
        }
        z.push(row);
    }
    ensure_invariant!(lp.is_feasible(&point), "monotonized point violates an LP row");
    ensure_invariant!(
        !covers || kc.separate(&point).is_empty(),
        "monotonized point violates a knapsack-cover constraint"
    );
    let facility_part = S::sum(
        y.iter()
            .zip(&kc.lp.objective[..l.n])
            .map(|(a, f)| a.mul_ref(f))
            .collect::<Vec<_>>()
            .iter(),
    );
    let mut service_part = S::zero();
    for (j, c) in kc.clients.iter().enumerate() {
        service_part += S::from_rational(&c.weight).mul_ref(&service_term(&z[j], &kc.orders[j].c));
    }
    let value = facility_part.add_ref(&service_part);
    let lp_value = objective.add_ref(&kc.offset);
    ensure_invariant!(
        value.eq_tol(&lp_value),
        "monotonization changed the objective from {lp_value} to {value}"
    );
    Ok(KcSolution {
        y,
        x,
        z,
        facility_part,
        service_part,
        value,
        cuts_added: 0,
        rounds: 0,
        raised,
    })
}

/// State after one run of the clustered rounding.
#[derive(Clone, Debug)]
pub struct ClusterOutcome<S> {
    pub alpha: S,
    pub t_star: Vec<usize>,
    /// `c_{j, t*_j}`.
    pub radius: Vec<S>,
    pub y_tilde: Vec<S>,
    pub open: OpenSet,
    /// Facilities assigned to each reduced client, in assignment order.
    pub assigned: Vec<Vec<usize>>,
    pub splits: usize,
    pub opening_cost: S,
    pub cost: S,
    /// `F*/α + 3 C*/(1 − α)`.
    pub bound: S,
}

struct Piece<S> {
    parent: usize,
    mass: S,
    alive: bool,
}

/// Thresholds `z*` at `alpha`, scales `y*`, and clusters: repeatedly takes the
/// remaining client with the smallest radius, carves a block `M` of exactly its
/// residual requirement out of the cheapest mass in its neighborhood, opens the
/// cheapest members of `M`, and lets every client touching `M` use them.
pub fn cluster_round<S: Scalar>(
    inst: &FtflInstance,
    dist: &Distances<S>,
    kc: &KcLp<S>,
    sol: &KcSolution<S>,
    alpha: &S,
) -> Result<ClusterOutcome<S>> {
    ensure_threshold(alpha)?;
    let n = inst.n();
    let mc = kc.clients.len();
    let costs: Vec<S> = inst.opening_costs.iter().map(S::from_rational).collect();

    let mut t_star = Vec::with_capacity(mc);
    let mut radius = Vec::with_capacity(mc);
    let mut near: Vec<Vec<bool>> = Vec::with_capacity(mc);
    for j in 0..mc {
        let t = (1..=n).find(|&t| sol.z[j][t] >= *alpha).expect("z_{j,n} = 1");
        t_star.push(t);
        radius.push(kc.orders[j].c[t].clone());
        let mut mask = vec![false; n];
        for &i in kc.orders[j].prefix(t) {
            mask[i] = true;
        }
        near.push(mask);
    }
    let y_tilde: Vec<S> = sol
        .y
        .iter()
        .map(|y| if *y >= *alpha { S::one() } else { y.div_ref(alpha) })
        .collect();
    for j in 0..mc {
        let vol = S::sum(kc.orders[j].prefix(t_star[j]).iter().map(|&i| &y_tilde[i]));
        ensure_invariant!(
            vol.ge_tol(&S::from_usize(kc.clients[j].level)),
            "copy {j}: scaled volume {vol} of N(j, t*) is below r = {}",
            kc.clients[j].level
        );
    }

    let mut pieces: Vec<Piece<S>> = y_tilde
        .iter()
        .enumerate()
        .map(|(i, y)| Piece {
            parent: i,
            mass: y.clone(),
            alive: y.is_pos(),
        })
        .collect();
    let mut residual: Vec<usize> = kc.clients.iter().map(|c| c.level).collect();
    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); mc];
    let mut opened = vec![false; n];
    let mut splits = 0;

    while let Some(j) = (0..mc)
        .filter(|&j| residual[j] > 0)
        .min_by(|&a, &b| radius[a].partial_cmp(&radius[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)))
    {
        let need = residual[j];
        let target = S::from_usize(need);
        let mut cand: Vec<usize> = (0..pieces.len())
            .filter(|&p| pieces[p].alive && near[j][pieces[p].parent])
            .collect();
        cand.sort_by(|&a, &b| {
            let (pa, pb) = (pieces[a].parent, pieces[b].parent);
            costs[pa].partial_cmp(&costs[pb]).unwrap_or(std::cmp::Ordering::Equal).then(pa.cmp(&pb))
        });
        let avail = S::sum(cand.iter().map(|&p| &pieces[p].mass));
        ensure_invariant!(
            avail.ge_tol(&target),
            "copy {j} has residual requirement {need} but only {avail} mass nearby"
        );

        let mut block = Vec::new();
        let mut cum = S::zero();
        let mut split_piece = None;
        for p in cand {
            let next = cum.add_ref(&pieces[p].mass);
            if next.gt_tol(&target) {
                let keep = target.sub_ref(&cum);
                let rest = pieces[p].mass.sub_ref(&keep);
                pieces[p].mass = keep;
                pieces.push(Piece {
                    parent: pieces[p].parent,
                    mass: rest,
                    alive: true,
                });
                splits += 1;
                split_piece = Some(p);
                block.push(p);
                break;
            }
            block.push(p);
            cum = next;
            if cum.ge_tol(&target) {
                break;
            }
        }

        ensure_invariant!(block.len() >= need, "block for copy {j} has fewer than {need} members");
        let fresh: Vec<usize> = block[..need].iter().map(|&p| pieces[p].parent).collect();
        if let Some(p) = split_piece {
            ensure_invariant!(!block[..need].contains(&p), "the first part of a split facility was opened");
        }
        for &i in &fresh {
            ensure_invariant!(!opened[i], "facility {i} opened twice");
            opened[i] = true;
        }
        let touched: Vec<bool> = {
            let mut mask = vec![false; n];
            for &p in &block {
                mask[pieces[p].parent] = true;
            }
            mask
        };
        for k in 0..mc {
            if residual[k] == 0 || !(0..n).any(|i| touched[i] && near[k][i]) {
                continue;
            }
            let take = residual[k].min(need);
            assigned[k].extend_from_slice(&fresh[..take]);
            residual[k] -= take;
        }
        for &p in &block {
            pieces[p].alive = false;
        }
    }

    let open = OpenSet::new((0..n).filter(|&i| opened[i]).collect());
    let opening_cost = S::sum(open.facilities().iter().map(|&i| &costs[i]));
    let cost = evaluate_ftfl_cost(inst, dist, &open)?;
    let three = S::from_int(3);
    let bound = sol
        .facility_part
        .div_ref(alpha)
        .add_ref(&three.mul_ref(&sol.service_part).div_ref(&S::one().sub_ref(alpha)));
    let out = ClusterOutcome {
        alpha: alpha.clone(),
        t_star,
        radius,
        y_tilde,
        open,
        assigned,
        splits,
        opening_cost,
        cost,
        bound,
    };
    check_cluster(inst, dist, kc, sol, &out)?;
    Ok(out)
}

fn ensure_threshold<S: Scalar>(alpha: &S) -> Result<()> {
    if !alpha.is_pos() || *alpha >= S::one() {
        return Err(Error::InvalidInput(format!("threshold {alpha} must lie in (0, 1)")));
    }
    Ok(())
}

/// Radius lemma, facility-cost lemma, the 3-radius service guarantee, and the
/// per-draw cost bound.
pub fn check_cluster<S: Scalar>(
    inst: &FtflInstance,
    dist: &Distances<S>,
    kc: &KcLp<S>,
    sol: &KcSolution<S>,
    out: &ClusterOutcome<S>,
) -> Result<()> {
    let alpha = &out.alpha;
    let one_minus = S::one().sub_ref(alpha);
    let three = S::from_int(3);
    for (j, c) in kc.clients.iter().enumerate() {
        let svc = service_term(&sol.z[j], &kc.orders[j].c);
        ensure_invariant!(
            one_minus.mul_ref(&out.radius[j]).le_tol(&svc),
            "copy {j}: radius {} exceeds its LP service share {svc} over 1 − α",
            out.radius[j]
        );
        ensure_invariant!(out.assigned[j].len() == c.level, "copy {j} received {} facilities", out.assigned[j].len());
        let mut distinct = out.assigned[j].clone();
        distinct.sort_unstable();
        distinct.dedup();
        ensure_invariant!(distinct.len() == c.level, "copy {j} was assigned a facility twice");
        let reach = three.mul_ref(&out.radius[j]);
        for &i in &out.assigned[j] {
            ensure_invariant!(out.open.contains(i), "copy {j} assigned to closed facility {i}");
            ensure_invariant!(
                dist.fc(i, c.origin).le_tol(&reach),
                "copy {j}: facility {i} lies beyond 3 c(j, t*) = {reach}"
            );
        }
    }
    let scaled = S::sum(
        out.y_tilde
            .iter()
            .zip(&inst.opening_costs)
            .map(|(y, f)| y.mul_ref(&S::from_rational(f)))
            .collect::<Vec<_>>()
            .iter(),
    );
    ensure_invariant!(
        out.opening_cost.le_tol(&scaled),
        "opening cost {} exceeds the scaled fractional cost {scaled}",
        out.opening_cost
    );
    ensure_invariant!(
        out.cost.le_tol(&out.bound),
        "cost {} exceeds F*/α + 3C*/(1−α) = {}",
        out.cost,
        out.bound
    );
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub enum FtflMode {
    Fixed(Rational),
    /// `alpha` uniform on `[h, 1)` with `h` = [`random_alpha_floor`].
    Random { trials: usize },
}

/// Draws a threshold with a 53-bit numerator; exact as a rational.
pub fn draw_alpha(rng: &mut impl Rng) -> Rational {
    let h = random_alpha_floor();
    let u = rng.random::<u64>() >> 11;
    let frac = Rational::from_unsigneds(u, 1u64 << 53);
    let span = Rational::from(1) - &h;
    h + span * frac
}

#[derive(Clone, Debug)]
pub struct FtflRun<S> {
    pub kc_lp: KcLp<S>,
    pub kc: KcSolution<S>,
    pub draws: Vec<ClusterOutcome<S>>,
}

impl<S: Scalar> FtflRun<S> {
    pub fn costs_f64(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.cost.to_f64()).collect()
    }

    pub fn mean_cost(&self) -> f64 {
        let c = self.costs_f64();
        c.iter().sum::<f64>() / c.len().max(1) as f64
    }

    /// Standard error of the mean draw cost.
    pub fn std_error(&self) -> f64 {
        let c = self.costs_f64();
        if c.len() < 2 {
            return 0.0;
        }
        let mean = self.mean_cost();
        let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (c.len() - 1) as f64;
        (var / c.len() as f64).sqrt()
    }

    /// Cheapest draw, earliest on ties.
    pub fn best(&self) -> Option<&ClusterOutcome<S>> {
        let mut best: Option<&ClusterOutcome<S>> = None;
        for d in &self.draws {
            if best.is_none_or(|b| d.cost < b.cost) {
                best = Some(d);
            }
        }
        best
    }
}

pub fn run_ftfl<S: Scalar>(inst: &FtflInstance, dist: &Distances<S>, mode: &FtflMode, seed: u64) -> Result<FtflRun<S>> {
    let kc_lp = build_kc_lp(inst, dist);
    let kc = solve_kc_lp(&kc_lp, &SeparationOptions::default())?;
    let draws = match mode {
        FtflMode::Fixed(alpha) => {
            ensure_threshold(alpha)?;
            vec![cluster_round(inst, dist, &kc_lp, &kc, &S::from_rational(alpha))?]
        }
        FtflMode::Random { trials } => {
            if *trials == 0 {
                return Err(Error::InvalidInput("at least one trial is required".into()));
            }
            (0..*trials)
                .into_par_iter()
                .map(|draw| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(draw as u64);
                    let alpha = draw_alpha(&mut rng);
                    cluster_round(inst, dist, &kc_lp, &kc, &S::from_rational(&alpha))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(FtflRun { kc_lp, kc, draws })
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundChecks {
    /// Every draw satisfied `cost ≤ F*/α + 3C*/(1−α)`.
    pub per_draw: bool,
    pub max_cost_over_bound: f64,
    /// Target factor on the LP value: 4 for `α = 1/4`, otherwise the expected-cost factor.
    pub factor: f64,
    pub best_over_kc: f64,
    pub mean_over_kc: f64,
    pub within_factor: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FtflReport {
    pub method: String,
    pub kc_value: f64,
    pub kc_value_exact: String,
    pub facility_part: f64,
    pub service_part: f64,
    pub cuts_added: usize,
    pub mode: String,
    pub alpha_or_trials: Value,
    pub seed: u64,
    pub per_draw_costs: Vec<f64>,
    pub mean: f64,
    pub std_error: f64,
    pub best: f64,
    pub best_exact: String,
    pub best_open_set: Vec<usize>,
    pub bound_checks: BoundChecks,
}

/// `ln(1/h)/(1 − h) = 3/(1 − h)` at `h = e^{-3}`, the expected-cost factor of the random mode.
pub fn random_mode_factor() -> f64 {
    let h = (-3.0f64).exp();
    3.0 / (1.0 - h)
}

pub fn ftfl_report<S: Scalar>(run: &FtflRun<S>, mode: &FtflMode, seed: u64) -> Result<FtflReport> {
    let best = run
        .best()
        .ok_or_else(|| Error::InvalidInput("at least one draw is required".into()))?;
    let kc = run.kc.value.to_f64();
    let ratio = |c: f64| if kc > 0.0 { c / kc } else if c > 0.0 { f64::INFINITY } else { 1.0 };
    let (method, mode_name, alpha_or_trials, factor) = match mode {
        FtflMode::Fixed(a) => {
            let af = S::from_rational(a).to_f64();
            let f = (1.0 / af).max(3.0 / (1.0 - af));
            ("ftfl-fixed", "fixed", json!(a.to_string()), f)
        }
        FtflMode::Random { trials } => ("ftfl-random", "random", json!(trials), random_mode_factor()),
    };
    let max_cost_over_bound = run
        .draws
        .iter()
        .map(|d| {
            let b = d.bound.to_f64();
            if b > 0.0 { d.cost.to_f64() / b } else { 0.0 }
        })
        .fold(0.0, f64::max);
    let mean = run.mean_cost();
    let per_draw = run.draws.iter().all(|d| d.cost.le_tol(&d.bound));
    let headline = if matches!(mode, FtflMode::Fixed(_)) { best.cost.to_f64() } else { mean };
    Ok(FtflReport {
        method: method.into(),
        kc_value: kc,
        kc_value_exact: run.kc.value.to_string(),
        facility_part: run.kc.facility_part.to_f64(),
        service_part: run.kc.service_part.to_f64(),
        cuts_added: run.kc.cuts_added,
        mode: mode_name.into(),
        alpha_or_trials,
        seed,
        per_draw_costs: run.costs_f64(),
        mean,
        std_error: run.std_error(),
        best: best.cost.to_f64(),
        best_exact: best.cost.to_string(),
        best_open_set: best.open.facilities().to_vec(),
        bound_checks: BoundChecks {
            per_draw,
            max_cost_over_bound,
            factor,
            best_over_kc: ratio(best.cost.to_f64()),
            mean_over_kc: ratio(mean),
            within_factor: headline <= factor * kc + 3.0 * run.std_error() + 1e-9 * kc.abs().max(1.0),
        },
    })
}

pub fn solve_ftfl<S: Scalar>(inst: &FtflInstance, mode: &FtflMode, seed: u64) -> Result<FtflReport> {
    let dist = Distances::<S>::new(&inst.metric)?;
    let run = run_ftfl(inst, &dist, mode, seed)?;
    ftfl_report(&run, mode, seed)
}
