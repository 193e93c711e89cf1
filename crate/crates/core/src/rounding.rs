//! Dependent rounding over the polytope cut out by the bundles and the laminar
//! family, and the end-to-end FTMed approximation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bundles::{create_bundles, BundleFamily};
use crate::error::{ensure_invariant, Error, Result};
use crate::instance::{closest_open, evaluate_ftmed_cost, Distances, FtmedInstance, OpenSet};
use crate::laminar::{construct_laminar, verify_laminar, LaminarFamily, LaminarStage};
use crate::lp::{self, Cmp, LinearProgram, Row};
use crate::relaxation::{solve_relaxation, FractionalSolution};
use crate::scalar::Scalar;

/// Absolute tolerance of the sampled-frequency checks.
pub const MARGINAL_TOLERANCE: f64 = 0.015;

const OBJECTIVE_PRIME: u64 = 1_000_003;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintGroup {
    Bundle(usize),
    LaminarLower(usize),
    LaminarUpper(usize),
    Parent(usize),
    Cardinality,
}

#[derive(Clone, Debug)]
pub struct RoundingPolytope<S> {
    /// One variable per clone, box `[0, 1]`, zero objective.
    pub lp: LinearProgram<S>,
    /// Origin of every row of `lp`.
    pub groups: Vec<ConstraintGroup>,
    pub k: usize,
}

impl<S: Scalar> RoundingPolytope<S> {
    pub fn contains(&self, z: &[S]) -> bool {
        self.lp.is_feasible(z)
    }
}

pub fn build_polytope<S: Scalar>(
    fsol: &FractionalSolution<S>,
    bundles: &BundleFamily,
    laminar: &LaminarFamily,
    k: usize,
) -> Result<RoundingPolytope<S>> {
    let nc = fsol.clones.len();
    let mut lp = LinearProgram::unit_box(nc);
    let mut groups = Vec::new();
    for (b, bundle) in bundles.bundles.iter().enumerate() {
        lp.push(Row::sum(bundle.clones.iter().copied(), Cmp::Eq, S::one()));
        groups.push(ConstraintGroup::Bundle(b));
    }
    for (p, set) in laminar.sets.iter().enumerate() {
        let r = S::from_usize(laminar.requirements[p]);
        let lower = r.sub_ref(&S::one());
        lp.push(Row::sum(set.iter().copied(), Cmp::Ge, lower));
        groups.push(ConstraintGroup::LaminarLower(laminar.clients[p]));
        lp.push(Row::sum(set.iter().copied(), Cmp::Le, r));
        groups.push(ConstraintGroup::LaminarUpper(laminar.clients[p]));
    }
    let classes = fsol.classes(fsol.parent_count());
    for (parent, members) in classes.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        lp.push(Row::sum(members.iter().copied(), Cmp::Le, S::one()));
        groups.push(ConstraintGroup::Parent(parent));
    }
    lp.push(Row::sum(0..nc, Cmp::Eq, S::from_usize(k)));
    groups.push(ConstraintGroup::Cardinality);

    let first: Vec<Vec<usize>> = bundles.bundles.iter().map(|b| b.clones.clone()).collect();
    ensure_invariant!(verify_laminar(&first).is_ok(), "bundles are not laminar");
    let mut second = laminar.sets.clone();
    second.push((0..nc).collect());
    second.extend(classes.into_iter().filter(|c| !c.is_empty()));
    ensure_invariant!(
        verify_laminar(&second).is_ok(),
        "laminar sets, F and the parent classes do not form a laminar system"
    );

    let poly = RoundingPolytope { lp, groups, k };
    let y: Vec<S> = fsol.clones.iter().map(|c| c.y.clone()).collect();
    if let Some(v) = poly.lp.first_violation(&y) {
        return Err(Error::invariant(format!("fractional openings lie outside the rounding polytope: {v}")));
    }
    Ok(poly)
}

#[derive(Clone, Debug)]
pub struct VertexDecomposition<S> {
    /// `(λ_t, v_t)` with `λ_t > 0`, `Σ λ_t = 1`, `v_t` a 0/1 clone vector.
    pub terms: Vec<(S, Vec<bool>)>,
}

impl<S: Scalar> VertexDecomposition<S> {
    /// `Σ_t λ_t v_t`
    pub fn combination(&self, dim: usize) -> Vec<S> {
        let mut out = vec![S::zero(); dim];
        for (lambda, v) in &self.terms {
            for (i, open) in v.iter().enumerate() {
                if *open {
                    out[i] += lambda.clone();
                }
            }
        }
        out
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        self.terms.iter().map(|(l, _)| l.to_f64()).collect()
    }
}

fn generic_objective<S: Scalar>(n: usize) -> Vec<S> {
    let mut c = 1u64;
    (0..n)
        .map(|_| {
            let v = S::from_int(c as i64);
            c = c * 2 % OBJECTIVE_PRIME;
            v
        })
        .collect()
}

/// Face-fixing Carathéodory decomposition: take a vertex `v` of the minimal face
/// containing the current point, walk away from `v` to the face boundary, and
/// repeat on the smaller face.
pub fn decompose<S: Scalar>(y: &[S], poly: &RoundingPolytope<S>) -> Result<VertexDecomposition<S>> {
    let n = poly.lp.num_vars;
    ensure_invariant!(y.len() == n, "point has {} coordinates, polytope has {n}", y.len());
    if let Some(v) = poly.lp.first_violation(y) {
        return Err(Error::invariant(format!("point outside the polytope: {v}")));
    }
    let objective = generic_objective::<S>(n);
    let mut point = y.to_vec();
    let mut mass = S::one();
    let mut terms: Vec<(S, Vec<bool>)> = Vec::new();
    let (zero, one) = (S::zero(), S::one());

    for _ in 0..=n + 1 {
        let mut face = poly.lp.clone();
        face.objective = objective.clone();
        for row in &mut face.rows {
            if row.is_tight(&point) {
                row.cmp = Cmp::Eq;
            }
        }
        for i in 0..n {
            if point[i].eq_tol(&zero) {
                face.upper[i] = Some(zero.clone());
            } else if point[i].eq_tol(&one) {
                face.lower[i] = one.clone();
            }
        }
        let sol = lp::solve(&face)?;
        ensure_invariant!(sol.is_optimal(), "minimal face is {}", sol.status.as_str());
        let mut vertex = Vec::with_capacity(n);
        for (i, v) in sol.values.iter().enumerate() {
            ensure_invariant!(v.is_integral_tol(), "non-integral vertex: z_{i} = {v}");
            vertex.push(v.eq_tol(&one));
        }
        let v: Vec<S> = vertex.iter().map(|&b| if b { one.clone() } else { zero.clone() }).collect();
        ensure_invariant!(poly.lp.is_feasible(&v), "vertex violates the polytope");

        let dir: Vec<S> = point.iter().zip(&v).map(|(p, q)| p.sub_ref(q)).collect();
        if dir.iter().all(|d| d.is_zero_tol()) {
            terms.push((mass, vertex));
            return Ok(VertexDecomposition { terms });
        }
        let step = max_step(&poly.lp, &point, &dir)?;
        let denom = one.add_ref(&step);
        terms.push((mass.mul_ref(&step).div_ref(&denom), vertex));
        mass = mass.div_ref(&denom);
        for (p, d) in point.iter_mut().zip(&dir) {
            *p += step.mul_ref(d);
            if !S::EXACT {
                if p.is_zero_tol() {
                    *p = zero.clone();
                } else if p.eq_tol(&one) {
                    *p = one.clone();
                }
            }
        }
    }
    Err(Error::invariant(format!("decomposition did not terminate within {} steps", n + 2)))
}

/// Largest `t` with `point + t·dir` inside the polytope.
fn max_step<S: Scalar>(lp: &LinearProgram<S>, point: &[S], dir: &[S]) -> Result<S> {
    let mut best: Option<S> = None;
    let mut offer = |t: S| {
        if best.as_ref().is_none_or(|b| t < *b) {
            best = Some(t);
        }
    };
    for (i, d) in dir.iter().enumerate() {
        if d.is_zero_tol() {
            continue;
        }
        if d.is_pos() {
            if let Some(u) = &lp.upper[i] {
                offer(u.sub_ref(&point[i]).div_ref(d));
            }
        } else {
            offer(point[i].sub_ref(&lp.lower[i]).div_ref(&d.abs()));
        }
    }
    for row in &lp.rows {
        let slope = row.activity(dir);
        if slope.is_zero_tol() {
            continue;
        }
        let slack = row.rhs.sub_ref(&row.activity(point));
        match row.cmp {
            Cmp::Le if slope.is_pos() => offer(slack.div_ref(&slope)),
            Cmp::Ge if slope.is_neg() => offer(slack.div_ref(&slope)),
            Cmp::Eq => return Err(Error::invariant("direction leaves an equality row")),
            _ => {}
        }
    }
    let t = best.ok_or_else(|| Error::invariant("unbounded walk inside a bounded polytope"))?;
    ensure_invariant!(t.is_pos() && !t.is_zero_tol(), "zero step while decomposing");
    Ok(t)
}

/// Checks `Σ λ = 1`, `Σ λ v = y`, the length bound and feasibility of each vertex.
pub fn check_decomposition<S: Scalar>(y: &[S], poly: &RoundingPolytope<S>, dec: &VertexDecomposition<S>) -> Result<()> {
    let n = y.len();
    ensure_invariant!(dec.terms.len() <= n + 1, "decomposition has {} terms for {n} clones", dec.terms.len());
    let total = S::sum(dec.terms.iter().map(|(l, _)| l));
    ensure_invariant!(total.eq_tol(&S::one()), "weights sum to {total}");
    for (t, (lambda, v)) in dec.terms.iter().enumerate() {
        ensure_invariant!(lambda.is_pos(), "term {t} has weight {lambda}");
        let z: Vec<S> = v.iter().map(|&b| if b { S::one() } else { S::zero() }).collect();
        if let Some(msg) = poly.lp.first_violation(&z) {
            return Err(Error::invariant(format!("term {t} is infeasible: {msg}")));
        }
    }
    for (i, (got, want)) in dec.combination(n).iter().zip(y).enumerate() {
        ensure_invariant!(got.eq_tol(want), "residual at clone {i}: {got} != {want}");
    }
    Ok(())
}

/// Draws `samples` term indices with probability `λ_t`; draw `s` uses stream `s`
/// of a ChaCha8 generator seeded by `seed`, so the result does not depend on
/// thread scheduling.
pub fn sample_indices<S: Scalar>(dec: &VertexDecomposition<S>, seed: u64, samples: usize) -> Vec<usize> {
    let mut cum = Vec::with_capacity(dec.terms.len());
    let mut acc = 0.0;
    for w in dec.weights_f64() {
        acc += w;
        cum.push(acc);
    }
    let last = dec.terms.len().saturating_sub(1);
    (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let u: f64 = rng.random::<f64>() * acc;
            cum.partition_point(|&c| c <= u).min(last)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct RoundedSolution<S> {
    pub vertex: Vec<bool>,
    pub open: OpenSet,
    /// The `r_j` closest members of `open`, per client.
    pub connections: Vec<Vec<usize>>,
    pub client_costs: Vec<S>,
    pub cost: S,
}

pub fn assemble_solution<S: Scalar>(
    vertex: &[bool],
    fsol: &FractionalSolution<S>,
    inst: &FtmedInstance,
    dist: &Distances<S>,
) -> Result<RoundedSolution<S>> {
    let mut parents = Vec::new();
    for (c, &open) in vertex.iter().enumerate() {
        if open {
            parents.push(fsol.clones[c].parent);
        }
    }
    let count = parents.len();
    let open = OpenSet::new(parents);
    if open.len() != count {
        return Err(Error::invariant("two clones of one facility are open"));
    }
    ensure_invariant!(open.len() == inst.k, "vertex opens {} facilities, k = {}", open.len(), inst.k);
    let mut connections = Vec::with_capacity(inst.m());
    let mut client_costs = Vec::with_capacity(inst.m());
    for j in 0..inst.m() {
        let near = closest_open(dist, j, &open, inst.requirements[j])?;
        client_costs.push(S::sum(near.iter().map(|&i| dist.fc(i, j))));
        connections.push(near);
    }
    let cost = S::sum(client_costs.iter());
    let check = evaluate_ftmed_cost(inst, dist, &open)?;
    ensure_invariant!(cost.eq_tol(&check), "connection cost {cost} != evaluated cost {check}");
    Ok(RoundedSolution {
        vertex: vertex.to_vec(),
        open,
        connections,
        client_costs,
        cost,
    })
}

/// Per-vertex properties: at most one clone per parent, one per bundle, and an
/// open count of `r_j − 1` or `r_j` in every laminar set.
pub fn check_vertex<S: Scalar>(
    vertex: &[bool],
    fsol: &FractionalSolution<S>,
    inst: &FtmedInstance,
    bundles: &BundleFamily,
    fam: &LaminarFamily,
) -> Result<()> {
    let mut per_parent = vec![0usize; fsol.parent_count()];
    for (c, &open) in vertex.iter().enumerate() {
        if open {
            per_parent[fsol.clones[c].parent] += 1;
        }
    }
    for (p, &cnt) in per_parent.iter().enumerate() {
        ensure_invariant!(cnt <= 1, "facility {p} has {cnt} open clones");
    }
    for (b, bundle) in bundles.bundles.iter().enumerate() {
        let cnt = bundle.clones.iter().filter(|&&c| vertex[c]).count();
        ensure_invariant!(cnt == 1, "bundle {b} has {cnt} open clones");
    }
    for (p, &j) in fam.clients.iter().enumerate() {
        let r = inst.requirements[j];
        let cnt = fam.sets[p].iter().filter(|&&c| vertex[c]).count();
        ensure_invariant!(cnt + 1 == r || cnt == r, "client {j}: {cnt} open in B'_j, r = {r}");
    }
    let total = vertex.iter().filter(|&&b| b).count();
    ensure_invariant!(total == inst.k, "{total} clones open, k = {}", inst.k);
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientClass {
    Safe,
    Filtered,
    Dropped,
}

impl ClientClass {
    /// Constant `c` in the per-client bound `c · r_j · d_av(j)`.
    pub fn factor(self) -> i64 {
        match self {
            ClientClass::Safe => 93,
            ClientClass::Filtered => 46,
            ClientClass::Dropped => 52,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClientBound {
    pub client: usize,
    pub class: ClientClass,
    pub bound: f64,
    /// Expectation under the decomposition (exact in rational mode).
    pub expected: f64,
    /// Mean over the drawn samples.
    pub mean: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MarginalCheck {
    pub samples: usize,
    pub tolerance: f64,
    pub max_clone_deviation: f64,
    pub max_laminar_deviation: f64,
    pub pass: bool,
}

/// Everything produced by one run of the approximation pipeline.
#[derive(Clone, Debug)]
pub struct FtmedRun<S> {
    pub fsol: FractionalSolution<S>,
    pub bundles: BundleFamily,
    pub laminar: LaminarStage<S>,
    pub polytope: RoundingPolytope<S>,
    pub decomposition: VertexDecomposition<S>,
    /// Assembled solution per decomposition term.
    pub solutions: Vec<RoundedSolution<S>>,
    /// Drawn term index per sample.
    pub draws: Vec<usize>,
}

pub fn run_ftmed_pipeline<S: Scalar>(
    inst: &FtmedInstance,
    dist: &Distances<S>,
    seed: u64,
    samples: usize,
) -> Result<FtmedRun<S>> {
    let fsol = solve_relaxation(inst, dist)?;
    round_fractional(inst, dist, fsol, seed, samples)
}

/// Every stage after the relaxation, starting from a normalized fractional solution.
pub fn round_fractional<S: Scalar>(
    inst: &FtmedInstance,
    dist: &Distances<S>,
    mut fsol: FractionalSolution<S>,
    seed: u64,
    samples: usize,
) -> Result<FtmedRun<S>> {
    let bundles = create_bundles(&mut fsol, inst, dist)?;
    let laminar = construct_laminar(&fsol, inst, dist)?;
    let polytope = build_polytope(&fsol, &bundles, &laminar.family, inst.k)?;
    let y: Vec<S> = fsol.clones.iter().map(|c| c.y.clone()).collect();
    let decomposition = decompose(&y, &polytope)?;
    check_decomposition(&y, &polytope, &decomposition)?;
    let mut solutions = Vec::with_capacity(decomposition.terms.len());
    for (_, v) in &decomposition.terms {
        check_vertex(v, &fsol, inst, &bundles, &laminar.family)?;
        solutions.push(assemble_solution(v, &fsol, inst, dist)?);
    }
    let draws = sample_indices(&decomposition, seed, samples);
    Ok(FtmedRun {
        fsol,
        bundles,
        laminar,
        polytope,
        decomposition,
        solutions,
        draws,
    })
}

impl<S: Scalar> FtmedRun<S> {
    pub fn draw_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.decomposition.terms.len()];
        for &t in &self.draws {
            counts[t] += 1;
        }
        counts
    }

    /// `Σ_t λ_t cost(v_t)`
    pub fn expected_cost(&self) -> S {
        let mut acc = S::zero();
        for ((lambda, _), sol) in self.decomposition.terms.iter().zip(&self.solutions) {
            acc += lambda.mul_ref(&sol.cost);
        }
        acc
    }

    pub fn mean_cost(&self) -> f64 {
        if self.draws.is_empty() {
            return f64::NAN;
        }
        let total: f64 = self.draws.iter().map(|&t| self.solutions[t].cost.to_f64()).sum();
        total / self.draws.len() as f64
    }

    /// Cheapest sampled solution, earliest term on ties.
    pub fn best(&self) -> Option<&RoundedSolution<S>> {
        let counts = self.draw_counts();
        let mut best: Option<&RoundedSolution<S>> = None;
        for (t, sol) in self.solutions.iter().enumerate() {
            if counts[t] > 0 && best.is_none_or(|b| sol.cost < b.cost) {
                best = Some(sol);
            }
        }
        best
    }

    pub fn client_class(&self, j: usize) -> ClientClass {
        let stage = &self.laminar;
        if stage.family.position(j).is_some() {
            ClientClass::Filtered
        } else if stage.class.clients[j].dangerous {
            ClientClass::Dropped
        } else {
            ClientClass::Safe
        }
    }

    pub fn client_bounds(&self, inst: &FtmedInstance) -> Vec<ClientBound> {
        let counts = self.draw_counts();
        let samples = self.draws.len().max(1) as f64;
        (0..inst.m())
            .map(|j| {
                let class = self.client_class(j);
                let d_av = &self.laminar.class.clients[j].d_av;
                let bound = S::from_int(class.factor())
                    .mul_ref(&S::from_usize(inst.requirements[j]))
                    .mul_ref(d_av);
                let mut expected = S::zero();
                let mut mean = 0.0;
                for (t, ((lambda, _), sol)) in self.decomposition.terms.iter().zip(&self.solutions).enumerate() {
                    expected += lambda.mul_ref(&sol.client_costs[j]);
                    mean += counts[t] as f64 * sol.client_costs[j].to_f64();
                }
                ClientBound {
                    client: j,
                    class,
                    bound: bound.to_f64(),
                    expected: expected.to_f64(),
                    mean: mean / samples,
                    holds: expected.le_tol(&bound),
                }
            })
            .collect()
    }

    /// Sampled clone frequencies against `y`, and sampled `Pr[r_j open in B'_j]`
    /// against `y(B'_j) − (r_j − 1)`.
    pub fn marginal_check(&self, inst: &FtmedInstance) -> MarginalCheck {
        let counts = self.draw_counts();
        let samples = self.draws.len();
        let denom = samples.max(1) as f64;
        let mut clone_dev: f64 = 0.0;
        for (c, clone) in self.fsol.clones.iter().enumerate() {
            let hits: usize = self
                .decomposition
                .terms
                .iter()
                .zip(&counts)
                .filter(|((_, v), _)| v[c])
                .map(|(_, n)| *n)
                .sum();
            clone_dev = clone_dev.max((hits as f64 / denom - clone.y.to_f64()).abs());
        }
        let fam = &self.laminar.family;
        let mut lam_dev: f64 = 0.0;
        for (p, &j) in fam.clients.iter().enumerate() {
            let r = inst.requirements[j];
            let hits: usize = self
                .decomposition
                .terms
                .iter()
                .zip(&counts)
                .filter(|((_, v), _)| fam.sets[p].iter().filter(|&&c| v[c]).count() == r)
                .map(|(_, n)| *n)
                .sum();
            let target = self.fsol.volume(&fam.sets[p]).to_f64() - (r as f64 - 1.0);
            lam_dev = lam_dev.max((hits as f64 / denom - target).abs());
        }
        MarginalCheck {
            samples,
            tolerance: MARGINAL_TOLERANCE,
            max_clone_deviation: clone_dev,
            max_laminar_deviation: lam_dev,
            pass: samples > 0 && clone_dev <= MARGINAL_TOLERANCE && lam_dev <= MARGINAL_TOLERANCE,
        }
    }

    /// Exact counterpart of [`marginal_check`](Self::marginal_check): the
    /// decomposition reproduces `y` and the laminar probabilities with no error.
    pub fn check_exact_marginals(&self, inst: &FtmedInstance) -> Result<()> {
        let fam = &self.laminar.family;
        for (p, &j) in fam.clients.iter().enumerate() {
            let r = inst.requirements[j];
            let mut prob = S::zero();
            for (lambda, v) in &self.decomposition.terms {
                if fam.sets[p].iter().filter(|&&c| v[c]).count() == r {
                    prob += lambda.clone();
                }
            }
            let target = self.fsol.volume(&fam.sets[p]).sub_ref(&S::from_usize(r - 1));
            ensure_invariant!(prob.eq_tol(&target), "client {j}: Pr[r_j open] = {prob}, expected {target}");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FtmedReport {
    pub method: String,
    pub lp_value: f64,
    pub lp_value_exact: String,
    pub samples: usize,
    pub seed: u64,
    pub mean_cost: f64,
    pub expected_cost: f64,
    pub best_cost: f64,
    pub best_cost_exact: String,
    pub best_open_set: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decomposition_terms: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_client_bounds: Vec<ClientBound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marginal_check: Option<MarginalCheck>,
}

pub fn ftmed_report<S: Scalar>(inst: &FtmedInstance, run: &FtmedRun<S>, seed: u64) -> Result<FtmedReport> {
    let best = run
        .best()
        .ok_or_else(|| Error::InvalidInput("at least one sample is required".into()))?;
    Ok(FtmedReport {
        method: "lp-round".into(),
        lp_value: run.fsol.lp_value.to_f64(),
        lp_value_exact: run.fsol.lp_value.to_string(),
        samples: run.draws.len(),
        seed,
        mean_cost: run.mean_cost(),
        expected_cost: run.expected_cost().to_f64(),
        best_cost: best.cost.to_f64(),
        best_cost_exact: best.cost.to_string(),
        best_open_set: best.open.facilities().to_vec(),
        decomposition_terms: Some(run.decomposition.terms.len()),
        per_client_bounds: run.client_bounds(inst),
        marginal_check: Some(run.marginal_check(inst)),
    })
}

/// Runs the whole pipeline and summarizes it.
pub fn solve_ftmed_approx<S: Scalar>(inst: &FtmedInstance, seed: u64, samples: usize) -> Result<FtmedReport> {
    let dist = Distances::<S>::new(&inst.metric)?;
    let run = run_ftmed_pipeline(inst, &dist, seed, samples)?;
    ftmed_report(inst, &run, seed)
}
