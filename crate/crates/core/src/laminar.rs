//! Dangerous clients, filtering, the balls `B_j`, and the laminar family `{B'_j}`.

use std::collections::BTreeSet;

use serde_json::{json, Value};

use crate::error::{ensure_invariant, Result};
use crate::instance::{Distances, FtmedInstance};
use crate::relaxation::FractionalSolution;
use crate::scalar::Scalar;

/// `j` is dangerous when `d_max(j) ≥ DANGER_FACTOR · d_av^{r_j}(j)`.
pub const DANGER_FACTOR: i64 = 45;
/// Equal-requirement dangerous clients conflict within `CONFLICT_FACTOR · max d_av`.
pub const CONFLICT_FACTOR: i64 = 6;
/// `B_j` has radius `d_max(j) / BALL_DIVISOR`.
pub const BALL_DIVISOR: i64 = 15;
/// `B'_j` stays inside radius `d_max(j) / LAMINAR_DIVISOR`.
pub const LAMINAR_DIVISOR: i64 = 10;

#[derive(Clone, Debug)]
pub struct ClientDanger<S> {
    /// Average distance over all of `F_j`.
    pub d_av: S,
    pub d_max: S,
    /// Average distance over the last unit of `F_j`.
    pub d_av_r: S,
    pub dangerous: bool,
}

#[derive(Clone, Debug)]
pub struct Classification<S> {
    pub clients: Vec<ClientDanger<S>>,
    pub safe: Vec<usize>,
    pub dangerous: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub dropped: usize,
    pub kept: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DangerReport {
    pub dangerous: Vec<usize>,
    /// Survivors of filtering, ascending.
    pub filtered: Vec<usize>,
    pub witnesses: Vec<Witness>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaminarFamily {
    /// Clients of `D'`, ascending; all other vectors are aligned with this one.
    pub clients: Vec<usize>,
    pub requirements: Vec<usize>,
    pub balls: Vec<Vec<usize>>,
    pub sets: Vec<Vec<usize>>,
    /// Index of the smallest member strictly containing each set (equal sets are
    /// chained by position).
    pub parents: Vec<Option<usize>>,
}

impl LaminarFamily {
    pub fn position(&self, j: usize) -> Option<usize> {
        self.clients.binary_search(&j).ok()
    }
}

pub fn classify_clients<S: Scalar>(
    fsol: &FractionalSolution<S>,
    inst: &FtmedInstance,
    dist: &Distances<S>,
) -> Result<Classification<S>> {
    let factor = S::from_int(DANGER_FACTOR);
    let mut clients = Vec::with_capacity(inst.m());
    let (mut safe, mut dangerous) = (Vec::new(), Vec::new());
    for j in 0..inst.m() {
        let r = inst.requirements[j];
        let (d_av, d_max) = fsol.set_stats(dist, j, &fsol.served[j])?;
        let d_av_r = fsol.prefix_stats(dist, j, &fsol.served[j], r)?.d_av;
        let is_dangerous = d_max.is_pos() && !d_max.is_zero_tol() && d_max.ge_tol(&factor.mul_ref(&d_av_r));
        if is_dangerous {
            dangerous.push(j);
        } else {
            safe.push(j);
        }
        clients.push(ClientDanger {
            d_av,
            d_max,
            d_av_r,
            dangerous: is_dangerous,
        });
    }
    Ok(Classification {
        clients,
        safe,
        dangerous,
    })
}

fn conflict<S: Scalar>(class: &Classification<S>, dist: &Distances<S>, a: usize, b: usize) -> bool {
    let bound = S::from_int(CONFLICT_FACTOR).mul_ref(&S::max_of(
        class.clients[a].d_av.clone(),
        class.clients[b].d_av.clone(),
    ));
    dist.cc[a][b].le_tol(&bound)
}

/// Per requirement class, repeatedly keeps the remaining client with the smallest
/// `d_av` (ties by index) and drops everything conflicting with it.
pub fn filter_dangerous<S: Scalar>(
    class: &Classification<S>,
    inst: &FtmedInstance,
    dist: &Distances<S>,
) -> DangerReport {
    let mut filtered = Vec::new();
    let mut witnesses = Vec::new();
    for r in 1..=inst.max_requirement() {
        let mut pool: Vec<usize> = class
            .dangerous
            .iter()
            .copied()
            .filter(|&j| inst.requirements[j] == r)
            .collect();
        while !pool.is_empty() {
            let mut best = pool[0];
            for &j in &pool[1..] {
                if class.clients[j].d_av < class.clients[best].d_av {
                    best = j;
                }
            }
            pool.retain(|&j| {
                if j == best {
                    return false;
                }
                if conflict(class, dist, best, j) {
                    witnesses.push(Witness { dropped: j, kept: best });
                    return false;
                }
                true
            });
            filtered.push(best);
        }
    }
    filtered.sort_unstable();
    witnesses.sort_by_key(|w| w.dropped);
    DangerReport {
        dangerous: class.dangerous.clone(),
        filtered,
        witnesses,
    }
}

/// `B_j`: every clone within `d_max(j)/15` of `j`, boundary included, for each
/// client of `D'` in ascending order.
pub fn build_balls<S: Scalar>(
    report: &DangerReport,
    class: &Classification<S>,
    fsol: &FractionalSolution<S>,
    dist: &Distances<S>,
) -> Vec<Vec<usize>> {
    let div = S::from_int(BALL_DIVISOR);
    report
        .filtered
        .iter()
        .map(|&j| {
            let radius = class.clients[j].d_max.div_ref(&div);
            (0..fsol.clones.len())
                .filter(|&c| fsol.distance(dist, j, c).le_tol(&radius))
                .collect()
        })
        .collect()
}

/// Grows `B'_j` from `B_j` by absorbing every already built `B'_{j'}` with
/// `r_{j'} < r_j` that meets `B_j`. Classes are processed in increasing `r`,
/// clients inside a class in ascending index.
pub fn build_laminar(filtered: &[usize], balls: Vec<Vec<usize>>, requirements: &[usize]) -> Result<LaminarFamily> {
    let mut clients = filtered.to_vec();
    clients.sort_unstable();
    ensure_invariant!(clients.len() == balls.len(), "one ball per filtered client expected");
    let mut order: Vec<usize> = (0..clients.len()).collect();
    order.sort_by_key(|&p| (requirements[clients[p]], clients[p]));

    let ball_sets: Vec<BTreeSet<usize>> = balls.iter().map(|b| b.iter().copied().collect()).collect();
    let mut built: Vec<Option<BTreeSet<usize>>> = vec![None; clients.len()];
    for &p in &order {
        let r = requirements[clients[p]];
        let mut set = ball_sets[p].clone();
        for (q, other) in built.iter().enumerate() {
            let Some(other) = other else { continue };
            if requirements[clients[q]] < r && !other.is_disjoint(&ball_sets[p]) {
                set.extend(other.iter().copied());
            }
        }
        built[p] = Some(set);
    }
    let sets: Vec<Vec<usize>> = built.into_iter().map(|s| s.unwrap_or_default().into_iter().collect()).collect();
    if let Err((a, b)) = verify_laminar(&sets) {
        return Err(crate::Error::invariant(format!(
            "sets of clients {} and {} cross",
            clients[a], clients[b]
        )));
    }
    let parents = laminar_parents(&sets);
    let mut balls = balls;
    for b in &mut balls {
        b.sort_unstable();
    }
    Ok(LaminarFamily {
        requirements: clients.iter().map(|&j| requirements[j]).collect(),
        clients,
        balls,
        sets,
        parents,
    })
}

/// Checks that every pair of sets is nested or disjoint; returns the first
/// crossing pair otherwise. Sets must be sorted.
pub fn verify_laminar(sets: &[Vec<usize>]) -> std::result::Result<(), (usize, usize)> {
    let as_sets: Vec<BTreeSet<usize>> = sets.iter().map(|s| s.iter().copied().collect()).collect();
    for a in 0..as_sets.len() {
        for b in a + 1..as_sets.len() {
            let (x, y) = (&as_sets[a], &as_sets[b]);
            if x.is_disjoint(y) || x.is_subset(y) || y.is_subset(x) {
                continue;
            }
            return Err((a, b));
        }
    }
    Ok(())
}

fn laminar_parents(sets: &[Vec<usize>]) -> Vec<Option<usize>> {
    let as_sets: Vec<BTreeSet<usize>> = sets.iter().map(|s| s.iter().copied().collect()).collect();
    let mut order: Vec<usize> = (0..sets.len()).collect();
    order.sort_by_key(|&p| (sets[p].len(), p));
    let mut parents = vec![None; sets.len()];
    for (pos, &a) in order.iter().enumerate() {
        if as_sets[a].is_empty() {
            continue;
        }
        parents[a] = order[pos + 1..].iter().copied().find(|&b| as_sets[a].is_subset(&as_sets[b]));
    }
    parents
}

/// Asserts the witness fact, separation, geometric decrease, ball volume,
/// radius containment, the volume window and clone-parent atomicity.
pub fn check_laminar<S: Scalar>(
    fsol: &FractionalSolution<S>,
    inst: &FtmedInstance,
    dist: &Distances<S>,
    class: &Classification<S>,
    report: &DangerReport,
    fam: &LaminarFamily,
) -> Result<()> {
    let c = &class.clients;
    let req = &inst.requirements;
    let six = S::from_int(CONFLICT_FACTOR);
    let ten = S::from_int(LAMINAR_DIVISOR);
    let fifteen = S::from_int(BALL_DIVISOR);

    for w in &report.witnesses {
        let (j, k) = (w.dropped, w.kept);
        ensure_invariant!(fam.position(k).is_some(), "witness {k} of {j} was filtered out");
        ensure_invariant!(req[j] == req[k], "witness {k} of {j} has another requirement");
        ensure_invariant!(c[k].d_av.le_tol(&c[j].d_av), "witness {k} of {j} has a larger d_av");
        ensure_invariant!(
            dist.cc[j][k].le_tol(&six.mul_ref(&c[j].d_av)),
            "witness {k} of {j} is farther than 6 d_av({j})"
        );
    }
    let dropped: BTreeSet<usize> = report.witnesses.iter().map(|w| w.dropped).collect();
    for &j in &report.dangerous {
        ensure_invariant!(
            fam.position(j).is_some() != dropped.contains(&j),
            "dangerous client {j} is neither kept nor witnessed"
        );
    }

    for (a, &j) in fam.clients.iter().enumerate() {
        for &k in &fam.clients[a + 1..] {
            let sep = c[j].d_max.div_ref(&ten).add_ref(&c[k].d_max.div_ref(&ten));
            if req[j] == req[k] {
                ensure_invariant!(
                    dist.cc[j][k].ge_tol(&sep),
                    "clients {j} and {k} are closer than d_max/10 + d_max/10"
                );
            }
        }
        for &k in &fam.clients {
            if req[j] > req[k] {
                let near = c[j].d_max.div_ref(&fifteen).add_ref(&c[k].d_max.div_ref(&ten));
                if dist.cc[j][k].le_tol(&near) {
                    ensure_invariant!(
                        c[k].d_max.le_tol(&c[j].d_max.div_ref(&S::from_int(6))),
                        "client {k} is near {j} but d_max({k}) > d_max({j})/6"
                    );
                }
            }
        }
    }

    let classes = fsol.classes(dist.facilities());
    for (p, &j) in fam.clients.iter().enumerate() {
        let r = S::from_usize(req[j]);
        let ball_vol = fsol.volume(&fam.balls[p]);
        let lower = r.sub_ref(&fifteen.mul_ref(&c[j].d_av_r).div_ref(&c[j].d_max));
        ensure_invariant!(
            ball_vol.ge_tol(&lower) && ball_vol < r,
            "client {j}: y(B_j) = {ball_vol} outside [{lower}, {r})"
        );
        let set: BTreeSet<usize> = fam.sets[p].iter().copied().collect();
        ensure_invariant!(
            fam.balls[p].iter().all(|x| set.contains(x)),
            "client {j}: B_j is not inside B'_j"
        );
        let radius = c[j].d_max.div_ref(&ten);
        for &x in &fam.sets[p] {
            ensure_invariant!(
                fsol.distance(dist, j, x).le_tol(&radius),
                "client {j}: clone {x} of B'_j lies beyond d_max/10"
            );
        }
        let vol = fsol.volume(&fam.sets[p]);
        ensure_invariant!(
            vol.ge_tol(&r.sub_ref(&S::one())) && vol.le_tol(&r),
            "client {j}: y(B'_j) = {vol} outside [r - 1, r]"
        );
        for (parent, members) in classes.iter().enumerate() {
            let inside = members.iter().filter(|x| set.contains(x)).count();
            ensure_invariant!(
                inside == 0 || inside == members.len(),
                "client {j}: B'_j splits the clones of facility {parent}"
            );
        }
    }
    if let Err((a, b)) = verify_laminar(&fam.sets) {
        return Err(crate::Error::invariant(format!(
            "sets of clients {} and {} cross",
            fam.clients[a], fam.clients[b]
        )));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct LaminarStage<S> {
    pub class: Classification<S>,
    pub report: DangerReport,
    pub family: LaminarFamily,
}

/// classify → filter → balls → laminar, followed by [`check_laminar`].
pub fn construct_laminar<S: Scalar>(
    fsol: &FractionalSolution<S>,
    inst: &FtmedInstance,
    dist: &Distances<S>,
) -> Result<LaminarStage<S>> {
    let class = classify_clients(fsol, inst, dist)?;
    let report = filter_dangerous(&class, inst, dist);
    let balls = build_balls(&report, &class, fsol, dist);
    let family = build_laminar(&report.filtered, balls, &inst.requirements)?;
    check_laminar(fsol, inst, dist, &class, &report, &family)?;
    Ok(LaminarStage { class, report, family })
}

pub fn laminar_json(report: &DangerReport, fam: &LaminarFamily) -> Value {
    json!({
        "dangerous": report.dangerous,
        "filtered": report.filtered,
        "witnesses": report.witnesses.iter().map(|w| json!({"dropped": w.dropped, "kept": w.kept})).collect::<Vec<_>>(),
        "sets": fam.clients.iter().enumerate().map(|(p, j)| json!({
            "client": j,
            "ball": fam.balls[p],
            "set": fam.sets[p],
            "parent": fam.parents[p].map(|q| fam.clients[q]),
        })).collect::<Vec<_>>(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Metric;
    use crate::relaxation::CloneFacility;
    use crate::scalar::Rational;

    fn q(a: i64, b: i64) -> Rational {
        Rational::from_signeds(a, b)
    }

    fn one_client(far: i64, far_y: Rational) -> (FtmedInstance, FractionalSolution<Rational>) {
        let inst = FtmedInstance::new(
            Metric::Line {
                facilities: vec![Rational::from(0), Rational::from(far)],
                clients: vec![Rational::from(0)],
            },
            1,
            vec![1],
        )
        .unwrap();
        let fsol = FractionalSolution {
            clones: vec![
                CloneFacility { parent: 0, y: Rational::from(1) - &far_y },
                CloneFacility { parent: 1, y: far_y },
            ],
            served: vec![vec![0, 1]],
            lp_value: Rational::from(0),
        };
        (inst, fsol)
    }

    #[test]
    fn threshold_is_inclusive() {
        let (inst, fsol) = one_client(90, q(1, 45));
        let d = Distances::<Rational>::new(&inst.metric).unwrap();
        let c = classify_clients(&fsol, &inst, &d).unwrap();
        assert_eq!(c.clients[0].d_av_r, Rational::from(2));
        assert_eq!(c.dangerous, vec![0]);
    }

    #[test]
    fn below_threshold_is_safe() {
        let (inst, fsol) = one_client(44, q(1, 44));
        let d = Distances::<Rational>::new(&inst.metric).unwrap();
        let c = classify_clients(&fsol, &inst, &d).unwrap();
        assert_eq!(c.clients[0].d_av_r, Rational::from(1));
        assert_eq!(c.safe, vec![0]);
    }

    #[test]
    fn zero_radius_is_safe() {
        let (inst, mut fsol) = one_client(5, q(0, 1));
        fsol.clones.pop();
        fsol.served = vec![vec![0]];
        let d = Distances::<Rational>::new(&inst.metric).unwrap();
        assert_eq!(classify_clients(&fsol, &inst, &d).unwrap().safe, vec![0]);
    }

    #[test]
    fn verify_laminar_cases() {
        assert_eq!(verify_laminar(&[vec![1], vec![1, 2], vec![1, 2, 3]]), Ok(()));
        assert_eq!(verify_laminar(&[vec![1, 2], vec![2, 3]]), Err((0, 1)));
        assert_eq!(verify_laminar(&[vec![1], vec![4, 5]]), Ok(()));
    }

    #[test]
    fn single_client_keeps_its_ball() {
        let fam = build_laminar(&[3], vec![vec![0, 2]], &[1, 1, 1, 2]).unwrap();
        assert_eq!(fam.sets, vec![vec![0, 2]]);
        assert_eq!(fam.parents, vec![None]);
    }

    #[test]
    fn higher_requirement_absorbs_meeting_sets() {
        // client 0 (r = 1) owns {4, 5}; client 1 (r = 2) has a ball touching clone 5.
        let fam = build_laminar(&[0, 1], vec![vec![4, 5], vec![1, 2, 5]], &[1, 2]).unwrap();
        assert_eq!(fam.sets, vec![vec![4, 5], vec![1, 2, 4, 5]]);
        assert_eq!(fam.parents, vec![Some(1), None]);
    }

    #[test]
    fn same_requirement_balls_stay_apart() {
        let fam = build_laminar(&[0, 1], vec![vec![0], vec![1]], &[2, 2]).unwrap();
        assert_eq!(fam.sets, vec![vec![0], vec![1]]);
    }

    #[test]
    fn crossing_sets_are_rejected() {
        assert!(build_laminar(&[0, 1], vec![vec![0, 1], vec![1, 2]], &[1, 1]).is_err());
    }
}
