//! Adaptive clustering of clone mass into disjoint unit-volume bundles.

use serde_json::{json, Value};

use crate::error::{ensure_invariant, Result};
use crate::instance::{Distances, FtmedInstance};
use crate::relaxation::FractionalSolution;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Bundle {
    pub clones: Vec<usize>,
    pub creator: usize,
}

#[derive(Clone, Debug)]
pub struct BundleFamily {
    pub bundles: Vec<Bundle>,
    /// `queues[j][t]` is the bundle id of `U_{j,t+1}`.
    pub queues: Vec<Vec<usize>>,
}

impl BundleFamily {
    pub fn debug_json(&self) -> Value {
        json!({
            "bundles": self.bundles.iter().map(|b| json!({"clones": b.clones, "creator": b.creator})).collect::<Vec<_>>(),
            "queues": self.queues,
        })
    }
}

struct Working {
    sets: Vec<Vec<usize>>,
    owner: Vec<Option<usize>>,
}

/// Repeatedly picks the pending client with the smallest `d_av^1 + d_max^1` over its
/// remaining mass `F'_j`, carves the closest unit `U`, and either reuses an existing
/// bundle meeting `U` or registers `U` as a new bundle.
///
/// Clones may be split while carving; `fsol` is updated in place so the clone map
/// stays consistent.
pub fn create_bundles<S: Scalar>(
    fsol: &mut FractionalSolution<S>,
    inst: &FtmedInstance,
    dist: &Distances<S>,
) -> Result<BundleFamily> {
    let m = inst.m();
    let mut bundles: Vec<Bundle> = Vec::new();
    let mut queues: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut w = Working {
        sets: fsol.served.clone(),
        owner: vec![None; fsol.clones.len()],
    };

    loop {
        let mut pick: Option<(usize, S)> = None;
        for j in 0..m {
            if queues[j].len() >= inst.requirements[j] {
                continue;
            }
            let vol = fsol.volume(&w.sets[j]);
            ensure_invariant!(
                vol.ge_tol(&S::one()),
                "client {j} has a short queue but only {vol} remaining volume"
            );
            let s = fsol.prefix_stats(dist, j, &w.sets[j], 1)?;
            let key = s.d_av.add_ref(&s.d_max);
            if pick.as_ref().is_none_or(|(_, best)| key < *best) {
                pick = Some((j, key));
            }
        }
        let Some((j, _)) = pick else { break };

        let unit = carve_unit(fsol, &mut w, &mut bundles, dist, j);
        let mut best: Option<(usize, S)> = None;
        for b in 0..bundles.len() {
            let common: Vec<usize> = unit.iter().copied().filter(|c| w.owner[*c] == Some(b)).collect();
            if common.is_empty() {
                continue;
            }
            let vol = fsol.volume(&common);
            if best.as_ref().is_none_or(|(_, v)| vol > *v) {
                best = Some((b, vol));
            }
        }
        match best {
            Some((b, _)) => {
                queues[j].push(b);
                // Dropping all of U' (not only U' ∩ U) keeps the queue entries distinct.
                w.sets[j].retain(|c| w.owner[*c] != Some(b));
            }
            None => {
                let id = bundles.len();
                for &c in &unit {
                    w.owner[c] = Some(id);
                }
                w.sets[j].retain(|c| !unit.contains(c));
                let mut clones = unit;
                clones.sort_unstable();
                bundles.push(Bundle { clones, creator: j });
                queues[j].push(id);
            }
        }
    }
    let fam = BundleFamily { bundles, queues };
    check_bundles(fsol, inst, dist, &fam)?;
    Ok(fam)
}

/// Closest unit volume of `F'_j`, splitting the boundary clone when needed.
fn carve_unit<S: Scalar>(
    fsol: &mut FractionalSolution<S>,
    w: &mut Working,
    bundles: &mut [Bundle],
    dist: &Distances<S>,
    j: usize,
) -> Vec<usize> {
    let order = fsol.sorted_for(dist, j, &w.sets[j]);
    let one = S::one();
    let mut cum = S::zero();
    let mut unit = Vec::new();
    for c in order {
        let next = cum.add_ref(&fsol.clones[c].y);
        if next.gt_tol(&one) {
            let keep = one.sub_ref(&cum);
            if keep.is_pos() {
                let fresh = fsol.split_clone(c, keep);
                w.owner.push(w.owner[c]);
                for set in &mut w.sets {
                    if set.contains(&c) {
                        set.push(fresh);
                    }
                }
                if let Some(b) = w.owner[c] {
                    bundles[b].clones.push(fresh);
                }
                unit.push(c);
            }
            break;
        }
        unit.push(c);
        cum = next;
        if cum.ge_tol(&one) {
            break;
        }
    }
    unit
}

/// Disjointness, unit volume, distinct queues, and the closeness bound
/// `d_av(j, U_{j,t}) ≤ 2 d_max^t(j) + d_av^t(j)`.
pub fn check_bundles<S: Scalar>(
    fsol: &FractionalSolution<S>,
    inst: &FtmedInstance,
    dist: &Distances<S>,
    fam: &BundleFamily,
) -> Result<()> {
    let mut owner = vec![None; fsol.clones.len()];
    for (b, bundle) in fam.bundles.iter().enumerate() {
        for &c in &bundle.clones {
            ensure_invariant!(owner[c].is_none(), "clone {c} lies in two bundles");
            owner[c] = Some(b);
        }
        let vol = fsol.volume(&bundle.clones);
        ensure_invariant!(vol.eq_tol(&S::one()), "bundle {b} has volume {vol}");
    }
    let total: usize = inst.requirements.iter().sum();
    ensure_invariant!(fam.bundles.len() <= total, "more bundles than queue slots");
    for (j, queue) in fam.queues.iter().enumerate() {
        ensure_invariant!(queue.len() == inst.requirements[j], "client {j} has queue length {}", queue.len());
        let mut sorted = queue.clone();
        sorted.sort_unstable();
        sorted.dedup();
        ensure_invariant!(sorted.len() == queue.len(), "client {j} received a bundle twice");
        for (t, &b) in queue.iter().enumerate() {
            let (d_av_u, _) = fsol.set_stats(dist, j, &fam.bundles[b].clones)?;
            let s = fsol.prefix_stats(dist, j, &fsol.served[j], t + 1)?;
            let bound = S::from_int(2).mul_ref(&s.d_max).add_ref(&s.d_av);
            ensure_invariant!(
                d_av_u.le_tol(&bound),
                "client {j}, level {}: bundle distance {d_av_u} exceeds 2 d_max + d_av = {bound}",
                t + 1
            );
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Metric;
    use crate::relaxation::{solve_relaxation, CloneFacility};
    use crate::scalar::Rational;

    fn q(a: i64, b: i64) -> Rational {
        Rational::from_signeds(a, b)
    }

    #[test]
    fn single_client_single_bundle() {
        let inst = FtmedInstance::new(
            Metric::Line {
                facilities: vec![Rational::from(2)],
                clients: vec![Rational::from(0)],
            },
            1,
            vec![1],
        )
        .unwrap();
        let d = Distances::<Rational>::new(&inst.metric).unwrap();
        let mut fsol = solve_relaxation(&inst, &d).unwrap();
        let fam = create_bundles(&mut fsol, &inst, &d).unwrap();
        assert_eq!(fam.bundles, vec![Bundle { clones: vec![0], creator: 0 }]);
        assert_eq!(fam.queues, vec![vec![0]]);
    }

    #[test]
    fn colocated_clients_share_the_bundle() {
        let inst = FtmedInstance::new(
            Metric::Line {
                facilities: vec![Rational::from(0), Rational::from(0)],
                clients: vec![Rational::from(1), Rational::from(1)],
            },
            1,
            vec![1, 1],
        )
        .unwrap();
        let d = Distances::<Rational>::new(&inst.metric).unwrap();
        let mut fsol = FractionalSolution {
            clones: vec![
                CloneFacility { parent: 0, y: q(1, 2) },
                CloneFacility { parent: 1, y: q(1, 2) },
            ],
            served: vec![vec![0, 1], vec![0, 1]],
            lp_value: Rational::from(2),
        };
        let fam = create_bundles(&mut fsol, &inst, &d).unwrap();
        assert_eq!(fam.bundles.len(), 1);
        assert_eq!(fam.bundles[0].creator, 0);
        assert_eq!(fam.queues, vec![vec![0], vec![0]]);
    }

    #[test]
    fn boundary_clone_is_split() {
        // r = 2 over three clones of 2/3: the first unit cuts the second clone.
        let inst = FtmedInstance::new(
            Metric::Line {
                facilities: vec![Rational::from(1), Rational::from(2), Rational::from(3)],
                clients: vec![Rational::from(0)],
            },
            2,
            vec![2],
        )
        .unwrap();
        let d = Distances::<Rational>::new(&inst.metric).unwrap();
        let mut fsol = FractionalSolution {
            clones: (0..3).map(|p| CloneFacility { parent: p, y: q(2, 3) }).collect(),
            served: vec![vec![0, 1, 2]],
            lp_value: Rational::from(4),
        };
        let fam = create_bundles(&mut fsol, &inst, &d).unwrap();
        assert_eq!(fsol.clones.len(), 4);
        assert_eq!(fsol.clones[3], CloneFacility { parent: 1, y: q(1, 3) });
        assert_eq!(fam.bundles[0].clones, vec![0, 1]);
        assert_eq!(fam.bundles[1].clones, vec![2, 3]);
        assert_eq!(fsol.served[0], vec![0, 1, 2, 3]);
    }
}
