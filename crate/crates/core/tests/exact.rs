mod common;

use common::{ftmed, q};
use ftclust::exact::{brute_force_ftmed, check_interval_rows, solve_hst_exact, solve_line_exact, BRUTE_FTMED_CAP};
use ftclust::instance::{gap_family_ftmed, Distances, FtmedInstance, Geometry, Hst, HstNode, Metric, Point};
use ftclust::Rational;

fn sizes(seed: u64) -> (usize, usize, usize, usize) {
    let n = 4 + (seed % 7) as usize;
    let m = 2 + (seed % 7) as usize;
    let k = 1 + (seed % 4) as usize;
    (n, m, k.min(n), 1 + (seed % 3) as usize)
}

fn check(inst: &FtmedInstance, hst: bool, seed: u64) {
    let d = Distances::<Rational>::new(&inst.metric).unwrap();
    let brute = brute_force_ftmed(&inst, &d, BRUTE_FTMED_CAP).unwrap();
    let exact = if hst { solve_hst_exact(inst) } else { solve_line_exact(inst) }.unwrap();
    assert_eq!(exact.value, brute.value, "seed {seed}");
    assert_eq!(exact.lp1_value, exact.lp2_value);
    assert!(check_interval_rows(&exact.lp2).is_ok());
}

#[test]
fn line_solver_matches_brute_force() {
    for seed in 0..100 {
        let (n, m, k, r) = sizes(seed);
        let inst = ftmed(Geometry::Line, n, m, k, r.min(k), seed);
        check(&inst, false, seed);
    }
}

#[test]
fn hst_solver_matches_brute_force() {
    for seed in 0..100 {
        let (n, m, k, r) = sizes(seed);
        let inst = ftmed(Geometry::Hst, n, m, k, r.min(k), seed);
        check(&inst, true, seed);
    }
}

#[test]
fn fractional_coordinates() {
    let inst = FtmedInstance::new(
        Metric::Line {
            facilities: vec![q(1, 3), q(5, 2), q(-7, 4), q(9, 5)],
            clients: vec![q(0, 1), q(2, 1), q(1, 7)],
        },
        2,
        vec![1, 2, 1],
    )
    .unwrap();
    check(&inst, false, 0);
}

#[test]
fn star_hst_with_colocated_facility() {
    let leaf = |points: Vec<Point>| HstNode {
        children: vec![],
        edge_to_parent: Rational::from(1),
        points,
    };
    let nodes = vec![
        HstNode {
            children: vec![1, 2, 3],
            edge_to_parent: Rational::from(0),
            points: vec![],
        },
        leaf(vec![Point::Facility(0)]),
        leaf(vec![Point::Facility(1), Point::Client(0)]),
        leaf(vec![Point::Facility(2)]),
    ];
    let hst = Hst::new(Rational::from(2), nodes, 3, 1).unwrap();
    let inst = FtmedInstance::new(Metric::Hst(hst), 1, vec![1]).unwrap();
    let exact = solve_hst_exact(&inst).unwrap();
    assert_eq!(exact.value, Rational::from(0));
    assert_eq!(exact.open.facilities(), &[1]);
}

#[test]
fn gap_family_forced_opening() {
    let inst = gap_family_ftmed(4).unwrap();
    let d = Distances::<Rational>::new(&inst.metric).unwrap();
    assert_eq!(brute_force_ftmed(&inst, &d, BRUTE_FTMED_CAP).unwrap().value, Rational::from(4));
    assert_eq!(solve_line_exact(&inst).unwrap().value, Rational::from(4));
}

mod integrality {
    use super::*;
    use ftclust::exact::{interval_lp, solve_interval_lp};
    use proptest::prelude::*;

    fn rebudget(inst: &FtmedInstance, y: &[Rational]) -> Option<FtmedInstance> {
        let total: Rational = y.iter().sum();
        let mut k = 0usize;
        while Rational::from(k) < total {
            k += 1;
        }
        let need = *inst.requirements.iter().max().unwrap();
        if total < Rational::from(need) || k > inst.n() {
            return None;
        }
        FtmedInstance::new(inst.metric.clone(), k, inst.requirements.clone()).ok()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(150))]
        #[test]
        fn fractional_openings_give_integral_vertices(
            seed in 0u64..10_000,
            hst in any::<bool>(),
            levels in proptest::collection::vec(0i64..=12, 10),
        ) {
            let geometry = if hst { Geometry::Hst } else { Geometry::Line };
            let base = ftmed(geometry, 6 + (seed % 5) as usize, 2 + (seed % 6) as usize, 3, 2, seed);
            let y: Vec<Rational> = levels[..base.n()].iter().map(|&a| q(a, 12)).collect();
            let Some(inst) = rebudget(&base, &y) else { return Ok(()) };
            let d = Distances::<Rational>::new(&inst.metric).unwrap();
            let ilp = interval_lp(&inst, &d, &y).unwrap();
            prop_assert!(check_interval_rows(&ilp.lp).is_ok());
            let split_cost = ilp.lp.objective_value(&ilp.split_point());
            let (open, value) = solve_interval_lp(&inst, &d, &ilp).unwrap();
            prop_assert!(value <= split_cost);
            prop_assert!(open.len() <= inst.k);
        }
    }
}
