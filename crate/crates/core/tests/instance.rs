mod common;

use common::{ftfl, ftmed};
use ftclust::instance::{
    closest_open, evaluate_ftmed_cost, instance_to_string, load_instance, parse_instance, save_instance,
    validate_metric, Distances, Geometry, Instance, OpenSet,
};
use ftclust::Rational;
use proptest::prelude::*;

fn geometry() -> impl Strategy<Value = Geometry> {
    prop_oneof![
        Just(Geometry::Line),
        Just(Geometry::Plane),
        Just(Geometry::Hst),
        Just(Geometry::Explicit)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn save_then_load_is_identity(g in geometry(), n in 2usize..8, m in 1usize..6, seed in 0u64..1000, fl in any::<bool>()) {
        let inst = if fl {
            Instance::Ftfl(ftfl(g, n, m, 2, seed))
        } else {
            Instance::Ftmed(ftmed(g, n, m, 2.min(n), 2, seed))
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.json");
        save_instance(&inst, &path).unwrap();
        let back = load_instance(&path).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(parse_instance(&instance_to_string(&inst)).unwrap(), inst);
    }

    #[test]
    fn generated_metrics_are_valid(g in geometry(), n in 2usize..8, m in 1usize..6, seed in 0u64..1000) {
        let inst = ftmed(g, n, m, 2, 2, seed);
        prop_assert!(validate_metric(&inst.metric).is_ok());
    }

    #[test]
    fn opening_more_never_costs_more(n in 3usize..8, m in 1usize..6, seed in 0u64..1000, mask in 0u32..256, extra in 0usize..8) {
        let inst = ftmed(Geometry::Explicit, n, m, 2, 2, seed);
        let d = Distances::<Rational>::new(&inst.metric).unwrap();
        let mut open: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        for i in 0..n {
            if open.len() < inst.max_requirement() && !open.contains(&i) {
                open.push(i);
            }
        }
        let small = OpenSet::new(open.clone());
        open.push(extra % n);
        let large = OpenSet::new(open);
        for j in 0..m {
            let a = closest_open(&d, j, &small, inst.requirements[j]).unwrap();
            let b = closest_open(&d, j, &large, inst.requirements[j]).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(d.fc(*y, j) <= d.fc(*x, j));
            }
        }
        prop_assert!(evaluate_ftmed_cost(&inst, &d, &large).unwrap() <= evaluate_ftmed_cost(&inst, &d, &small).unwrap());
    }

    #[test]
    fn float_distances_track_exact_ones(g in geometry(), n in 2usize..8, m in 1usize..6, seed in 0u64..1000) {
        let inst = ftmed(g, n, m, 2, 2, seed);
        let f = Distances::<f64>::new(&inst.metric).unwrap();
        if let Ok(q) = Distances::<Rational>::new(&inst.metric) {
            for i in 0..n {
                for j in 0..m {
                    let e = ftclust::Scalar::to_f64(q.fc(i, j));
                    prop_assert!((e - f.fc(i, j)).abs() <= 1e-9 * e.max(1.0));
                }
            }
        }
    }
}
