mod common;

use common::{ftfl, q};
use ftclust::exact::{brute_force_ftfl, BRUTE_FTFL_CAP};
use ftclust::ftfl::{
    build_kc_lp, evaluate_reduced_cost, expand_weight_vectors, kc_separation, kc_separation_brute, run_ftfl,
    service_term, solve_kc_lp, solve_natural_lp, threshold_integral, FtflMode,
};
use ftclust::instance::{evaluate_ftfl_cost, gap_family_ftfl, Distances, Geometry, OpenSet};
use ftclust::lp::SeparationOptions;
use ftclust::{Rational, Scalar};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GEOMETRIES: [Geometry; 3] = [Geometry::Line, Geometry::Hst, Geometry::Explicit];

#[test]
fn fixed_quarter_threshold_within_four() {
    for seed in 0..24 {
        let inst = ftfl(GEOMETRIES[seed as usize % 3], 7, 5, 3, seed);
        let d = Distances::<Rational>::new(&inst.metric).unwrap();
        let run = run_ftfl(&inst, &d, &FtflMode::Fixed(q(1, 4)), seed).unwrap();
        let cost = &run.draws[0].cost;
        assert!(*cost <= Rational::from(4) * &run.kc.value, "seed {seed}");
        let opt = brute_force_ftfl(&inst, &d, BRUTE_FTFL_CAP).unwrap();
        assert!(opt.value <= *cost);
        assert!(run.kc.value <= opt.value, "seed {seed}: LP above OPT");
        assert!(*cost <= Rational::from(4) * &opt.value, "seed {seed}");
    }
}

#[test]
fn covers_hold_after_monotonization() {
    for seed in 100..112 {
        let inst = ftfl(GEOMETRIES[seed as usize % 3], 6, 4, 3, seed);
        let d = Distances::<Rational>::new(&inst.metric).unwrap();
        let kc = build_kc_lp(&inst, &d);
        let sol = solve_kc_lp(&kc, &SeparationOptions::default()).unwrap();
        let mut point = vec![Rational::from(0); kc.layout.num_vars()];
        for i in 0..kc.layout.n {
            point[kc.layout.y(i)] = sol.y[i].clone();
        }
        for j in 0..kc.clients.len() {
            for i in 0..kc.layout.n {
                point[kc.layout.x(j, i)] = sol.x[j][i].clone();
            }
            for t in 1..=kc.layout.n {
                point[kc.layout.z(j, t)] = sol.z[j][t].clone();
            }
            assert!(sol.z[j].windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(threshold_integral(&sol.z[j], &kc.orders[j].c), service_term(&sol.z[j], &kc.orders[j].c));
        }
        assert_eq!(kc.brute_force_violation(&point), None, "seed {seed}");
    }
}

#[test]
fn reduction_preserves_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..20 {
        let inst = ftfl(GEOMETRIES[seed as usize % 3], 6, 4, 3, seed);
        let d = Distances::<Rational>::new(&inst.metric).unwrap();
        let copies = expand_weight_vectors(&inst);
        let need = inst.max_requirement();
        for _ in 0..10 {
            let mut open: Vec<usize> = (0..inst.n()).filter(|_| rng.random_bool(0.6)).collect();
            for i in 0..inst.n() {
                if open.len() < need && !open.contains(&i) {
                    open.push(i);
                }
            }
            let open = OpenSet::new(open);
            assert_eq!(
                evaluate_reduced_cost(&inst, &copies, &d, &open).unwrap(),
                evaluate_ftfl_cost(&inst, &d, &open).unwrap()
            );
        }
    }
}

#[test]
fn gap_family_values() {
    for n in [4usize, 8, 16] {
        let inst = gap_family_ftfl(n).unwrap();
        let d = Distances::<Rational>::new(&inst.metric).unwrap();
        let kc = build_kc_lp(&inst, &d);
        assert_eq!(solve_natural_lp(&kc).unwrap().value, Rational::from(1));
        let sol = solve_kc_lp(&kc, &SeparationOptions::default()).unwrap();
        assert!(sol.value >= Rational::from(n as i64 / 2));
        let opt = brute_force_ftfl(&inst, &d, BRUTE_FTFL_CAP).unwrap();
        assert_eq!(opt.value, Rational::from(n as i64));
    }
}

#[test]
fn random_threshold_mean_is_bounded() {
    for seed in 0..4 {
        let inst = ftfl(GEOMETRIES[seed as usize % 3], 6, 4, 2, seed + 40);
        let d = Distances::<Rational>::new(&inst.metric).unwrap();
        let run = run_ftfl(&inst, &d, &FtflMode::Random { trials: 300 }, seed).unwrap();
        assert!(run.draws.iter().all(|r| r.cost <= r.bound));
        let kc = run.kc.value.to_f64();
        assert!(run.mean_cost() <= 3.16 * kc + 3.0 * run.std_error() + 1e-9);
    }
}

#[test]
fn float_mode_agrees_with_rational() {
    for seed in 0..8 {
        let inst = ftfl(GEOMETRIES[seed as usize % 3], 6, 4, 3, seed + 70);
        let dq = Distances::<Rational>::new(&inst.metric).unwrap();
        let df = Distances::<f64>::new(&inst.metric).unwrap();
        let exact = solve_kc_lp(&build_kc_lp(&inst, &dq), &SeparationOptions::default()).unwrap();
        let float = solve_kc_lp(&build_kc_lp(&inst, &df), &SeparationOptions::default()).unwrap();
        let e = exact.value.to_f64();
        assert!((e - float.value).abs() <= 1e-7 * e.abs().max(1.0), "seed {seed}: {e} vs {}", float.value);
        let run = run_ftfl(&inst, &df, &FtflMode::Fixed(q(1, 4)), 0).unwrap();
        assert!(run.draws[0].cost <= 4.0 * run.kc.value * (1.0 + 1e-9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn oracle_matches_subset_enumeration(
        xs in proptest::collection::vec(0i64..=12, 1..=10),
        r in 1usize..=6,
        z in 0i64..=12,
    ) {
        let prefix: Vec<(usize, Rational)> = xs.iter().enumerate().map(|(i, &v)| (i, q(v, 12))).collect();
        let z = q(z, 12);
        let fast = kc_separation(&prefix, r, &z);
        let slow = kc_separation_brute(&prefix, r, &z);
        prop_assert_eq!(fast.is_some(), slow.is_some());
        if let (Some(f), Some(s)) = (fast, slow) {
            prop_assert_eq!(f.violation, s.violation);
        }
    }
}
