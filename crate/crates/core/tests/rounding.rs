mod common;

use common::{ftmed, multiscale_case};
use ftclust::instance::{Distances, Geometry};
use ftclust::relaxation::fractional_from_openings;
use ftclust::rounding::{round_fractional, run_ftmed_pipeline, FtmedRun, MARGINAL_TOLERANCE};
use ftclust::{Rational, Scalar};

fn multiscale_run(seed: u64, samples: usize) -> (ftclust::instance::FtmedInstance, FtmedRun<Rational>) {
    let (inst, y) = multiscale_case(seed);
    let d = Distances::<Rational>::new(&inst.metric).unwrap();
    let fsol = fractional_from_openings(&inst, &d, &y).unwrap();
    let run = round_fractional(&inst, &d, fsol, seed, samples).unwrap();
    (inst, run)
}

#[test]
fn lp_pipeline_sweep() {
    for seed in 0..30 {
        let geometry = [Geometry::Explicit, Geometry::Line, Geometry::Hst][seed as usize % 3];
        let inst = ftmed(geometry, 10, 8, 4, 2, seed);
        let d = Distances::<Rational>::new(&inst.metric).unwrap();
        let run = run_ftmed_pipeline(&inst, &d, seed, 200).unwrap();
        run.check_exact_marginals(&inst).unwrap();
        assert!(run.decomposition.terms.len() <= run.fsol.clones.len() + 1);
        assert!(run.client_bounds(&inst).iter().all(|b| b.holds));
        assert!(run.expected_cost() <= Rational::from(93) * &run.fsol.lp_value);
    }
}

#[test]
fn multiscale_cases_reach_the_laminar_stage() {
    let mut dangerous = 0;
    let mut dropped = 0;
    let mut nested = 0;
    for seed in 0..60 {
        let (inst, run) = multiscale_run(seed, 200);
        run.check_exact_marginals(&inst).unwrap();
        for b in run.client_bounds(&inst) {
            assert!(b.holds, "seed {seed}: {b:?}");
        }
        let rep = &run.laminar.report;
        dangerous += rep.dangerous.len();
        dropped += rep.witnesses.len();
        nested += run.laminar.family.parents.iter().filter(|p| p.is_some()).count();
    }
    assert!(dangerous > 20, "only {dangerous} dangerous clients");
    assert!(dropped > 0 && nested > 0, "dropped {dropped}, nested {nested}");
}

#[test]
fn float_pipeline_matches_rational_lp_value() {
    for seed in 0..10 {
        let inst = ftmed(Geometry::Explicit, 7, 5, 3, 2, seed);
        let dq = Distances::<Rational>::new(&inst.metric).unwrap();
        let df = Distances::<f64>::new(&inst.metric).unwrap();
        let a = run_ftmed_pipeline(&inst, &dq, seed, 100).unwrap().fsol.lp_value.to_f64();
        let b = run_ftmed_pipeline(&inst, &df, seed, 100).unwrap().fsol.lp_value;
        assert!((a - b).abs() <= 1e-6 * a.max(1.0), "seed {seed}: {a} vs {b}");
    }
}

#[test]
fn float_rounding_on_fractional_points() {
    for seed in 0..20 {
        let (inst, y) = multiscale_case(seed);
        let d = Distances::<f64>::new(&inst.metric).unwrap();
        let y: Vec<f64> = y.iter().map(|v| v.to_f64()).collect();
        let fsol = fractional_from_openings(&inst, &d, &y).unwrap();
        let run = round_fractional(&inst, &d, fsol, seed, 100).unwrap();
        run.check_exact_marginals(&inst).unwrap();
    }
}

#[test]
fn sampled_marginals_converge() {
    for seed in [1, 4, 9] {
        let (inst, run) = multiscale_run(seed, 50_000);
        let check = run.marginal_check(&inst);
        assert!(check.pass, "seed {seed}: {check:?}");
        assert!(check.max_clone_deviation <= MARGINAL_TOLERANCE);
    }
}
