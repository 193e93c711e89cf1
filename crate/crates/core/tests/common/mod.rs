#![allow(dead_code)]

use ftclust::instance::{
    generate_instance, FtflInstance, FtmedInstance, GenParams, Geometry, Instance, Metric, ProblemKind,
};
use ftclust::Rational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn q(a: i64, b: i64) -> Rational {
    Rational::from_signeds(a, b)
}

pub fn ftmed(geometry: Geometry, n: usize, m: usize, k: usize, rmax: usize, seed: u64) -> FtmedInstance {
    let p = GenParams::new(ProblemKind::Ftmed, geometry, n, m, seed)
        .k(k)
        .requirements(1, rmax);
    match generate_instance(&p).unwrap() {
        Instance::Ftmed(i) => i,
        _ => unreachable!(),
    }
}

pub fn ftfl(geometry: Geometry, n: usize, m: usize, rmax: usize, seed: u64) -> FtflInstance {
    let p = GenParams::new(ProblemKind::Ftfl, geometry, n, m, seed).requirements(1, rmax);
    match generate_instance(&p).unwrap() {
        Instance::Ftfl(i) => i,
        _ => unreachable!(),
    }
}

/// Clustered line instance with hand-picked fractional openings: each cluster is
/// short of its largest requirement by a small deficit, so its clients reach far
/// away for a sliver of mass and tend to be dangerous. A far reservoir absorbs
/// the deficits so the openings sum to an integer `k`.
pub fn multiscale_case(seed: u64) -> (FtmedInstance, Vec<Rational>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deficits = [q(0, 1), q(1, 60), q(1, 90), q(1, 7), q(1, 50)];
    let clusters = rng.random_range(2..=3);
    let (mut fac, mut cli, mut req, mut y) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut total = q(0, 1);
    for c in 0..clusters {
        let center = 1000 * c as i64;
        let nf = rng.random_range(2..=3usize);
        let nc = rng.random_range(1..=3usize);
        let rs: Vec<usize> = (0..nc).map(|_| rng.random_range(1..=nf.min(2))).collect();
        let r_max = *rs.iter().max().unwrap();
        let eps = deficits[rng.random_range(0..deficits.len())].clone();
        let mass = Rational::from(r_max as i64) - eps;
        let share = mass / Rational::from(nf as i64);
        let delta = if share < 1 && rng.random_bool(0.5) {
            (Rational::from(1) - &share).min(q(1, 10))
        } else {
            q(0, 1)
        };
        for f in 0..nf {
            fac.push(Rational::from(center + rng.random_range(0..3i64)));
            let mut v = share.clone();
            if nf >= 2 && f == 0 {
                v += delta.clone();
            } else if nf >= 2 && f == 1 {
                v -= delta.clone();
            }
            total += v.clone();
            y.push(v);
        }
        for r in rs {
            cli.push(Rational::from(center + rng.random_range(0..3i64)));
            req.push(r);
        }
    }
    let mut k = 0i64;
    while Rational::from(k) < total {
        k += 1;
    }
    let mut rest = Rational::from(k) - total;
    while rest > 0 {
        let v = rest.clone().min(Rational::from(1));
        rest -= v.clone();
        fac.push(Rational::from(1_000_000 + fac.len() as i64));
        y.push(v);
    }
    let inst = FtmedInstance::new(
        Metric::Line {
            facilities: fac,
            clients: cli,
        },
        k as usize,
        req,
    )
    .unwrap();
    (inst, y)
}
