//! Seeded random instance generators.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metric::{Hst, HstNode, Metric, Point};
use super::model::{FtflInstance, FtmedInstance, Instance};
use crate::error::{Error, Result};
use crate::scalar::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Ftmed,
    Ftfl,
}

impl FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ftmed" => Ok(ProblemKind::Ftmed),
            "ftfl" => Ok(ProblemKind::Ftfl),
            _ => Err(Error::Parse(format!("unknown problem kind `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Geometry {
    Line,
    Plane,
    Hst,
    Explicit,
}

impl FromStr for Geometry {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line" => Ok(Geometry::Line),
            "plane" | "euclidean" => Ok(Geometry::Plane),
            "hst" => Ok(Geometry::Hst),
            "explicit" => Ok(Geometry::Explicit),
            _ => Err(Error::Parse(format!("unknown geometry `{s}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GenParams {
    pub kind: ProblemKind,
    pub geometry: Geometry,
    pub n: usize,
    pub m: usize,
    /// Facility budget (FTMed only).
    pub k: usize,
    pub rmin: usize,
    pub rmax: usize,
    /// Inclusive integer range of opening costs (FTFL only).
    pub cost_range: (u32, u32),
    /// Largest integer weight per level (FTFL only).
    pub max_weight: u32,
    /// Coordinates and edge weights are integers in `0..=coord_max`.
    pub coord_max: u32,
    pub seed: u64,
}

impl GenParams {
    pub fn new(kind: ProblemKind, geometry: Geometry, n: usize, m: usize, seed: u64) -> Self {
        GenParams {
            kind,
            geometry,
            n,
            m,
            k: n.min(3),
            rmin: 1,
            rmax: 1,
            cost_range: (0, 10),
            max_weight: 3,
            coord_max: 20,
            seed,
        }
    }

    pub fn k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn requirements(mut self, rmin: usize, rmax: usize) -> Self {
        self.rmin = rmin;
        self.rmax = rmax;
        self
    }

    pub fn costs(mut self, lo: u32, hi: u32) -> Self {
        self.cost_range = (lo, hi);
        self
    }
}

pub fn generate_instance(p: &GenParams) -> Result<Instance> {
    if p.n == 0 || p.m == 0 {
        return Err(Error::InvalidInput("need at least one facility and one client".into()));
    }
    if p.rmin == 0 || p.rmin > p.rmax {
        return Err(Error::InvalidInput(format!(
            "requirement range [{}, {}] is empty or starts at 0",
            p.rmin, p.rmax
        )));
    }
    if p.cost_range.0 > p.cost_range.1 || p.coord_max == 0 {
        return Err(Error::InvalidInput("empty cost or coordinate range".into()));
    }
    match p.kind {
        ProblemKind::Ftmed if p.k == 0 || p.k > p.n => {
            return Err(Error::InvalidInput(format!("k = {} must lie in [1, n = {}]", p.k, p.n)))
        }
        ProblemKind::Ftmed if p.rmax > p.k => {
            return Err(Error::InvalidInput(format!("rmax = {} exceeds k = {}", p.rmax, p.k)))
        }
        ProblemKind::Ftfl if p.rmax > p.n => {
            return Err(Error::InvalidInput(format!("rmax = {} exceeds n = {}", p.rmax, p.n)))
        }
        _ => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let metric = match p.geometry {
        Geometry::Line => random_line(&mut rng, p),
        Geometry::Plane => random_plane(&mut rng, p),
        Geometry::Hst => random_hst(&mut rng, p)?,
        Geometry::Explicit => random_explicit(&mut rng, p),
    };
    let reqs: Vec<usize> = (0..p.m).map(|_| rng.random_range(p.rmin..=p.rmax)).collect();
    Ok(match p.kind {
        ProblemKind::Ftmed => Instance::Ftmed(FtmedInstance::new(metric, p.k, reqs)?),
        ProblemKind::Ftfl => {
            let costs = (0..p.n)
                .map(|_| Rational::from(rng.random_range(p.cost_range.0..=p.cost_range.1)))
                .collect();
            let weights = reqs
                .iter()
                .map(|&r| {
                    (0..r)
                        .map(|t| {
                            let lo = if t + 1 == r { 1 } else { 0 };
                            Rational::from(rng.random_range(lo..=p.max_weight.max(1)))
                        })
                        .collect()
                })
                .collect();
            Instance::Ftfl(FtflInstance::new(metric, costs, weights)?)
        }
    })
}

fn coord(rng: &mut ChaCha8Rng, p: &GenParams) -> Rational {
    Rational::from(rng.random_range(0..=p.coord_max))
}

fn random_line(rng: &mut ChaCha8Rng, p: &GenParams) -> Metric {
    Metric::Line {
        facilities: (0..p.n).map(|_| coord(rng, p)).collect(),
        clients: (0..p.m).map(|_| coord(rng, p)).collect(),
    }
}

fn random_plane(rng: &mut ChaCha8Rng, p: &GenParams) -> Metric {
    let pt = |rng: &mut ChaCha8Rng| [coord(rng, p), coord(rng, p)];
    Metric::Plane {
        facilities: (0..p.n).map(|_| pt(rng)).collect(),
        clients: (0..p.m).map(|_| pt(rng)).collect(),
    }
}

/// Shortest-path metric of a random complete graph with integer weights; some
/// clients are co-located with a facility.
fn random_explicit(rng: &mut ChaCha8Rng, p: &GenParams) -> Metric {
    let size = p.n + p.m;
    let mut d = vec![vec![0u64; size]; size];
    for a in 0..size {
        for b in a + 1..size {
            let w = rng.random_range(1..=u64::from(p.coord_max));
            d[a][b] = w;
            d[b][a] = w;
        }
    }
    for c in 0..size {
        for a in 0..size {
            for b in 0..size {
                let via = d[a][c] + d[c][b];
                if via < d[a][b] {
                    d[a][b] = via;
                }
            }
        }
    }
    for j in 0..p.m {
        if rng.random_bool(0.2) {
            let i = rng.random_range(0..p.n);
            let row = d[i].clone();
            for b in 0..size {
                d[p.n + j][b] = row[b];
                d[b][p.n + j] = row[b];
            }
            d[p.n + j][p.n + j] = 0;
            d[p.n + j][i] = 0;
            d[i][p.n + j] = 0;
        }
    }
    Metric::Explicit {
        facilities: p.n,
        matrix: d
            .iter()
            .map(|r| r.iter().map(|&v| Rational::from(v)).collect())
            .collect(),
    }
}

/// Uniform-depth tree with branching 2..=3, edge lengths halving per level, and
/// points dropped on random leaves (co-location allowed).
fn random_hst(rng: &mut ChaCha8Rng, p: &GenParams) -> Result<Metric> {
    let depth = rng.random_range(2..=3u32);
    let mut nodes = vec![HstNode {
        children: vec![],
        edge_to_parent: Rational::from(0),
        points: vec![],
    }];
    let mut frontier = vec![0usize];
    for level in 1..=depth {
        let edge = Rational::from(1u64 << (depth - level + 1));
        let mut next = Vec::new();
        for &v in &frontier {
            for _ in 0..rng.random_range(2..=3) {
                let id = nodes.len();
                nodes.push(HstNode {
                    children: vec![],
                    edge_to_parent: edge.clone(),
                    points: vec![],
                });
                nodes[v].children.push(id);
                next.push(id);
            }
        }
        frontier = next;
    }
    let mut points: Vec<Point> = (0..p.n)
        .map(Point::Facility)
        .chain((0..p.m).map(Point::Client))
        .collect();
    points.shuffle(rng);
    for pt in points {
        let leaf = frontier[rng.random_range(0..frontier.len())];
        nodes[leaf].points.push(pt);
    }
    for node in &mut nodes {
        node.points.sort();
    }
    Ok(Metric::Hst(Hst::new(Rational::from(2), nodes, p.n, p.m)?))
}

fn gap_metric(n: usize) -> Metric {
    let mut facilities = vec![Rational::from(0); n - 1];
    facilities.push(Rational::from(n as u64));
    Metric::Line {
        facilities,
        clients: vec![Rational::from(0)],
    }
}

/// FTFL instance whose natural LP has gap n: n−1 free facilities at 0, one at n,
/// a single client at 0 paying only for its n-th facility.
pub fn gap_family_ftfl(n: usize) -> Result<FtflInstance> {
    if n < 2 {
        return Err(Error::InvalidInput("gap family needs n >= 2".into()));
    }
    let mut w = vec![Rational::from(0); n];
    w[n - 1] = Rational::from(1);
    FtflInstance::new(gap_metric(n), vec![Rational::from(0); n], vec![w])
}

/// FTMed analogue of the gap family: k = r = n.
pub fn gap_family_ftmed(n: usize) -> Result<FtmedInstance> {
    if n < 2 {
        return Err(Error::InvalidInput("gap family needs n >= 2".into()));
    }
    FtmedInstance::new(gap_metric(n), n, vec![n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::metric::validate_metric;

    #[test]
    fn gap_family_layout() {
        let g = gap_family_ftfl(4).unwrap();
        let Metric::Line {
            facilities,
            clients,
        } = &g.metric
        else {
            panic!("line metric expected")
        };
        let xs: Vec<Rational> = [0, 0, 0, 4].iter().map(|&v| Rational::from(v)).collect();
        assert_eq!(facilities, &xs);
        assert_eq!(clients, &vec![Rational::from(0)]);
        assert_eq!(g.requirement(0), 4);
        assert!(g.opening_costs.iter().all(|f| *f == 0));
    }

    #[test]
    fn deterministic_per_seed() {
        for geometry in [Geometry::Line, Geometry::Plane, Geometry::Hst, Geometry::Explicit] {
            let p = GenParams::new(ProblemKind::Ftfl, geometry, 6, 5, 99).requirements(1, 3);
            assert_eq!(generate_instance(&p).unwrap(), generate_instance(&p).unwrap());
        }
    }

    #[test]
    fn plane_instance_is_valid() {
        let p = GenParams::new(ProblemKind::Ftmed, Geometry::Plane, 8, 8, 1)
            .k(3)
            .requirements(1, 3);
        let inst = generate_instance(&p).unwrap();
        assert!(validate_metric(inst.metric()).is_ok());
    }

    #[test]
    fn impossible_parameters() {
        let p = GenParams::new(ProblemKind::Ftmed, Geometry::Line, 3, 2, 0).k(4);
        assert!(generate_instance(&p).is_err());
        let p = GenParams::new(ProblemKind::Ftmed, Geometry::Line, 3, 2, 0).requirements(2, 1);
        assert!(generate_instance(&p).is_err());
    }
}
