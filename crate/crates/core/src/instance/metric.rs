//! Metric spaces over facilities and clients.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar};

/// A point of the metric: either a facility or a client, by index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Point {
    Facility(usize),
    Client(usize),
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Facility(i) => write!(f, "f{i}"),
            Point::Client(j) => write!(f, "c{j}"),
        }
    }
}

impl std::str::FromStr for Point {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("invalid point label `{s}` (expected f<i> or c<j>)"));
        let (tag, rest) = s.split_at_checked(1).ok_or_else(bad)?;
        let idx: usize = rest.parse().map_err(|_| bad())?;
        match tag {
            "f" => Ok(Point::Facility(idx)),
            "c" => Ok(Point::Client(idx)),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HstNode {
    pub children: Vec<usize>,
    pub edge_to_parent: Rational,
    /// Points located at this node; only leaves may carry points.
    pub points: Vec<Point>,
}

/// Hierarchically well-separated tree with all points at leaves.
#[derive(Clone, Debug, PartialEq)]
pub struct Hst {
    factor: Rational,
    nodes: Vec<HstNode>,
    root: usize,
    parent: Vec<Option<usize>>,
    depth: Vec<usize>,
    dist_to_root: Vec<Rational>,
    facility_leaf: Vec<usize>,
    client_leaf: Vec<usize>,
}

impl Hst {
    /// Builds the tree and checks its structure: one root, every node reachable once,
    /// positive edges, points only at leaves, each point exactly once.
    pub fn new(
        factor: Rational,
        nodes: Vec<HstNode>,
        facilities: usize,
        clients: usize,
    ) -> Result<Self> {
        let count = nodes.len();
        if count == 0 {
            return Err(Error::schema("metric.nodes", "HST needs at least one node"));
        }
        let mut parent = vec![None; count];
        for (id, node) in nodes.iter().enumerate() {
            for &c in &node.children {
                if c >= count {
                    return Err(Error::schema(
                        format!("metric.nodes[{id}].children"),
                        format!("child id {c} out of range"),
                    ));
                }
                if c == id || parent[c].is_some() {
                    return Err(Error::schema(
                        format!("metric.nodes[{c}]"),
                        "node has more than one parent",
                    ));
                }
                parent[c] = Some(id);
            }
        }
        let roots: Vec<usize> = (0..count).filter(|&v| parent[v].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::schema(
                "metric.nodes",
                format!("HST must have exactly one root, found {}", roots.len()),
            ));
        }
        let root = roots[0];
        let mut depth = vec![usize::MAX; count];
        let mut dist_to_root = vec![Rational::from(0); count];
        depth[root] = 0;
        let mut stack = vec![root];
        let mut seen = 0;
        while let Some(v) = stack.pop() {
            seen += 1;
            for &c in &nodes[v].children {
                if nodes[c].edge_to_parent <= 0 {
                    return Err(Error::schema(
                        format!("metric.nodes[{c}].edge_to_parent"),
                        "edge lengths must be positive",
                    ));
                }
                depth[c] = depth[v] + 1;
                dist_to_root[c] = &dist_to_root[v] + &nodes[c].edge_to_parent;
                stack.push(c);
            }
        }
        if seen != count {
            return Err(Error::schema("metric.nodes", "HST contains a cycle"));
        }
        let mut facility_leaf = vec![usize::MAX; facilities];
        let mut client_leaf = vec![usize::MAX; clients];
        for (id, node) in nodes.iter().enumerate() {
            if !node.points.is_empty() && !node.children.is_empty() {
                return Err(Error::schema(
                    format!("metric.nodes[{id}].leaf"),
                    "points must be located at leaves",
                ));
            }
            for p in &node.points {
                let slot = match *p {
                    Point::Facility(i) if i < facilities => &mut facility_leaf[i],
                    Point::Client(j) if j < clients => &mut client_leaf[j],
                    _ => {
                        return Err(Error::schema(
                            format!("metric.nodes[{id}].leaf"),
                            format!("unknown point {p}"),
                        ))
                    }
                };
                if *slot != usize::MAX {
                    return Err(Error::schema(
                        format!("metric.nodes[{id}].leaf"),
                        format!("point {p} placed twice"),
                    ));
                }
                *slot = id;
            }
        }
        if let Some(i) = facility_leaf.iter().position(|&l| l == usize::MAX) {
            return Err(Error::schema("metric.nodes", format!("facility f{i} has no leaf")));
        }
        if let Some(j) = client_leaf.iter().position(|&l| l == usize::MAX) {
            return Err(Error::schema("metric.nodes", format!("client c{j} has no leaf")));
        }
        Ok(Hst {
            factor,
            nodes,
            root,
            parent,
            depth,
            dist_to_root,
            facility_leaf,
            client_leaf,
        })
    }

    pub fn factor(&self) -> &Rational {
        &self.factor
    }

    pub fn nodes(&self) -> &[HstNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn leaf_of(&self, p: Point) -> usize {
        match p {
            Point::Facility(i) => self.facility_leaf[i],
            Point::Client(j) => self.client_leaf[j],
        }
    }

    pub fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].expect("non-root has a parent");
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].expect("non-root has a parent");
        }
        while a != b {
            a = self.parent[a].expect("non-root has a parent");
            b = self.parent[b].expect("non-root has a parent");
        }
        a
    }

    pub fn node_distance(&self, a: usize, b: usize) -> Rational {
        let l = self.lca(a, b);
        &self.dist_to_root[a] + &self.dist_to_root[b] - Rational::from(2) * &self.dist_to_root[l]
    }

    /// Node ids in preorder (children visited in listed order).
    pub fn preorder(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            order.push(v);
            for &c in self.nodes[v].children.iter().rev() {
                stack.push(c);
            }
        }
        order
    }

    /// Root-to-leaf edge decrease check: every child edge is at most the parent
    /// edge divided by the factor. Returns the first offending node.
    pub fn check_factor(&self) -> std::result::Result<(), usize> {
        for (id, node) in self.nodes.iter().enumerate() {
            let Some(p) = self.parent[id] else { continue };
            if p == self.root {
                continue;
            }
            let _ = node;
            if &self.nodes[id].edge_to_parent * &self.factor > self.nodes[p].edge_to_parent {
                return Err(id);
            }
        }
        Ok(())
    }

    /// `true` when, for every node, all point-carrying leaves below it are at the
    /// same distance from it.
    pub fn is_equidistant(&self) -> bool {
        let mut leaf_depth: Vec<Option<Rational>> = vec![None; self.nodes.len()];
        for &v in self.preorder().iter().rev() {
            let node = &self.nodes[v];
            if node.children.is_empty() {
                if !node.points.is_empty() {
                    leaf_depth[v] = Some(Rational::from(0));
                }
                continue;
            }
            let mut common: Option<Rational> = None;
            for &c in &node.children {
                if let Some(d) = &leaf_depth[c] {
                    let total = d + &self.nodes[c].edge_to_parent;
                    match &common {
                        None => common = Some(total),
                        Some(x) if *x == total => {}
                        Some(_) => return false,
                    }
                }
            }
            leaf_depth[v] = common;
        }
        true
    }
}

/// Distances over facilities ∪ clients.
#[derive(Clone, Debug, PartialEq)]
pub enum Metric {
    /// Square matrix, facilities first then clients.
    Explicit {
        facilities: usize,
        matrix: Vec<Vec<Rational>>,
    },
    Line {
        facilities: Vec<Rational>,
        clients: Vec<Rational>,
    },
    Plane {
        facilities: Vec<[Rational; 2]>,
        clients: Vec<[Rational; 2]>,
    },
    Hst(Hst),
}

impl Metric {
    pub fn facility_count(&self) -> usize {
        match self {
            Metric::Explicit { facilities, .. } => *facilities,
            Metric::Line { facilities, .. } => facilities.len(),
            Metric::Plane { facilities, .. } => facilities.len(),
            Metric::Hst(h) => h.facility_leaf.len(),
        }
    }

    pub fn client_count(&self) -> usize {
        match self {
            Metric::Explicit { facilities, matrix } => matrix.len() - facilities,
            Metric::Line { clients, .. } => clients.len(),
            Metric::Plane { clients, .. } => clients.len(),
            Metric::Hst(h) => h.client_leaf.len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Metric::Explicit { .. } => "explicit",
            Metric::Line { .. } => "line",
            Metric::Plane { .. } => "plane",
            Metric::Hst(_) => "hst",
        }
    }

    fn check_point(&self, p: Point) -> Result<()> {
        let ok = match p {
            Point::Facility(i) => i < self.facility_count(),
            Point::Client(j) => j < self.client_count(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("unknown point {p}")))
        }
    }

    fn flat_index(&self, p: Point) -> usize {
        match p {
            Point::Facility(i) => i,
            Point::Client(j) => self.facility_count() + j,
        }
    }

    /// Exact distance when the metric admits one (plane distances only for perfect squares).
    pub fn distance_exact(&self, a: Point, b: Point) -> Result<Option<Rational>> {
        self.check_point(a)?;
        self.check_point(b)?;
        Ok(match self {
            Metric::Explicit { matrix, .. } => {
                Some(matrix[self.flat_index(a)][self.flat_index(b)].clone())
            }
            Metric::Line {
                facilities,
                clients,
            } => {
                let x = |p: Point| match p {
                    Point::Facility(i) => &facilities[i],
                    Point::Client(j) => &clients[j],
                };
                let d = x(a) - x(b);
                Some(if d < 0 { -d } else { d })
            }
            Metric::Plane {
                facilities,
                clients,
            } => {
                let x = |p: Point| match p {
                    Point::Facility(i) => &facilities[i],
                    Point::Client(j) => &clients[j],
                };
                let (pa, pb) = (x(a), x(b));
                let dx = &pa[0] - &pb[0];
                let dy = &pa[1] - &pb[1];
                (&dx * &dx + &dy * &dy).sqrt()
            }
            Metric::Hst(h) => Some(h.node_distance(h.leaf_of(a), h.leaf_of(b))),
        })
    }

    /// Distance in the requested scalar type.
    pub fn distance<S: Scalar>(&self, a: Point, b: Point) -> Result<S> {
        if let Some(d) = self.distance_exact(a, b)? {
            return Ok(S::from_rational(&d));
        }
        if S::EXACT {
            return Err(Error::Unsupported(format!(
                "distance {a}-{b} is irrational; use float arithmetic for plane metrics"
            )));
        }
        let Metric::Plane {
            facilities,
            clients,
        } = self
        else {
            unreachable!("only plane metrics can be inexact")
        };
        let x = |p: Point| match p {
            Point::Facility(i) => &facilities[i],
            Point::Client(j) => &clients[j],
        };
        let (pa, pb) = (x(a), x(b));
        let dx = S::from_rational(&(&pa[0] - &pb[0]));
        let dy = S::from_rational(&(&pa[1] - &pb[1]));
        (dx.mul_ref(&dx) + dy.mul_ref(&dy))
            .sqrt()
            .ok_or_else(|| Error::invariant("negative squared distance"))
    }

    /// `true` when every distance is an exact rational.
    pub fn is_exact(&self) -> bool {
        match self {
            Metric::Plane { .. } => self
                .points()
                .iter()
                .all(|&a| self.points().iter().all(|&b| matches!(self.distance_exact(a, b), Ok(Some(_))))),
            _ => true,
        }
    }

    pub fn points(&self) -> Vec<Point> {
        (0..self.facility_count())
            .map(Point::Facility)
            .chain((0..self.client_count()).map(Point::Client))
            .collect()
    }
}

/// A metric violation: the kind of failure and the offending points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricViolation {
    pub kind: &'static str,
    pub points: Vec<Point>,
}

impl fmt::Display for MetricViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pts: Vec<String> = self.points.iter().map(|p| p.to_string()).collect();
        write!(f, "{} violated at ({})", self.kind, pts.join(", "))
    }
}

/// Checks nonnegativity, identity, symmetry and the triangle inequality (exactly
/// when every distance is rational, within tolerance otherwise), plus the HST
/// factor condition. Reports the first violation found.
pub fn validate_metric(metric: &Metric) -> std::result::Result<(), MetricViolation> {
    if let Metric::Hst(h) = metric {
        if h.factor < 2 {
            return Err(MetricViolation {
                kind: "hst-factor",
                points: vec![],
            });
        }
        if let Err(node) = h.check_factor() {
            let points = h.nodes[node].points.clone();
            return Err(MetricViolation {
                kind: "hst-factor",
                points,
            });
        }
    }
    if let Metric::Explicit { matrix, .. } = metric {
        let size = matrix.len();
        if let Some(row) = matrix.iter().position(|r| r.len() != size) {
            let p = point_of(metric, row);
            return Err(MetricViolation {
                kind: "square-matrix",
                points: vec![p],
            });
        }
    }
    if metric.is_exact() {
        check_axioms::<Rational>(metric)
    } else {
        check_axioms::<f64>(metric)
    }
}

fn point_of(metric: &Metric, flat: usize) -> Point {
    let n = metric.facility_count();
    if flat < n {
        Point::Facility(flat)
    } else {
        Point::Client(flat - n)
    }
}

fn check_axioms<S: Scalar>(metric: &Metric) -> std::result::Result<(), MetricViolation> {
    let pts = metric.points();
    let size = pts.len();
    let mut d = vec![vec![S::zero(); size]; size];
    for a in 0..size {
        for b in 0..size {
            d[a][b] = metric.distance::<S>(pts[a], pts[b]).map_err(|_| MetricViolation {
                kind: "distance",
                points: vec![pts[a], pts[b]],
            })?;
        }
    }
    for a in 0..size {
        if !d[a][a].is_zero_tol() {
            return Err(MetricViolation {
                kind: "identity",
                points: vec![pts[a]],
            });
        }
        for b in 0..size {
            if d[a][b].is_neg() {
                return Err(MetricViolation {
                    kind: "nonnegativity",
                    points: vec![pts[a], pts[b]],
                });
            }
            if !d[a][b].eq_tol(&d[b][a]) {
                return Err(MetricViolation {
                    kind: "symmetry",
                    points: vec![pts[a], pts[b]],
                });
            }
        }
    }
    for a in 0..size {
        for b in 0..size {
            for c in 0..size {
                if d[a][c].gt_tol(&d[a][b].add_ref(&d[b][c])) {
                    return Err(MetricViolation {
                        kind: "triangle",
                        points: vec![pts[a], pts[b], pts[c]],
                    });
                }
            }
        }
    }
    Ok(())
}

/// Precomputed facility-client and client-client distances.
#[derive(Clone, Debug)]
pub struct Distances<S> {
    /// `fc[i][j]` = d(facility i, client j).
    pub fc: Vec<Vec<S>>,
    /// `cc[j][j2]` = d(client j, client j2).
    pub cc: Vec<Vec<S>>,
}

impl<S: Scalar> Distances<S> {
    pub fn new(metric: &Metric) -> Result<Self> {
        let n = metric.facility_count();
        let m = metric.client_count();
        let mut fc = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(m);
            for j in 0..m {
                row.push(metric.distance::<S>(Point::Facility(i), Point::Client(j))?);
            }
            fc.push(row);
        }
        let mut cc = Vec::with_capacity(m);
        for a in 0..m {
            let mut row = Vec::with_capacity(m);
            for b in 0..m {
                row.push(metric.distance::<S>(Point::Client(a), Point::Client(b))?);
            }
            cc.push(row);
        }
        Ok(Distances { fc, cc })
    }

    pub fn facilities(&self) -> usize {
        self.fc.len()
    }

    pub fn clients(&self) -> usize {
        self.cc.len()
    }

    pub fn fc(&self, facility: usize, client: usize) -> &S {
        &self.fc[facility][client]
    }

    /// Facilities of `candidates` ordered by distance to `client`, ties by index.
    pub fn sorted_by_distance(&self, client: usize, candidates: &[usize]) -> Vec<usize> {
        let mut order = candidates.to_vec();
        order.sort_by(|&a, &b| {
            self.fc[a][client]
                .partial_cmp(&self.fc[b][client])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        order
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: i64) -> Rational {
        Rational::from(v)
    }

    fn explicit(rows: &[&[i64]], facilities: usize) -> Metric {
        Metric::Explicit {
            facilities,
            matrix: rows.iter().map(|r| r.iter().map(|&v| q(v)).collect()).collect(),
        }
    }

    #[test]
    fn line_distance() {
        let m = Metric::Line {
            facilities: vec![q(0), q(2)],
            clients: vec![q(1)],
        };
        let d: Rational = m.distance(Point::Facility(0), Point::Client(0)).unwrap();
        assert_eq!(d, q(1));
        let d: Rational = m.distance(Point::Client(0), Point::Client(0)).unwrap();
        assert_eq!(d, q(0));
        assert!(m.distance::<Rational>(Point::Facility(5), Point::Client(0)).is_err());
    }

    #[test]
    fn hst_two_leaf_distance() {
        let nodes = vec![
            HstNode {
                children: vec![1, 2],
                edge_to_parent: q(0),
                points: vec![],
            },
            HstNode {
                children: vec![],
                edge_to_parent: q(4),
                points: vec![Point::Facility(0)],
            },
            HstNode {
                children: vec![],
                edge_to_parent: q(4),
                points: vec![Point::Client(0)],
            },
        ];
        let h = Hst::new(q(2), nodes, 1, 1).unwrap();
        let m = Metric::Hst(h);
        let d: Rational = m.distance(Point::Facility(0), Point::Client(0)).unwrap();
        assert_eq!(d, q(8));
        assert!(validate_metric(&m).is_ok());
    }

    #[test]
    fn explicit_metric_checks() {
        assert!(validate_metric(&explicit(&[&[0, 1], &[1, 0]], 1)).is_ok());
        let bad = explicit(&[&[0, 1, 5], &[1, 0, 1], &[5, 1, 0]], 2);
        let v = validate_metric(&bad).unwrap_err();
        assert_eq!(v.kind, "triangle");
        assert_eq!(
            v.points,
            vec![Point::Facility(0), Point::Facility(1), Point::Client(0)]
        );
        let asym = explicit(&[&[0, 1], &[2, 0]], 1);
        assert_eq!(validate_metric(&asym).unwrap_err().kind, "symmetry");
    }

    #[test]
    fn plane_requires_float_for_irrational_distances() {
        let m = Metric::Plane {
            facilities: vec![[q(0), q(0)]],
            clients: vec![[q(1), q(1)], [q(3), q(4)]],
        };
        assert!(m.distance::<Rational>(Point::Facility(0), Point::Client(0)).is_err());
        let d: Rational = m.distance(Point::Facility(0), Point::Client(1)).unwrap();
        assert_eq!(d, q(5));
        let f: f64 = m.distance(Point::Facility(0), Point::Client(0)).unwrap();
        assert!((f - 2f64.sqrt()).abs() < 1e-12);
        assert!(validate_metric(&m).is_ok());
    }

    #[test]
    fn hst_rejects_points_on_internal_nodes() {
        let nodes = vec![
            HstNode {
                children: vec![1],
                edge_to_parent: q(0),
                points: vec![Point::Facility(0)],
            },
            HstNode {
                children: vec![],
                edge_to_parent: q(1),
                points: vec![Point::Client(0)],
            },
        ];
        assert!(Hst::new(q(2), nodes, 1, 1).is_err());
    }
}
