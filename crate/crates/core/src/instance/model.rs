use serde::Serialize;

use super::metric::{validate_metric, Distances, Metric};
use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar};

/// Fault-tolerant k-median: open at most `k` facilities, client `j` connects to
/// its `requirements[j]` closest open facilities.
#[derive(Clone, Debug, PartialEq)]
pub struct FtmedInstance {
    pub metric: Metric,
    pub k: usize,
    pub requirements: Vec<usize>,
}

impl FtmedInstance {
    pub fn new(metric: Metric, k: usize, requirements: Vec<usize>) -> Result<Self> {
        let inst = FtmedInstance {
            metric,
            k,
            requirements,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.requirements.len() != self.metric.client_count() {
            return Err(Error::schema(
                "requirements",
                format!(
                    "expected {} entries, found {}",
                    self.metric.client_count(),
                    self.requirements.len()
                ),
            ));
        }
        if self.k == 0 {
            return Err(Error::schema("k", "k must be positive"));
        }
        if self.k > n {
            return Err(Error::Infeasible(format!("k: k = {} exceeds n = {n}", self.k)));
        }
        for (j, &r) in self.requirements.iter().enumerate() {
            if r == 0 {
                return Err(Error::schema(format!("requirements[{j}]"), "must be at least 1"));
            }
            if r > self.k {
                return Err(Error::Infeasible(format!("requirements[{j}]: r = {r} exceeds k = {}", self.k)));
            }
        }
        if let Err(v) = validate_metric(&self.metric) {
            return Err(Error::schema("metric", v.to_string()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.metric.facility_count()
    }

    pub fn m(&self) -> usize {
        self.metric.client_count()
    }

    pub fn max_requirement(&self) -> usize {
        self.requirements.iter().copied().max().unwrap_or(0)
    }
}

/// Fault-tolerant facility location with per-level client weights.
#[derive(Clone, Debug, PartialEq)]
pub struct FtflInstance {
    pub metric: Metric,
    pub opening_costs: Vec<Rational>,
    /// `weights[j][t]` multiplies the distance to the `(t+1)`-th closest open facility.
    pub weights: Vec<Vec<Rational>>,
}

impl FtflInstance {
    pub fn new(metric: Metric, opening_costs: Vec<Rational>, weights: Vec<Vec<Rational>>) -> Result<Self> {
        let inst = FtflInstance {
            metric,
            opening_costs,
            weights,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.opening_costs.len() != n {
            return Err(Error::schema(
                "opening_costs",
                format!("expected {n} entries, found {}", self.opening_costs.len()),
            ));
        }
        if let Some(i) = self.opening_costs.iter().position(|f| *f < 0) {
            return Err(Error::schema(format!("opening_costs[{i}]"), "must be nonnegative"));
        }
        if self.weights.len() != self.metric.client_count() {
            return Err(Error::schema(
                "weights",
                format!(
                    "expected {} vectors, found {}",
                    self.metric.client_count(),
                    self.weights.len()
                ),
            ));
        }
        for (j, w) in self.weights.iter().enumerate() {
            if let Some(t) = w.iter().position(|v| *v < 0) {
                return Err(Error::schema(format!("weights[{j}][{t}]"), "must be nonnegative"));
            }
            if w.len() > n {
                return Err(Error::Infeasible(format!("weights[{j}]: vector length {} exceeds n = {n}", w.len())));
            }
        }
        if let Err(v) = validate_metric(&self.metric) {
            return Err(Error::schema("metric", v.to_string()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.metric.facility_count()
    }

    pub fn m(&self) -> usize {
        self.metric.client_count()
    }

    /// Number of open facilities client `j` needs: the last level with positive weight.
    pub fn requirement(&self, j: usize) -> usize {
        self.weights[j]
            .iter()
            .rposition(|w| *w > 0)
            .map_or(0, |t| t + 1)
    }

    pub fn max_requirement(&self) -> usize {
        (0..self.m()).map(|j| self.requirement(j)).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Instance {
    Ftmed(FtmedInstance),
    Ftfl(FtflInstance),
}

impl Instance {
    pub fn metric(&self) -> &Metric {
        match self {
            Instance::Ftmed(i) => &i.metric,
            Instance::Ftfl(i) => &i.metric,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Instance::Ftmed(_) => "ftmed",
            Instance::Ftfl(_) => "ftfl",
        }
    }
}

/// A set of distinct original facilities, kept sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct OpenSet(Vec<usize>);

impl OpenSet {
    pub fn new(mut facilities: Vec<usize>) -> Self {
        facilities.sort_unstable();
        facilities.dedup();
        OpenSet(facilities)
    }

    pub fn facilities(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }
}

impl FromIterator<usize> for OpenSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        OpenSet::new(iter.into_iter().collect())
    }
}

/// The `r` closest members of `open` to client `j` (ties by facility index).
pub fn closest_open<S: Scalar>(dist: &Distances<S>, j: usize, open: &OpenSet, r: usize) -> Result<Vec<usize>> {
    if open.len() < r {
        return Err(Error::Infeasible(format!(
            "client {j} needs {r} facilities but only {} are open",
            open.len()
        )));
    }
    let mut order = dist.sorted_by_distance(j, open.facilities());
    order.truncate(r);
    Ok(order)
}

fn check_open_ids(open: &OpenSet, n: usize) -> Result<()> {
    match open.facilities().last() {
        Some(&i) if i >= n => Err(Error::InvalidInput(format!("facility {i} does not exist"))),
        _ => Ok(()),
    }
}

/// Σ_j Σ_{t ≤ r_j} d(j, t-th closest open facility).
pub fn evaluate_ftmed_cost<S: Scalar>(inst: &FtmedInstance, dist: &Distances<S>, open: &OpenSet) -> Result<S> {
    check_open_ids(open, inst.n())?;
    let mut total = S::zero();
    for (j, &r) in inst.requirements.iter().enumerate() {
        for i in closest_open(dist, j, open, r)? {
            total += dist.fc(i, j).clone();
        }
    }
    Ok(total)
}

/// Opening cost of `open` plus weighted distances to each client's closest open facilities.
pub fn evaluate_ftfl_cost<S: Scalar>(inst: &FtflInstance, dist: &Distances<S>, open: &OpenSet) -> Result<S> {
    check_open_ids(open, inst.n())?;
    let mut total = S::zero();
    for &i in open.facilities() {
        total += S::from_rational(&inst.opening_costs[i]);
    }
    for (j, w) in inst.weights.iter().enumerate() {
        let r = inst.requirement(j);
        for (t, i) in closest_open(dist, j, open, r)?.into_iter().enumerate() {
            if w[t] != 0 {
                total += S::from_rational(&w[t]).mul_ref(dist.fc(i, j));
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: i64) -> Rational {
        Rational::from(v)
    }

    fn line3() -> FtmedInstance {
        let metric = Metric::Line {
            facilities: vec![q(0), q(1), q(2)],
            clients: vec![q(0)],
        };
        FtmedInstance::new(metric, 2, vec![2]).unwrap()
    }

    #[test]
    fn ftmed_cost_on_line() {
        let inst = line3();
        let d = Distances::<Rational>::new(&inst.metric).unwrap();
        assert_eq!(evaluate_ftmed_cost(&inst, &d, &OpenSet::new(vec![0, 1])).unwrap(), q(1));
        assert_eq!(evaluate_ftmed_cost(&inst, &d, &OpenSet::new(vec![0, 2])).unwrap(), q(2));
        assert!(matches!(
            evaluate_ftmed_cost(&inst, &d, &OpenSet::new(vec![0])),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn colocated_single_requirement_is_free() {
        let metric = Metric::Line {
            facilities: vec![q(3)],
            clients: vec![q(3)],
        };
        let inst = FtmedInstance::new(metric, 1, vec![1]).unwrap();
        let d = Distances::<f64>::new(&inst.metric).unwrap();
        assert_eq!(evaluate_ftmed_cost(&inst, &d, &OpenSet::new(vec![0])).unwrap(), 0.0);
    }

    #[test]
    fn ftfl_cost_uses_level_weights() {
        let metric = Metric::Line {
            facilities: vec![q(1), q(3)],
            clients: vec![q(0)],
        };
        let inst = FtflInstance::new(metric.clone(), vec![q(0), q(0)], vec![vec![q(0), q(1)]]).unwrap();
        let d = Distances::<Rational>::new(&inst.metric).unwrap();
        assert_eq!(evaluate_ftfl_cost(&inst, &d, &OpenSet::new(vec![0, 1])).unwrap(), q(3));
        assert!(evaluate_ftfl_cost(&inst, &d, &OpenSet::new(vec![1])).is_err());

        let free = FtflInstance::new(metric, vec![q(2), q(5)], vec![vec![q(0), q(0)]]).unwrap();
        assert_eq!(evaluate_ftfl_cost(&free, &d, &OpenSet::new(vec![0, 1])).unwrap(), q(7));
        assert_eq!(free.requirement(0), 0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let metric = Metric::Line {
            facilities: vec![q(0)],
            clients: vec![q(0)],
        };
        assert!(FtmedInstance::new(metric.clone(), 0, vec![1]).is_err());
        assert!(FtmedInstance::new(metric.clone(), 2, vec![1]).is_err());
        assert!(FtmedInstance::new(metric.clone(), 1, vec![2]).is_err());
        assert!(FtmedInstance::new(metric, 1, vec![0]).is_err());
    }
}
