//! JSON instance documents.
//!
//! Numbers are read exactly: JSON integers and decimals, or strings `"p/q"`.
//! Non-integral rationals are written back as `"p/q"` strings.

use std::path::Path;

use serde_json::{json, Map, Value};

use super::metric::{Hst, HstNode, Metric, Point};
use super::model::{FtflInstance, FtmedInstance, Instance};
use crate::error::{Error, Result};
use crate::scalar::{parse_rational, Rational};

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    parse_instance(&text)
}

pub fn save_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, instance_to_string(inst))?;
    Ok(())
}

pub fn instance_to_string(inst: &Instance) -> String {
    let mut out = serde_json::to_string_pretty(&instance_to_json(inst)).expect("JSON values serialize");
    out.push('\n');
    out
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let doc: Value = serde_json::from_str(text)?;
    instance_from_json(&doc)
}

fn rational_value(q: &Rational) -> Value {
    if q.denominator_ref() == &1u32 {
        // Integers go through the arbitrary-precision number path to stay exact.
        serde_json::from_str(&q.to_string()).expect("integer text is valid JSON")
    } else {
        Value::String(q.to_string())
    }
}

fn rationals(v: &[Rational]) -> Value {
    Value::Array(v.iter().map(rational_value).collect())
}

pub fn instance_to_json(inst: &Instance) -> Value {
    let mut doc = Map::new();
    doc.insert("kind".into(), json!(inst.kind()));
    doc.insert("metric".into(), metric_to_json(inst.metric()));
    match inst {
        Instance::Ftmed(i) => {
            doc.insert("k".into(), json!(i.k));
            doc.insert("requirements".into(), json!(i.requirements));
        }
        Instance::Ftfl(i) => {
            doc.insert("opening_costs".into(), rationals(&i.opening_costs));
            doc.insert(
                "weights".into(),
                Value::Array(i.weights.iter().map(|w| rationals(w)).collect()),
            );
        }
    }
    Value::Object(doc)
}

fn metric_to_json(metric: &Metric) -> Value {
    match metric {
        Metric::Explicit { matrix, .. } => json!({
            "type": "explicit",
            "matrix": Value::Array(matrix.iter().map(|r| rationals(r)).collect()),
        }),
        Metric::Line {
            facilities,
            clients,
        } => json!({
            "type": "line",
            "facilities": rationals(facilities),
            "clients": rationals(clients),
        }),
        Metric::Plane {
            facilities,
            clients,
        } => {
            let pts = |v: &[[Rational; 2]]| Value::Array(v.iter().map(|p| rationals(p)).collect());
            json!({
                "type": "plane",
                "facilities": pts(facilities),
                "clients": pts(clients),
            })
        }
        Metric::Hst(h) => {
            let nodes: Vec<Value> = h
                .nodes()
                .iter()
                .map(|node| {
                    let leaf = match node.points.as_slice() {
                        [] => Value::Null,
                        [p] => json!(p.to_string()),
                        many => Value::Array(many.iter().map(|p| json!(p.to_string())).collect()),
                    };
                    json!({
                        "children": node.children,
                        "edge_to_parent": rational_value(&node.edge_to_parent),
                        "leaf": leaf,
                    })
                })
                .collect();
            json!({
                "type": "hst",
                "factor": rational_value(h.factor()),
                "nodes": nodes,
            })
        }
    }
}

struct Cursor<'a> {
    value: &'a Value,
    path: String,
}

impl<'a> Cursor<'a> {
    fn root(value: &'a Value) -> Self {
        Cursor {
            value,
            path: String::new(),
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        let loc = if self.path.is_empty() { "<root>" } else { &self.path };
        Error::schema(loc, message)
    }

    fn field(&self, name: &str) -> Result<Cursor<'a>> {
        self.opt_field(name)?
            .ok_or_else(|| self.err(format!("missing field `{name}`")))
    }

    fn opt_field(&self, name: &str) -> Result<Option<Cursor<'a>>> {
        let obj = self.value.as_object().ok_or_else(|| self.err("expected an object"))?;
        Ok(obj.get(name).map(|value| Cursor {
            value,
            path: if self.path.is_empty() {
                name.to_string()
            } else {
                format!("{}.{name}", self.path)
            },
        }))
    }

    fn items(&self) -> Result<Vec<Cursor<'a>>> {
        let arr = self.value.as_array().ok_or_else(|| self.err("expected an array"))?;
        Ok(arr
            .iter()
            .enumerate()
            .map(|(i, value)| Cursor {
                value,
                path: format!("{}[{i}]", self.path),
            })
            .collect())
    }

    fn str(&self) -> Result<&'a str> {
        self.value.as_str().ok_or_else(|| self.err("expected a string"))
    }

    fn rational(&self) -> Result<Rational> {
        let text = match self.value {
            Value::Number(n) => n.to_string(),
            Value::String(s) => s.clone(),
            _ => return Err(self.err("expected a number or \"p/q\" string")),
        };
        parse_rational(&text).map_err(|e| self.err(e.to_string()))
    }

    fn usize(&self) -> Result<usize> {
        let q = self.rational()?;
        if q < 0 || q.denominator_ref() != &1u32 {
            return Err(self.err("expected a nonnegative integer"));
        }
        q.to_string().parse().map_err(|_| self.err("integer out of range"))
    }

    fn rationals(&self) -> Result<Vec<Rational>> {
        self.items()?.iter().map(|c| c.rational()).collect()
    }

    fn point2(&self) -> Result<[Rational; 2]> {
        let v = self.rationals()?;
        match <[Rational; 2]>::try_from(v) {
            Ok(p) => Ok(p),
            Err(_) => Err(self.err("expected a coordinate pair [x, y]")),
        }
    }
}

pub fn instance_from_json(doc: &Value) -> Result<Instance> {
    let root = Cursor::root(doc);
    let kind = root.field("kind")?;
    let metric_cur = root.field("metric")?;
    match kind.str()? {
        "ftmed" => {
            let reqs_cur = root.field("requirements")?;
            let requirements: Vec<usize> = reqs_cur.items()?.iter().map(|c| c.usize()).collect::<Result<_>>()?;
            let metric = metric_from_json(&metric_cur, requirements.len())?;
            let k = root.field("k")?.usize()?;
            Ok(Instance::Ftmed(FtmedInstance::new(metric, k, requirements)?))
        }
        "ftfl" => {
            let weights: Vec<Vec<Rational>> = root
                .field("weights")?
                .items()?
                .iter()
                .map(|c| c.rationals())
                .collect::<Result<_>>()?;
            let metric = metric_from_json(&metric_cur, weights.len())?;
            let opening_costs = root.field("opening_costs")?.rationals()?;
            if let Some(reqs) = root.opt_field("requirements")? {
                for (j, c) in reqs.items()?.iter().enumerate() {
                    if weights.get(j).map(|w| w.len()) != Some(c.usize()?) {
                        return Err(c.err("requirement must equal the weight vector length"));
                    }
                }
            }
            Ok(Instance::Ftfl(FtflInstance::new(metric, opening_costs, weights)?))
        }
        other => Err(kind.err(format!("unknown kind `{other}`"))),
    }
}

fn metric_from_json(cur: &Cursor<'_>, clients: usize) -> Result<Metric> {
    let ty = cur.field("type")?;
    match ty.str()? {
        "explicit" => {
            let rows_cur = cur.field("matrix")?;
            let matrix: Vec<Vec<Rational>> = rows_cur.items()?.iter().map(|c| c.rationals()).collect::<Result<_>>()?;
            if matrix.len() < clients {
                return Err(rows_cur.err(format!(
                    "matrix has {} rows but there are {clients} clients",
                    matrix.len()
                )));
            }
            if let Some(row) = matrix.iter().position(|r| r.len() != matrix.len()) {
                return Err(rows_cur.err(format!("row {row} has wrong length (matrix must be square)")));
            }
            Ok(Metric::Explicit {
                facilities: matrix.len() - clients,
                matrix,
            })
        }
        "line" => {
            let facilities = cur.field("facilities")?.rationals()?;
            let cl = cur.field("clients")?;
            let coords = cl.rationals()?;
            if coords.len() != clients {
                return Err(cl.err(format!("expected {clients} client coordinates")));
            }
            Ok(Metric::Line {
                facilities,
                clients: coords,
            })
        }
        "plane" | "euclidean" => {
            let facilities = cur.field("facilities")?.items()?.iter().map(|c| c.point2()).collect::<Result<_>>()?;
            let cl = cur.field("clients")?;
            let coords: Vec<[Rational; 2]> = cl.items()?.iter().map(|c| c.point2()).collect::<Result<_>>()?;
            if coords.len() != clients {
                return Err(cl.err(format!("expected {clients} client coordinates")));
            }
            Ok(Metric::Plane {
                facilities,
                clients: coords,
            })
        }
        "hst" => {
            let factor = cur.field("factor")?.rational()?;
            let mut nodes = Vec::new();
            let mut max_facility = None::<usize>;
            for node in cur.field("nodes")?.items()? {
                let children = node.field("children")?.items()?.iter().map(|c| c.usize()).collect::<Result<_>>()?;
                let edge_to_parent = match node.opt_field("edge_to_parent")? {
                    Some(c) => c.rational()?,
                    None => Rational::from(0),
                };
                let mut points = Vec::new();
                if let Some(leaf) = node.opt_field("leaf")? {
                    let labels = match leaf.value {
                        Value::Null => vec![],
                        Value::Array(_) => leaf.items()?,
                        _ => vec![leaf],
                    };
                    for l in labels {
                        let p: Point = l.str()?.parse().map_err(|e: Error| l.err(e.to_string()))?;
                        if let Point::Facility(i) = p {
                            max_facility = max_facility.max(Some(i));
                        }
                        points.push(p);
                    }
                }
                nodes.push(HstNode {
                    children,
                    edge_to_parent,
                    points,
                });
            }
            let facilities = max_facility.map_or(0, |i| i + 1);
            Ok(Metric::Hst(Hst::new(factor, nodes, facilities, clients)?))
        }
        other => Err(ty.err(format!("unknown metric type `{other}`"))),
    }
}
