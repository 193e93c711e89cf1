//! Problem instances, metrics, cost evaluation, file IO and generators.

mod generate;
mod io;
mod metric;
mod model;

pub use generate::{gap_family_ftfl, gap_family_ftmed, generate_instance, GenParams, Geometry, ProblemKind};
pub use io::{instance_from_json, instance_to_json, instance_to_string, load_instance, parse_instance, save_instance};
pub use metric::{validate_metric, Distances, Hst, HstNode, Metric, MetricViolation, Point};
pub use model::{
    closest_open, evaluate_ftfl_cost, evaluate_ftmed_cost, FtflInstance, FtmedInstance, Instance, OpenSet,
};
