//! Approximation and exact algorithms for fault-tolerant k-median (FTMed) and
//! fault-tolerant facility location (FTFL).
//!
//! The FTMed pipeline solves the natural LP, splits facilities into clones,
//! groups clone mass into bundles, builds a laminar family around dangerous
//! clients, and rounds by sampling a vertex of the polytope cut out by those two
//! laminar families. FTFL is solved through a knapsack-cover strengthened LP and
//! a clustered threshold rounding. Line and HST metrics admit exact solvers.
//!
//! Every stage is generic over [`Scalar`](scalar::Scalar), so the same code runs
//! in exact rational arithmetic or in `f64`.

pub mod bundles;
pub mod error;
pub mod exact;
pub mod ftfl;
pub mod instance;
pub mod laminar;
pub mod lp;
pub mod relaxation;
pub mod rounding;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::{Arith, Rational, Scalar};
