use clap::ValueEnum;
use ftclust::exact::{brute_force_ftfl, brute_force_ftmed, solve_hst_exact, solve_line_exact, BRUTE_FTFL_CAP, BRUTE_FTMED_CAP};
use ftclust::ftfl::{solve_ftfl, FtflMode};
use ftclust::instance::{Distances, Instance, Metric};
use ftclust::rounding::solve_ftmed_approx;
use ftclust::{Arith, Rational, Scalar};
use serde_json::{json, Value};

use crate::{choose_arith, parse_alpha, CliError, SolveOpts};

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    LpRound,
    ExactLine,
    ExactHst,
    Brute,
    FtflFixed,
    FtflRandom,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::LpRound => "lp-round",
            Method::ExactLine => "exact-line",
            Method::ExactHst => "exact-hst",
            Method::Brute => "brute",
            Method::FtflFixed => "ftfl-fixed",
            Method::FtflRandom => "ftfl-random",
        }
    }

    /// Whether the method accepts this instance's kind and metric.
    pub fn fits(self, inst: &Instance) -> bool {
        match (self, inst) {
            (Method::Brute, _) => true,
            (Method::LpRound, Instance::Ftmed(_)) => true,
            (Method::ExactLine, Instance::Ftmed(i)) => matches!(i.metric, Metric::Line { .. }),
            (Method::ExactHst, Instance::Ftmed(i)) => matches!(i.metric, Metric::Hst(_)),
            (Method::FtflFixed | Method::FtflRandom, Instance::Ftfl(_)) => true,
            _ => false,
        }
    }
}

pub struct Solved {
    pub json: Value,
    pub summary: String,
    pub lp_value: Option<f64>,
    /// Best sample for lp-round, mean draw for ftfl-random, otherwise the solution cost.
    pub cost: f64,
}

pub fn solve(inst: &Instance, opts: &SolveOpts) -> Result<Solved, CliError> {
    let method = opts.method.unwrap_or(match inst {
        Instance::Ftmed(_) => Method::LpRound,
        Instance::Ftfl(_) => Method::FtflFixed,
    });
    if !method.fits(inst) {
        return Err(CliError::Usage(format!(
            "method {} does not apply to this {} instance ({} metric)",
            method.name(),
            inst.kind(),
            inst.metric().kind()
        )));
    }
    let arith = match method {
        Method::ExactLine | Method::ExactHst => Arith::Rational,
        _ => choose_arith(opts.arith, inst)?,
    };
    let mut out = match arith {
        Arith::Rational => solve_in::<Rational>(inst, method, opts)?,
        Arith::Float => solve_in::<f64>(inst, method, opts)?,
    };
    if let Value::Object(map) = &mut out.json {
        map.insert("arith".into(), json!(arith.to_string()));
    }
    Ok(out)
}

fn solve_in<S: Scalar>(inst: &Instance, method: Method, opts: &SolveOpts) -> Result<Solved, CliError> {
    match (method, inst) {
        (Method::LpRound, Instance::Ftmed(i)) => {
            let r = solve_ftmed_approx::<S>(i, opts.seed, opts.samples)?;
            Ok(Solved {
                summary: format!(
                    "lp-round: best {} over {} samples, mean {:.4}, LP {}",
                    r.best_cost_exact, r.samples, r.mean_cost, r.lp_value_exact
                ),
                lp_value: Some(r.lp_value),
                cost: r.best_cost,
                json: serde_json::to_value(&r).expect("reports serialize"),
            })
        }
        (Method::ExactLine | Method::ExactHst, Instance::Ftmed(i)) => {
            let s = if method == Method::ExactLine {
                solve_line_exact(i)?
            } else {
                solve_hst_exact(i)?
            };
            Ok(Solved {
                summary: format!("{}: optimum {} (LP {})", method.name(), s.value, s.lp1_value),
                lp_value: Some(s.lp1_value.to_f64()),
                cost: s.value.to_f64(),
                json: json!({
                    "method": method.name(),
                    "value": s.value.to_f64(),
                    "value_exact": s.value.to_string(),
                    "open_set": s.open.facilities(),
                    "lp1_value": s.lp1_value.to_string(),
                    "lp2_value": s.lp2_value.to_string(),
                    "pieces": s.pieces.len(),
                }),
            })
        }
        (Method::Brute, _) => {
            let d = Distances::<S>::new(inst.metric())?;
            let s = match inst {
                Instance::Ftmed(i) => brute_force_ftmed(i, &d, BRUTE_FTMED_CAP)?,
                Instance::Ftfl(i) => brute_force_ftfl(i, &d, BRUTE_FTFL_CAP)?,
            };
            Ok(Solved {
                summary: format!("brute: optimum {} with {:?}", s.value, s.open.facilities()),
                lp_value: None,
                cost: s.value.to_f64(),
                json: json!({
                    "method": "brute",
                    "value": s.value.to_f64(),
                    "value_exact": s.value.to_string(),
                    "open_set": s.open.facilities(),
                }),
            })
        }
        (Method::FtflFixed | Method::FtflRandom, Instance::Ftfl(i)) => {
            let mode = if method == Method::FtflFixed {
                FtflMode::Fixed(parse_alpha(&opts.alpha)?)
            } else {
                FtflMode::Random { trials: opts.trials }
            };
            let r = solve_ftfl::<S>(i, &mode, opts.seed)?;
            let cost = if method == Method::FtflFixed { r.best } else { r.mean };
            Ok(Solved {
                summary: format!(
                    "{}: cost {cost:.4} (best {}), LP {}, within factor {}: {}",
                    method.name(),
                    r.best_exact,
                    r.kc_value_exact,
                    r.bound_checks.factor,
                    r.bound_checks.within_factor
                ),
                lp_value: Some(r.kc_value),
                cost,
                json: serde_json::to_value(&r).expect("reports serialize"),
            })
        }
        _ => unreachable!("checked by Method::fits"),
    }
}
