//! Runs every stage on one instance and records each structural check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bundles::{check_bundles, create_bundles};
use crate::error::{Error, Result};
use crate::exact::{brute_force_ftfl, brute_force_ftmed, solve_hst_exact, solve_line_exact, BRUTE_FTFL_CAP, BRUTE_FTMED_CAP};
use crate::ftfl::{
    build_kc_lp, cluster_round, evaluate_reduced_cost, kc_separation, kc_separation_brute, run_ftfl, service_term,
    solve_kc_lp, solve_natural_lp, threshold_integral, FtflMode, KcLp, KcSolution,
};
use crate::instance::{
    evaluate_ftfl_cost, validate_metric, Distances, FtflInstance, FtmedInstance, Instance, Metric, OpenSet,
};
use crate::laminar::{check_laminar, construct_laminar, verify_laminar};
use crate::lp::SeparationOptions;
use crate::relaxation::{check_facts, check_fractional, solve_relaxation};
use crate::rounding::{
    build_polytope, check_decomposition, check_vertex, decompose, round_fractional, ConstraintGroup,
};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    pub samples: usize,
    pub trials: usize,
    /// Largest prefix `|N(j,t)|` compared against subset enumeration.
    pub kc_brute_limit: usize,
    /// Run brute-force optima only up to this many facilities.
    pub brute_limit: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            samples: 50_000,
            trials: 200,
            kc_brute_limit: 12,
            brute_limit: 14,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub kind: String,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

#[derive(Default)]
struct Suite {
    checks: Vec<CheckResult>,
}

impl Suite {
    fn record<T>(&mut self, name: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => {
                self.checks.push(CheckResult {
                    name: name.into(),
                    passed: true,
                    detail: None,
                });
                Some(v)
            }
            Err(e) => {
                self.checks.push(CheckResult {
                    name: name.into(),
                    passed: false,
                    detail: Some(e.to_string()),
                });
                None
            }
        }
    }

    fn skip(&mut self, name: &str, why: &str) {
        self.checks.push(CheckResult {
            name: name.into(),
            passed: true,
            detail: Some(format!("skipped: {why}")),
        });
    }

    fn finish(self, kind: &str) -> VerifyReport {
        let passed = self.checks.iter().all(|c| c.passed);
        VerifyReport {
            kind: kind.into(),
            checks: self.checks,
            passed,
        }
    }
}

/// A report holding a single failed check, for instances that did not load.
pub fn failed_load(e: &Error) -> VerifyReport {
    let name = match e {
        Error::Schema { location, .. } if location.starts_with("metric") => "metric",
        _ => "load",
    };
    VerifyReport {
        kind: "unknown".into(),
        checks: vec![CheckResult {
            name: name.into(),
            passed: false,
            detail: Some(e.to_string()),
        }],
        passed: false,
    }
}

pub fn verify_instance<S: Scalar>(inst: &Instance, opts: &VerifyOptions) -> VerifyReport {
    let mut suite = Suite::default();
    let metric_ok = suite
        .record(
            "metric",
            validate_metric(inst.metric()).map_err(|v| Error::schema("metric", v.to_string())),
        )
        .is_some();
    if !metric_ok {
        return suite.finish(inst.kind());
    }
    let Some(dist) = suite.record("distances", Distances::<S>::new(inst.metric())) else {
        return suite.finish(inst.kind());
    };
    match inst {
        Instance::Ftmed(i) => verify_ftmed(&mut suite, i, &dist, opts),
        Instance::Ftfl(i) => verify_ftfl(&mut suite, i, &dist, opts),
    }
    suite.finish(inst.kind())
}

fn verify_ftmed<S: Scalar>(suite: &mut Suite, inst: &FtmedInstance, dist: &Distances<S>, opts: &VerifyOptions) {
    let Some(base) = suite.record("relaxation", solve_relaxation(inst, dist)) else {
        return;
    };
    let mut fsol = base.clone();
    suite.record("normalized form", check_fractional(inst, dist, &fsol));
    suite.record("normalized solution facts", check_facts(inst, dist, &fsol));
    let Some(bundles) = suite.record("bundle creation", create_bundles(&mut fsol, inst, dist)) else {
        return;
    };
    suite.record("bundle lemma", check_bundles(&fsol, inst, dist, &bundles));
    let Some(stage) = suite.record("laminar construction", construct_laminar(&fsol, inst, dist)) else {
        return;
    };
    suite.record(
        "laminar lemmas",
        check_laminar(&fsol, inst, dist, &stage.class, &stage.report, &stage.family),
    );
    suite.record(
        "laminarity of balls",
        verify_laminar(&stage.family.sets).map_err(|(a, b)| Error::invariant(format!("sets {a} and {b} cross"))),
    );
    let Some(poly) = suite.record("polytope", build_polytope(&fsol, &bundles, &stage.family, inst.k)) else {
        return;
    };
    suite.record("polytope systems laminar", polytope_systems_laminar(&poly));
    let y: Vec<S> = fsol.clones.iter().map(|c| c.y.clone()).collect();
    let Some(dec) = suite.record("decomposition", decompose(&y, &poly)) else {
        return;
    };
    suite.record("decomposition exactness", check_decomposition(&y, &poly, &dec));
    suite.record(
        "vertex properties",
        dec.terms
            .iter()
            .try_for_each(|(_, v)| check_vertex(v, &fsol, inst, &bundles, &stage.family)),
    );
    let Some(run) = suite.record(
        "rounding",
        round_fractional(inst, dist, base, opts.seed, opts.samples),
    ) else {
        return;
    };
    suite.record("exact marginals", run.check_exact_marginals(inst));
    let mc = run.marginal_check(inst);
    suite.record(
        "sampled marginals",
        if mc.pass {
            Ok(())
        } else {
            Err(Error::invariant(format!(
                "deviation {:.4}/{:.4} exceeds {}",
                mc.max_clone_deviation, mc.max_laminar_deviation, mc.tolerance
            )))
        },
    );
    let bad: Vec<usize> = run.client_bounds(inst).iter().filter(|b| !b.holds).map(|b| b.client).collect();
    suite.record(
        "per-client bounds",
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::invariant(format!("clients {bad:?} exceed their bound")))
        },
    );

    if inst.n() > opts.brute_limit {
        suite.skip("ratio vs brute force", "too many facilities");
        return;
    }
    let Some(opt) = suite.record("brute force", brute_force_ftmed(inst, dist, BRUTE_FTMED_CAP)) else {
        return;
    };
    let best = run.best().map(|b| b.cost.clone()).unwrap_or_else(S::zero);
    suite.record(
        "ratio vs brute force",
        if best.le_tol(&S::from_int(93).mul_ref(&opt.value)) && fsol.lp_value.le_tol(&opt.value) {
            Ok(())
        } else {
            Err(Error::invariant(format!("best {best} vs OPT {}", opt.value)))
        },
    );
    let exact = match &inst.metric {
        Metric::Line { .. } => Some(solve_line_exact(inst)),
        Metric::Hst(h) if h.is_equidistant() => Some(solve_hst_exact(inst)),
        _ => None,
    };
    if let Some(exact) = exact {
        let opt_q = opt.value.to_rational();
        suite.record(
            "exact solver equals brute force",
            exact.and_then(|e| {
                if e.value == opt_q {
                    Ok(())
                } else {
                    Err(Error::invariant(format!("exact {} vs brute force {opt_q}", e.value)))
                }
            }),
        );
    }
}

fn polytope_systems_laminar<S: Scalar>(poly: &crate::rounding::RoundingPolytope<S>) -> Result<()> {
    let support = |r: usize| -> Vec<usize> { poly.lp.rows[r].coeffs.iter().map(|(i, _)| *i).collect() };
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (r, g) in poly.groups.iter().enumerate() {
        match g {
            ConstraintGroup::Bundle(_) => first.push(support(r)),
            _ => second.push(support(r)),
        }
    }
    for (name, sets) in [("first", &first), ("second", &second)] {
        if let Err((a, b)) = verify_laminar(sets) {
            return Err(Error::invariant(format!("{name} system: rows {a} and {b} cross")));
        }
    }
    Ok(())
}

fn verify_ftfl<S: Scalar>(suite: &mut Suite, inst: &FtflInstance, dist: &Distances<S>, opts: &VerifyOptions) {
    let kc = build_kc_lp(inst, dist);
    suite.record("reduction preserves cost", reduction_check(inst, dist, &kc, opts.seed));
    let Some(sol) = suite.record("knapsack-cover LP", solve_kc_lp(&kc, &SeparationOptions::default())) else {
        return;
    };
    suite.record(
        "z monotone",
        if sol.z.iter().all(|z| z.windows(2).all(|w| w[0] <= w[1])) {
            Ok(())
        } else {
            Err(Error::invariant("z is not monotone"))
        },
    );
    let natural = solve_natural_lp(&kc);
    suite.record("oracle vs subset enumeration", oracle_check(&kc, &sol, natural.as_ref().ok(), opts.kc_brute_limit));
    suite.record("threshold integral identity", integral_check(&kc, &sol));
    let quarter = S::ratio(1, 4);
    let Some(out) = suite.record("clustered rounding at 1/4", cluster_round(inst, dist, &kc, &sol, &quarter)) else {
        return;
    };
    suite.record(
        "cost within 4x LP",
        if out.cost.le_tol(&S::from_int(4).mul_ref(&sol.value)) {
            Ok(())
        } else {
            Err(Error::invariant(format!("cost {} vs LP {}", out.cost, sol.value)))
        },
    );
    if opts.trials > 0 {
        suite.record(
            "random threshold per-draw bound",
            run_ftfl(inst, dist, &FtflMode::Random { trials: opts.trials }, opts.seed).and_then(|run| {
                match run.draws.iter().position(|d| !d.cost.le_tol(&d.bound)) {
                    None => Ok(()),
                    Some(t) => Err(Error::invariant(format!("draw {t} exceeds its bound"))),
                }
            }),
        );
    }
    if inst.n() > opts.brute_limit {
        suite.skip("ratio vs brute force", "too many facilities");
        return;
    }
    suite.record(
        "ratio vs brute force",
        brute_force_ftfl(inst, dist, BRUTE_FTFL_CAP).and_then(|opt| {
            if out.cost.le_tol(&S::from_int(4).mul_ref(&opt.value)) && sol.value.le_tol(&opt.value) {
                Ok(())
            } else {
                Err(Error::invariant(format!("cost {} vs OPT {}", out.cost, opt.value)))
            }
        }),
    );
}

fn reduction_check<S: Scalar>(inst: &FtflInstance, dist: &Distances<S>, kc: &KcLp<S>, seed: u64) -> Result<()> {
    let n = inst.n();
    let need = inst.max_requirement();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..16 {
        let mut open: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
        for i in 0..n {
            if open.len() >= need {
                break;
            }
            if !open.contains(&i) {
                open.push(i);
            }
        }
        let open = OpenSet::new(open);
        let a = evaluate_reduced_cost(inst, &kc.clients, dist, &open)?;
        let b = evaluate_ftfl_cost(inst, dist, &open)?;
        if !a.eq_tol(&b) {
            return Err(Error::invariant(format!("reduced cost {a} != original cost {b}")));
        }
    }
    Ok(())
}

fn oracle_check<S: Scalar>(kc: &KcLp<S>, sol: &KcSolution<S>, natural: Option<&KcSolution<S>>, limit: usize) -> Result<()> {
    let mut points = vec![sol];
    points.extend(natural);
    for p in points {
        for j in 0..kc.clients.len() {
            for t in 1..=kc.layout.n.min(limit) {
                let prefix: Vec<(usize, S)> = kc.orders[j].prefix(t).iter().map(|&i| (i, p.x[j][i].clone())).collect();
                let r = kc.clients[j].level;
                let fast = kc_separation(&prefix, r, &p.z[j][t]);
                let slow = kc_separation_brute(&prefix, r, &p.z[j][t]);
                let same = match (&fast, &slow) {
                    (None, None) => true,
                    (Some(a), Some(b)) => a.violation.eq_tol(&b.violation),
                    _ => false,
                };
                if !same {
                    return Err(Error::invariant(format!("copy {j}, t = {t}: oracle {fast:?} vs enumeration {slow:?}")));
                }
            }
        }
    }
    Ok(())
}

fn integral_check<S: Scalar>(kc: &KcLp<S>, sol: &KcSolution<S>) -> Result<()> {
    for j in 0..kc.clients.len() {
        let a = threshold_integral(&sol.z[j], &kc.orders[j].c);
        let b = service_term(&sol.z[j], &kc.orders[j].c);
        if !a.eq_tol(&b) {
            return Err(Error::invariant(format!("copy {j}: integral {a} != service term {b}")));
        }
    }
    Ok(())
}
