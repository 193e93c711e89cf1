use std::path::PathBuf;
use std::time::Instant;

use ftclust::instance::{load_instance, Instance};
use rayon::prelude::*;

use crate::solve::{solve, Method};
use crate::{BenchArgs, CliError, SolveOpts};

struct Row {
    instance: String,
    method: Method,
    lp_value: Option<f64>,
    cost: f64,
    ratio_vs_lp: Option<f64>,
    ratio_vs_brute: Option<f64>,
    runtime_ms: f64,
}

fn ratio(cost: f64, base: f64) -> f64 {
    if base == 0.0 {
        if cost == 0.0 { 1.0 } else { f64::INFINITY }
    } else {
        cost / base
    }
}

fn opts_for(a: &BenchArgs, method: Method) -> SolveOpts {
    SolveOpts {
        method: Some(method),
        alpha: a.alpha.clone(),
        trials: a.trials,
        samples: a.samples,
        seed: a.seed,
        arith: a.arith,
    }
}

fn bench_one(a: &BenchArgs, path: &PathBuf) -> Result<Vec<Row>, CliError> {
    let inst: Instance = load_instance(path)?;
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut rows = Vec::new();
    for &method in a.methods.iter().filter(|m| m.fits(&inst)) {
        let start = Instant::now();
        let s = solve(&inst, &opts_for(a, method))?;
        rows.push(Row {
            instance: name.clone(),
            method,
            lp_value: s.lp_value,
            cost: s.cost,
            ratio_vs_lp: s.lp_value.map(|lp| ratio(s.cost, lp)),
            ratio_vs_brute: None,
            runtime_ms: start.elapsed().as_secs_f64() * 1000.0,
        });
    }
    if inst.metric().facility_count() <= a.brute_limit && !rows.is_empty() {
        let opt = match rows.iter().find(|r| r.method == Method::Brute) {
            Some(r) => r.cost,
            None => solve(&inst, &opts_for(a, Method::Brute))?.cost,
        };
        for r in &mut rows {
            r.ratio_vs_brute = Some(ratio(r.cost, opt));
        }
    }
    Ok(rows)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn run(a: &BenchArgs) -> Result<(), CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&a.dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Usage(format!("no .json instances in {}", a.dir.display())));
    }
    let per_instance: Vec<Result<Vec<Row>, CliError>> = paths.par_iter().map(|p| bench_one(a, p)).collect();

    let sink: Box<dyn std::io::Write> = match &a.out {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let csv_err = |e: csv::Error| CliError::Failed(format!("writing CSV: {e}"));
    w.write_record(["instance", "method", "lp_value", "cost", "ratio_vs_lp", "ratio_vs_brute", "runtime_ms", "seed"])
        .map_err(csv_err)?;
    let mut count = 0usize;
    let mut worst: Vec<(Method, f64)> = Vec::new();
    for (path, rows) in paths.iter().zip(per_instance) {
        let rows = rows.map_err(|e| match e {
            CliError::Core(inner) => CliError::Failed(format!("{}: {inner}", path.display())),
            other => other,
        })?;
        for r in rows {
            w.write_record([
                r.instance.clone(),
                r.method.name().to_string(),
                cell(r.lp_value),
                format!("{}", r.cost),
                cell(r.ratio_vs_lp),
                cell(r.ratio_vs_brute),
                format!("{:.3}", r.runtime_ms),
                a.seed.to_string(),
            ])
            .map_err(csv_err)?;
            count += 1;
            if let Some(x) = r.ratio_vs_lp {
                match worst.iter_mut().find(|(m, _)| *m == r.method) {
                    Some((_, v)) => *v = v.max(x),
                    None => worst.push((r.method, x)),
                }
            }
        }
    }
    w.flush()?;
    eprintln!("{count} rows from {} instances", paths.len());
    for (m, v) in worst {
        eprintln!("  {}: worst cost/LP {v:.4}", m.name());
    }
    Ok(())
}
