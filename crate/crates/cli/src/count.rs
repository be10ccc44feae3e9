//! Exactly integrated mixed quadratic pairs per evaluation.

use std::fmt::Write as _;
use std::path::Path;

use mfvi::quadrature::{count_exact_pairs, EXACT_TOL};
use mfvi::PairMethod;

use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, write_text};

pub fn parse_pair_method(s: &str) -> CliResult<PairMethod> {
    match s {
        "cross-polytope" => Ok(PairMethod::CrossPolytope),
        "blocked-simplex" => Ok(PairMethod::BlockedSimplex { block: 2 }),
        other => other
            .strip_prefix("blocked-simplex:")
            .and_then(|b| b.parse().ok())
            .filter(|&b: &usize| b > 0)
            .map(|block| PairMethod::BlockedSimplex { block })
            .ok_or_else(|| {
                CliError::Config(format!(
                    "unknown method '{other}' (expected cross-polytope or blocked-simplex[:B])"
                ))
            }),
    }
}

pub fn method_name(m: PairMethod) -> String {
    match m {
        PairMethod::CrossPolytope => "cross-polytope".to_string(),
        PairMethod::BlockedSimplex { block } => format!("blocked-simplex:{block}"),
    }
}

#[derive(Debug, Clone)]
pub struct CountArgs {
    pub d: usize,
    pub methods: Vec<PairMethod>,
    pub max_evals: usize,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountRow {
    pub method: PairMethod,
    pub n_evals: usize,
    pub mean_exact_pairs: f64,
    pub exact_per_eval: f64,
}

/// Counts on each method's grid: its group size doubled until `max_evals`.
pub fn run_count(args: &CountArgs) -> CliResult<Vec<CountRow>> {
    let mut rows = Vec::new();
    for &method in &args.methods {
        let mut n = method.group_size();
        if n > args.max_evals {
            return Err(CliError::Config(format!(
                "max_evals = {} is below the group size {n} of {}",
                args.max_evals,
                method_name(method)
            )));
        }
        while n <= args.max_evals {
            let mean = count_exact_pairs(args.d, method, n, args.trials, EXACT_TOL, args.seed)?;
            rows.push(CountRow {
                method,
                n_evals: n,
                mean_exact_pairs: mean,
                exact_per_eval: mean / n as f64,
            });
            n *= 2;
        }
    }
    Ok(rows)
}

pub fn count_csv(rows: &[CountRow]) -> String {
    let mut s = String::from("method,n_evals,mean_exact_pairs,exact_per_eval\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            method_name(r.method),
            r.n_evals,
            fmt_f64(r.mean_exact_pairs),
            fmt_f64(r.exact_per_eval)
        );
    }
    s
}

pub fn exactness_count(args: &CountArgs, out: &Path) -> CliResult<Vec<CountRow>> {
    let rows = run_count(args)?;
    write_text(out, &count_csv(&rows))?;
    Ok(rows)
}
