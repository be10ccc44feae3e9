//! Integration-error benchmark over products of orthonormal polynomials.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use mfvi::quadrature::{
    blocked_simplex, cross_polytope_nodes, mc_nodes, mean_matched_nodes, moment_matched_nodes,
    random_start, trial_rng, BlockPartition,
};
use mfvi::{MeanField, NodeSet, OrthonormalBasis};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, write_text};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMethod {
    Mc,
    QmcMean,
    QmcVar,
    BlockedSimplex { block: usize },
    CrossPolytope,
}

impl BenchMethod {
    /// Evaluation counts on the benchmark grid, up to `max_evals`.
    pub fn grid(&self, max_evals: usize) -> Vec<usize> {
        let base = match *self {
            BenchMethod::BlockedSimplex { block } => block + 1,
            _ => 2,
        };
        std::iter::successors(Some(base), |&n| n.checked_mul(2))
            .take_while(|&n| n <= max_evals)
            .collect()
    }
}

impl FromStr for BenchMethod {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let method = match s {
            "mc" => BenchMethod::Mc,
            "qmc-mean" => BenchMethod::QmcMean,
            "qmc-var" => BenchMethod::QmcVar,
            "cross-polytope" => BenchMethod::CrossPolytope,
            "blocked-simplex" => BenchMethod::BlockedSimplex { block: 2 },
            other => match other.strip_prefix("blocked-simplex:") {
                Some(b) => BenchMethod::BlockedSimplex {
                    block: b
                        .parse()
                        .ok()
                        .filter(|&b: &usize| b > 0)
                        .ok_or_else(|| CliError::Config(format!("bad block size in '{other}'")))?,
                },
                None => {
                    return Err(CliError::Config(format!(
                        "unknown method '{other}' (expected mc, qmc-mean, qmc-var, blocked-simplex[:B] or cross-polytope)"
                    )))
                }
            },
        };
        Ok(method)
    }
}

/// A product of per-coordinate orthonormal polynomials, e.g. `phi1:0*phi1:1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisSpec {
    /// `(degree, coordinate)` factors in the order written.
    pub factors: Vec<(usize, usize)>,
}

impl BasisSpec {
    pub fn parse(spec: &str, d: usize) -> CliResult<Self> {
        let bad = |m: String| CliError::Config(format!("basis '{spec}': {m}"));
        let mut factors = Vec::new();
        for part in spec.split('*') {
            let part = part.trim();
            let rest = part
                .strip_prefix("phi")
                .ok_or_else(|| bad(format!("factor '{part}' must look like phiD:C")))?;
            let (deg, coord) = rest
                .split_once(':')
                .ok_or_else(|| bad(format!("factor '{part}' must look like phiD:C")))?;
            let deg: usize = deg.parse().map_err(|_| bad(format!("bad degree in '{part}'")))?;
            let coord: usize = coord
                .parse()
                .map_err(|_| bad(format!("bad coordinate in '{part}'")))?;
            if coord >= d {
                return Err(bad(format!("coordinate {coord} is out of range for d = {d}")));
            }
            factors.push((deg, coord));
        }
        Ok(Self { factors })
    }

    pub fn max_degree(&self) -> usize {
        self.factors.iter().map(|f| f.0).max().unwrap_or(0)
    }

    pub fn eval(&self, basis: &OrthonormalBasis, x: &[f64]) -> f64 {
        self.factors
            .iter()
            .map(|&(deg, c)| basis.eval(c, deg, x[c]))
            .product()
    }

    /// Exact expectation under the mean-field the basis was built for.
    pub fn exact(&self, basis: &OrthonormalBasis) -> f64 {
        let mut coords: Vec<usize> = self.factors.iter().map(|f| f.1).collect();
        coords.sort_unstable();
        coords.dedup();
        coords
            .iter()
            .map(|&c| {
                let degs: Vec<usize> = self
                    .factors
                    .iter()
                    .filter(|f| f.1 == c)
                    .map(|f| f.0)
                    .collect();
                basis.expectation_of_product(c, &degs)
            })
            .product()
    }
}

#[derive(Debug, Clone)]
pub struct BenchArgs {
    pub dist: String,
    pub method: BenchMethod,
    pub d: usize,
    pub basis: String,
    pub trials: usize,
    pub max_evals: usize,
    pub seed: u64,
}

/// One CSV row of signed-error order statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub n_evals: usize,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub mean_abs_err: f64,
}

fn nodes_for(
    method: BenchMethod,
    dist: &MeanField,
    n: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> CliResult<NodeSet> {
    let d = dist.dim();
    let nodes = match method {
        BenchMethod::Mc => mc_nodes(dist, n, rng)?,
        BenchMethod::QmcMean => mean_matched_nodes(dist, n, rng)?,
        BenchMethod::QmcVar => moment_matched_nodes(dist, n, rng)?.nodes,
        BenchMethod::CrossPolytope => {
            let pairs = n / 2;
            let k1 = random_start(d, pairs, rng);
            cross_polytope_nodes(&dist.mean(), &dist.stddev(), k1, pairs)?
        }
        BenchMethod::BlockedSimplex { block } => {
            let partition = BlockPartition::uniform(d, block)?;
            let sets = (0..n / (block + 1))
                .map(|_| blocked_simplex(&partition, rng))
                .collect::<mfvi::Result<Vec<_>>>()?;
            NodeSet::pooled(&sets)?.affine(&dist.mean(), &dist.stddev())?
        }
    };
    Ok(nodes)
}

/// Order-statistic rank positions used for the 5%, 50% and 95% quantiles.
pub fn quantile_ranks(t: usize) -> (usize, usize, usize) {
    let hi = ((0.95 * t as f64).ceil() as usize).min(t - 1);
    ((0.05 * t as f64).floor() as usize, t / 2, hi)
}

pub fn run_bench(args: &BenchArgs) -> CliResult<Vec<BenchRow>> {
    if args.trials == 0 {
        return Err(CliError::Config("trials must be positive".into()));
    }
    let dist = MeanField::preset(&args.dist, args.d)?;
    let spec = BasisSpec::parse(&args.basis, args.d)?;
    let basis = dist.orthonormal_basis(spec.max_degree().max(1))?;
    let exact = spec.exact(&basis);
    let grid = args.method.grid(args.max_evals);
    if grid.is_empty() {
        return Err(CliError::Config(format!(
            "max_evals = {} is below the smallest quadrature of {:?}",
            args.max_evals, args.method
        )));
    }
    let errors: Vec<Vec<f64>> = (0..args.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(args.seed, t as u64);
            grid.iter()
                .map(|&n| {
                    let nodes = nodes_for(args.method, &dist, n, &mut rng)?;
                    Ok(nodes.integrate(|x| spec.eval(&basis, x)) - exact)
                })
                .collect::<CliResult<Vec<f64>>>()
        })
        .collect::<CliResult<_>>()?;
    let (r05, r50, r95) = quantile_ranks(args.trials);
    let rows = grid
        .iter()
        .enumerate()
        .map(|(g, &n)| {
            let mut e: Vec<f64> = errors.iter().map(|row| row[g]).collect();
            let mean_abs_err = e.iter().map(|x| x.abs()).sum::<f64>() / e.len() as f64;
            e.sort_by(f64::total_cmp);
            BenchRow {
                n_evals: n,
                q05: e[r05],
                q50: e[r50],
                q95: e[r95],
                mean_abs_err,
            }
        })
        .collect();
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("n_evals,q05,q50,q95,mean_abs_err\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.n_evals,
            fmt_f64(r.q05),
            fmt_f64(r.q50),
            fmt_f64(r.q95),
            fmt_f64(r.mean_abs_err)
        );
    }
    s
}

pub fn integrate_bench(args: &BenchArgs, out: &Path) -> CliResult<Vec<BenchRow>> {
    let rows = run_bench(args)?;
    write_text(out, &bench_csv(&rows))?;
    Ok(rows)
}
