use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfvi_cli::bench::{integrate_bench, BenchArgs};
use mfvi_cli::config::RunConfig;
use mfvi_cli::count::{exactness_count, parse_pair_method, CountArgs};
use mfvi_cli::train::{run_train, DataSource, SynthSpec};
use mfvi_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "mfvi", version, about = "Mean-field quadrature experiments and sparsifying training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Signed integration errors of one basis function over many seeded trials.
    IntegrateBench {
        #[arg(long)]
        config: Option<PathBuf>,
        /// gauss, laplace or spikeslab
        #[arg(long)]
        dist: Option<String>,
        /// mc, qmc-mean, qmc-var, blocked-simplex[:B] or cross-polytope
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        d: Option<usize>,
        /// Product of factors phiDEG:COORD joined by '*', e.g. phi1:0*phi1:1
        #[arg(long)]
        basis: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        max_evals: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean number of exactly integrated mixed quadratic pairs.
    ExactnessCount {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 512)]
        d: usize,
        /// Comma-separated list of cross-polytope and blocked-simplex[:B]
        #[arg(long, default_value = "cross-polytope,blocked-simplex:2,blocked-simplex:4")]
        method: String,
        #[arg(long, default_value_t = 64)]
        max_evals: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sparsifying variational training.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// synth:KEY=VALUE,... or mnist:DIR or csv:PATH
        #[arg(long)]
        data: String,
        #[arg(long)]
        out: PathBuf,
        /// Override the configured number of epochs.
        #[arg(long)]
        epochs: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write a synthetic sparse logistic dataset as CSV.
    Synth {
        /// KEY=VALUE,... with d, k, n, noise, seed
        #[arg(long, default_value = "")]
        spec: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn out_path(flag: Option<PathBuf>, cfg: &RunConfig) -> CliResult<PathBuf> {
    flag.or_else(|| cfg.out.clone())
        .ok_or_else(|| CliError::Config("an output path is required (--out or \"out\" in the config)".into()))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::IntegrateBench {
            config,
            dist,
            method,
            d,
            basis,
            trials,
            max_evals,
            seed,
            out,
        } => {
            let cfg = RunConfig::load_or_default(config.as_deref())?;
            let out = out_path(out, &cfg)?;
            let args = BenchArgs {
                dist: dist.unwrap_or_else(|| cfg.dist.clone()),
                method: method.as_deref().unwrap_or(&cfg.method).parse()?,
                d: d.unwrap_or(cfg.d),
                basis: basis.unwrap_or_else(|| cfg.basis.clone()),
                trials: trials.unwrap_or(cfg.trials),
                max_evals: max_evals.unwrap_or(cfg.max_evals),
                seed: seed.unwrap_or(cfg.seed),
            };
            integrate_bench(&args, &out)?;
        }
        Command::ExactnessCount {
            config,
            d,
            method,
            max_evals,
            trials,
            seed,
            out,
        } => {
            let cfg = RunConfig::load_or_default(config.as_deref())?;
            let out = out_path(out, &cfg)?;
            let methods = method
                .split(',')
                .map(|m| parse_pair_method(m.trim()))
                .collect::<CliResult<Vec<_>>>()?;
            let args = CountArgs {
                d,
                methods,
                max_evals,
                trials,
                seed: seed.unwrap_or(cfg.seed),
            };
            exactness_count(&args, &out)?;
        }
        Command::Train {
            config,
            data,
            out,
            epochs,
            seed,
        } => {
            let mut cfg = RunConfig::load_or_default(config.as_deref())?;
            if let Some(e) = epochs {
                cfg.n_epochs = e;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let source = DataSource::parse(&data)?;
            let outcome = run_train(&cfg, &source, &out)?;
            if let Some(last) = outcome.rows.last() {
                eprintln!(
                    "epoch {}: J_train {:.6} zero fraction {:.4} validation accuracy {:.4}",
                    last.stats.epoch, last.stats.j_train, last.stats.frac_zero_realizable, last.accuracy_val
                );
            }
        }
        Command::Synth { spec, out } => {
            let s = SynthSpec::parse(&spec)?;
            let (data, _) = mfvi::models::synth_sparse_logistic(s.d, s.k, s.n, s.noise, s.seed.unwrap_or(0))?;
            data.write_csv(&out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mfvi: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
