//! The `train` command: data loading, model selection and per-epoch reporting.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mfvi::models::{accuracy, load_mnist, synth_sparse_logistic, Classifier, Dataset, LogisticModel, MlpModel};
use mfvi::trainer::{train, EpochStats, TrainState};
use mfvi::LossModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, write_text};

/// Synthetic sparse logistic problem, written `synth:d=256,k=16,n=2000,...`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub noise: f64,
    /// Held-out validation cases drawn from the same ground truth.
    pub val: usize,
    pub seed: Option<u64>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            d: 256,
            k: 16,
            n: 2000,
            noise: 1.0,
            val: 2000,
            seed: None,
        }
    }
}

impl SynthSpec {
    pub fn parse(spec: &str) -> CliResult<Self> {
        let mut s = Self::default();
        for kv in spec.split(',').map(str::trim).filter(|kv| !kv.is_empty()) {
            let bad = || CliError::Config(format!("synth spec '{spec}': bad entry '{kv}'"));
            let (key, value) = kv.split_once('=').ok_or_else(bad)?;
            match key.trim() {
                "d" => s.d = value.parse().map_err(|_| bad())?,
                "k" => s.k = value.parse().map_err(|_| bad())?,
                "n" => s.n = value.parse().map_err(|_| bad())?,
                "noise" => s.noise = value.parse().map_err(|_| bad())?,
                "val" => s.val = value.parse().map_err(|_| bad())?,
                "seed" => s.seed = Some(value.parse().map_err(|_| bad())?),
                _ => {
                    return Err(CliError::Config(format!(
                        "synth spec '{spec}': unknown key '{key}' (expected d, k, n, noise, val, seed)"
                    )))
                }
            }
        }
        Ok(s)
    }

    /// Training and validation sets.
    pub fn generate(&self, default_seed: u64) -> CliResult<(Dataset, Dataset)> {
        let seed = self.seed.unwrap_or(default_seed);
        let (train, truth) = synth_sparse_logistic(self.d, self.k, self.n, self.noise, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let val = truth.sample(self.val.max(1), &mut rng)?;
        Ok((train, val))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synth(SynthSpec),
    Mnist(PathBuf),
    /// Binary labels in the `case_id,label,f_0,...` CSV format; validated on itself.
    Csv(PathBuf),
}

impl DataSource {
    pub fn parse(s: &str) -> CliResult<Self> {
        if let Some(spec) = s.strip_prefix("synth:") {
            Ok(DataSource::Synth(SynthSpec::parse(spec)?))
        } else if s == "synth" {
            Ok(DataSource::Synth(SynthSpec::default()))
        } else if let Some(dir) = s.strip_prefix("mnist:") {
            Ok(DataSource::Mnist(PathBuf::from(dir)))
        } else if let Some(path) = s.strip_prefix("csv:") {
            Ok(DataSource::Csv(PathBuf::from(path)))
        } else {
            Err(CliError::Config(format!(
                "data source '{s}' must be synth:SPEC, mnist:DIR or csv:PATH"
            )))
        }
    }
}

/// One row of `epochs.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRow {
    pub stats: EpochStats,
    pub accuracy_val: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub rows: Vec<EpochRow>,
    pub state: TrainState,
}

pub const HIST_BINS: usize = 20;

/// Counts of `p` in `HIST_BINS` equal bins over `[0, 1]`.
pub fn histogram(p: &[f64]) -> Vec<usize> {
    let mut counts = vec![0; HIST_BINS];
    for &x in p {
        let b = ((x * HIST_BINS as f64) as usize).min(HIST_BINS - 1);
        counts[b] += 1;
    }
    counts
}

fn run_model<M: LossModel + Classifier>(
    cfg: &RunConfig,
    model: &M,
    mu_init: Vec<f64>,
    val: &Dataset,
    rng: &mut ChaCha8Rng,
    out: &Path,
) -> CliResult<TrainOutcome> {
    let tc = cfg.train_config();
    if tc.n_epochs == 0 {
        let state = TrainState::init(&tc, model.n_cases(), mu_init, rng)?;
        state.save(&out.join("checkpoint.json"))?;
        return Ok(TrainOutcome { rows: Vec::new(), state });
    }
    let mut rows = Vec::new();
    let mut hist = String::from("epoch,p_nz_lo,p_nz_hi,count,log10_count\n");
    let state = train(&tc, model, mu_init, rng, |state, stats| {
        rows.push(EpochRow {
            stats: *stats,
            accuracy_val: accuracy(model, &state.mu, val),
        });
        for (b, c) in histogram(&state.p_nz).into_iter().enumerate() {
            let _ = writeln!(
                hist,
                "{},{},{},{},{}",
                stats.epoch,
                fmt_f64(b as f64 / HIST_BINS as f64),
                fmt_f64((b + 1) as f64 / HIST_BINS as f64),
                c,
                fmt_f64((1.0 + c as f64).log10())
            );
        }
        Ok(())
    })?;
    let mut epochs = String::from("epoch,J_train,frac_zero_realizable,frac_held,accuracy_val\n");
    for r in &rows {
        let _ = writeln!(
            epochs,
            "{},{},{},{},{}",
            r.stats.epoch,
            fmt_f64(r.stats.j_train),
            fmt_f64(r.stats.frac_zero_realizable),
            fmt_f64(r.stats.frac_held),
            fmt_f64(r.accuracy_val)
        );
    }
    write_text(&out.join("epochs.csv"), &epochs)?;
    write_text(&out.join("sieve_hist.csv"), &hist)?;
    state.save(&out.join("checkpoint.json"))?;
    Ok(TrainOutcome { rows, state })
}

fn limit(data: Dataset, n: Option<usize>) -> CliResult<Dataset> {
    match n {
        Some(n) => Ok(data.truncated(n)?),
        None => Ok(data),
    }
}

/// Train on `source` and write `epochs.csv`, `sieve_hist.csv` and
/// `checkpoint.json` under `out`. With zero epochs only the checkpoint is written.
pub fn run_train(cfg: &RunConfig, source: &DataSource, out: &Path) -> CliResult<TrainOutcome> {
    cfg.train_config().validate()?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    let h_p = cfg.train_config().prior_precision();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match source {
        DataSource::Synth(spec) => {
            let (train, val) = spec.generate(cfg.seed)?;
            let train = limit(train, cfg.max_train_cases)?;
            let val = limit(val, cfg.max_val_cases)?;
            let model = LogisticModel::new(train, h_p)?;
            let mu = vec![0.0; model.dim()];
            run_model(cfg, &model, mu, &val, &mut rng, out)
        }
        DataSource::Csv(path) => {
            let data = Dataset::read_csv(path).map_err(|e| CliError::from(e).context(path.display()))?;
            let train = limit(data, cfg.max_train_cases)?;
            let val = limit(train.clone(), cfg.max_val_cases)?;
            let model = LogisticModel::new(train, h_p)?;
            let mu = vec![0.0; model.dim()];
            run_model(cfg, &model, mu, &val, &mut rng, out)
        }
        DataSource::Mnist(dir) => {
            let train = limit(load_mnist(dir, "train")?, cfg.max_train_cases)?;
            let val = limit(load_mnist(dir, "t10k")?, cfg.max_val_cases)?;
            if val.n_features() != train.n_features() {
                return Err(CliError::Data(format!(
                    "{}: training images have {} pixels, validation images {}",
                    dir.display(),
                    train.n_features(),
                    val.n_features()
                )));
            }
            let model = MlpModel::new(train, cfg.hidden, 10, h_p)?;
            let mu = model.init_params(&mut rng);
            run_model(cfg, &model, mu, &val, &mut rng, out)
        }
    }
}
