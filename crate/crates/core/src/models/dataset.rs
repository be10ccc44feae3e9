use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Labelled cases stored as a row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_features: usize,
    features: Vec<f64>,
    labels: Vec<u32>,
}

impl Dataset {
    pub fn new(n_features: usize, features: Vec<f64>, labels: Vec<u32>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidDataset("dataset has no cases".into()));
        }
        if n_features == 0 {
            return Err(Error::InvalidDataset("cases have no features".into()));
        }
        if features.len() != n_features * labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} feature values for {} cases of {n_features} features",
                features.len(),
                labels.len()
            )));
        }
        if !features.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidDataset("non-finite feature value".into()));
        }
        Ok(Self {
            n_features,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, case: usize) -> &[f64] {
        &self.features[case * self.n_features..(case + 1) * self.n_features]
    }

    pub fn label(&self, case: usize) -> u32 {
        self.labels[case]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// The first `n` cases (or all of them if there are fewer).
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let n = n.min(self.len());
        Self::new(
            self.n_features,
            self.features[..n * self.n_features].to_vec(),
            self.labels[..n].to_vec(),
        )
    }

    /// Write as CSV with header `case_id,label,f_0,...`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["case_id".to_string(), "label".to_string()];
        header.extend((0..self.n_features).map(|i| format!("f_{i}")));
        w.write_record(&header)?;
        for case in 0..self.len() {
            let mut rec = vec![case.to_string(), self.labels[case].to_string()];
            rec.extend(self.row(case).iter().map(|x| format!("{x:.16e}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        let ok_header = header.len() >= 3
            && &header[0] == "case_id"
            && &header[1] == "label"
            && header.iter().skip(2).enumerate().all(|(i, h)| h == format!("f_{i}"));
        if !ok_header {
            return Err(Error::InvalidDataset(format!(
                "{}: header must be case_id,label,f_0,...",
                path.display()
            )));
        }
        let n_features = header.len() - 2;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| {
                Error::InvalidDataset(format!("{}: row {}: bad {what}", path.display(), line + 1))
            };
            labels.push(rec[1].trim().parse().map_err(|_| bad("label"))?);
            for field in rec.iter().skip(2) {
                features.push(field.trim().parse::<f64>().map_err(|_| bad("feature"))?);
            }
        }
        Self::new(n_features, features, labels)
    }
}

/// Ground truth of a synthetic sparse logistic-regression problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseLogistic {
    pub weights: Vec<f64>,
    /// Sorted indices of the nonzero weights.
    pub support: Vec<usize>,
    /// Temperature of the logistic link; zero gives noiseless labels.
    pub noise: f64,
}

impl SparseLogistic {
    pub fn new<R: Rng + ?Sized>(d: usize, k_true: usize, noise: f64, rng: &mut R) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension {
                what: "synthetic features",
                value: 0,
            });
        }
        if k_true > d {
            return Err(Error::config(format!("k_true = {k_true} exceeds d = {d}")));
        }
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::config(format!("noise = {noise} must be nonnegative")));
        }
        let mut support = sample_indices(rng, d, k_true).into_vec();
        support.sort_unstable();
        let mut weights = vec![0.0; d];
        for &i in &support {
            weights[i] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        Ok(Self {
            weights,
            support,
            noise,
        })
    }

    /// `n` cases with standard normal features and labels from the logistic link.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::InvalidDataset("requested zero synthetic cases".into()));
        }
        let d = self.weights.len();
        let mut features = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let z: f64 = x.iter().zip(&self.weights).map(|(a, w)| a * w).sum();
            let p1 = if self.noise > 0.0 {
                1.0 / (1.0 + (-z / self.noise).exp())
            } else if z > 0.0 {
                1.0
            } else if z < 0.0 {
                0.0
            } else {
                0.5
            };
            labels.push(u32::from(rng.random::<f64>() < p1));
            features.extend(x);
        }
        Dataset::new(d, features, labels)
    }
}

/// Draw a sparse ground truth and `n` training cases from `seed`.
pub fn synth_sparse_logistic(
    d: usize,
    k_true: usize,
    n: usize,
    noise: f64,
    seed: u64,
) -> Result<(Dataset, SparseLogistic)> {
    if n == 0 {
        return Err(Error::InvalidDataset("requested zero synthetic cases".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = SparseLogistic::new(d, k_true, noise, &mut rng)?;
    let data = truth.sample(n, &mut rng)?;
    Ok((data, truth))
}
