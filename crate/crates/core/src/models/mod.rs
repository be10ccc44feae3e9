//! Built-in loss models and dataset handling.

mod dataset;
pub mod idx;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use dataset::{synth_sparse_logistic, Dataset, SparseLogistic};
pub use idx::{load_mnist, read_idx, IdxTensor};

use crate::error::{check_len, Error, Result};
use crate::projection::LossModel;

/// Models that map parameters and features to a class label.
pub trait Classifier {
    fn predict(&self, theta: &[f64], x: &[f64]) -> u32;
}

/// Fraction of cases in `data` whose label `model` predicts correctly.
pub fn accuracy<C: Classifier + ?Sized>(model: &C, theta: &[f64], data: &Dataset) -> f64 {
    let hits = (0..data.len())
        .filter(|&c| model.predict(theta, data.row(c)) == data.label(c))
        .count();
    hits as f64 / data.len() as f64
}

/// Adds the per-case share of a Gaussian prior, `(1 / N) h_P |theta|^2 / 2`.
fn add_prior(theta: &[f64], grad: &mut [f64], precision: f64, n: usize) -> f64 {
    let w = precision / n as f64;
    let mut sq = 0.0;
    for (g, &t) in grad.iter_mut().zip(theta) {
        *g += w * t;
        sq += t * t;
    }
    0.5 * w * sq
}

#[derive(Debug, Clone, PartialEq)]
pub enum Curvature {
    Diagonal(Vec<f64>),
    /// Symmetric, row-major.
    Dense(Vec<Vec<f64>>),
}

/// `c + b^T theta + theta^T A theta / 2`, identical for every case.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticOracleModel {
    a: Curvature,
    b: Vec<f64>,
    c: f64,
    n_cases: usize,
}

impl QuadraticOracleModel {
    pub fn new(a: Curvature, b: Vec<f64>, c: f64) -> Result<Self> {
        match &a {
            Curvature::Diagonal(h) => check_len("oracle diagonal", b.len(), h.len())?,
            Curvature::Dense(rows) => {
                check_len("oracle matrix rows", b.len(), rows.len())?;
                for (i, r) in rows.iter().enumerate() {
                    check_len("oracle matrix row", b.len(), r.len())?;
                    for j in 0..i {
                        if (r[j] - rows[j][i]).abs() > 1e-12 * (1.0 + r[j].abs()) {
                            return Err(Error::Precondition(format!(
                                "oracle matrix is not symmetric at ({i}, {j})"
                            )));
                        }
                    }
                }
            }
        }
        if b.is_empty() {
            return Err(Error::InvalidDimension {
                what: "quadratic oracle",
                value: 0,
            });
        }
        Ok(Self { a, b, c, n_cases: 1 })
    }

    pub fn with_cases(mut self, n_cases: usize) -> Self {
        self.n_cases = n_cases;
        self
    }

    pub fn curvature(&self) -> &Curvature {
        &self.a
    }
}

impl LossModel for QuadraticOracleModel {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn n_cases(&self) -> usize {
        self.n_cases
    }

    fn loss_grad(&self, theta: &[f64], _case: usize, grad: &mut [f64]) -> f64 {
        grad.copy_from_slice(&self.b);
        match &self.a {
            Curvature::Diagonal(h) => {
                for i in 0..theta.len() {
                    grad[i] += h[i] * theta[i];
                }
            }
            Curvature::Dense(rows) => {
                for (g, row) in grad.iter_mut().zip(rows) {
                    *g += row.iter().zip(theta).map(|(a, t)| a * t).sum::<f64>();
                }
            }
        }
        // c + theta . (b + (A theta)) / 2 + theta . b / 2
        let mut v = self.c;
        for i in 0..theta.len() {
            v += 0.5 * theta[i] * (grad[i] + self.b[i]);
        }
        v
    }
}

/// Logistic regression without intercept on labels `{0, 1}`.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    data: Dataset,
    prior_precision: f64,
}

impl LogisticModel {
    pub fn new(data: Dataset, prior_precision: f64) -> Result<Self> {
        if let Some(&y) = data.labels().iter().find(|&&y| y > 1) {
            return Err(Error::InvalidDataset(format!(
                "logistic labels must be 0 or 1, found {y}"
            )));
        }
        if !(prior_precision >= 0.0) {
            return Err(Error::config("prior precision must be nonnegative"));
        }
        Ok(Self {
            data,
            prior_precision,
        })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LossModel for LogisticModel {
    fn dim(&self) -> usize {
        self.data.n_features()
    }

    fn n_cases(&self) -> usize {
        self.data.len()
    }

    fn loss_grad(&self, theta: &[f64], case: usize, grad: &mut [f64]) -> f64 {
        let x = self.data.row(case);
        let y = f64::from(self.data.label(case));
        let z: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
        let r = sigmoid(z) - y;
        for (g, &xi) in grad.iter_mut().zip(x) {
            *g = r * xi;
        }
        softplus(z) - y * z + add_prior(theta, grad, self.prior_precision, self.data.len())
    }
}

impl Classifier for LogisticModel {
    fn predict(&self, theta: &[f64], x: &[f64]) -> u32 {
        let z: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
        u32::from(z > 0.0)
    }
}

/// One-hidden-layer tanh network with a softmax cross-entropy head.
///
/// Parameters are laid out as `W1` (hidden x input, row-major), `b1`,
/// `W2` (output x hidden, row-major), `b2`.
#[derive(Debug, Clone)]
pub struct MlpModel {
    data: Dataset,
    n_hidden: usize,
    n_classes: usize,
    prior_precision: f64,
}

impl MlpModel {
    pub const DEFAULT_HIDDEN: usize = 32;

    pub fn new(data: Dataset, n_hidden: usize, n_classes: usize, prior_precision: f64) -> Result<Self> {
        if n_hidden == 0 || n_classes < 2 {
            return Err(Error::config(format!(
                "need at least one hidden unit and two classes, got {n_hidden} and {n_classes}"
            )));
        }
        if let Some(&y) = data.labels().iter().find(|&&y| y as usize >= n_classes) {
            return Err(Error::InvalidDataset(format!(
                "label {y} out of range for {n_classes} classes"
            )));
        }
        Ok(Self {
            data,
            n_hidden,
            n_classes,
            prior_precision,
        })
    }

    pub fn layer_sizes(&self) -> [usize; 3] {
        [self.data.n_features(), self.n_hidden, self.n_classes]
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let [n_in, n_h, n_out] = self.layer_sizes();
        let b1 = n_h * n_in;
        let w2 = b1 + n_h;
        let b2 = w2 + n_out * n_h;
        (b1, w2, b2)
    }

    /// Uniform Glorot initialization of the weights; biases start at zero.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let [n_in, n_h, n_out] = self.layer_sizes();
        let (b1, w2, b2) = self.offsets();
        let mut theta = vec![0.0; self.dim()];
        let r1 = (6.0 / (n_in + n_h) as f64).sqrt();
        let r2 = (6.0 / (n_h + n_out) as f64).sqrt();
        for t in &mut theta[..b1] {
            *t = rng.random_range(-r1..r1);
        }
        for t in &mut theta[w2..b2] {
            *t = rng.random_range(-r2..r2);
        }
        theta
    }

    fn forward(&self, theta: &[f64], x: &[f64], hidden: &mut [f64], logits: &mut [f64]) {
        let [n_in, _, _] = self.layer_sizes();
        let (b1, w2, b2) = self.offsets();
        hidden.copy_from_slice(&theta[b1..w2]);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, h) in hidden.iter_mut().enumerate() {
                *h += theta[j * n_in + i] * xi;
            }
        }
        hidden.iter_mut().for_each(|h| *h = h.tanh());
        for (o, l) in logits.iter_mut().enumerate() {
            let row = &theta[w2 + o * self.n_hidden..w2 + (o + 1) * self.n_hidden];
            *l = theta[b2 + o] + row.iter().zip(hidden.iter()).map(|(w, h)| w * h).sum::<f64>();
        }
    }
}

impl LossModel for MlpModel {
    fn dim(&self) -> usize {
        let [n_in, n_h, n_out] = self.layer_sizes();
        n_h * n_in + n_h + n_out * n_h + n_out
    }

    fn n_cases(&self) -> usize {
        self.data.len()
    }

    fn loss_grad(&self, theta: &[f64], case: usize, grad: &mut [f64]) -> f64 {
        let [n_in, n_h, n_out] = self.layer_sizes();
        let (b1, w2, b2) = self.offsets();
        let x = self.data.row(case);
        let y = self.data.label(case) as usize;
        let mut hidden = vec![0.0; n_h];
        let mut logits = vec![0.0; n_out];
        self.forward(theta, x, &mut hidden, &mut logits);

        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        let log_z = max + sum_exp.ln();
        let loss = log_z - logits[y];

        grad.iter_mut().for_each(|g| *g = 0.0);
        // output layer
        let mut d_hidden = vec![0.0; n_h];
        for o in 0..n_out {
            let delta = (logits[o] - log_z).exp() - if o == y { 1.0 } else { 0.0 };
            grad[b2 + o] = delta;
            let row = w2 + o * n_h;
            for j in 0..n_h {
                grad[row + j] = delta * hidden[j];
                d_hidden[j] += delta * theta[row + j];
            }
        }
        // hidden layer through tanh
        for j in 0..n_h {
            let dz = d_hidden[j] * (1.0 - hidden[j] * hidden[j]);
            grad[b1 + j] = dz;
            let row = &mut grad[j * n_in..(j + 1) * n_in];
            for (g, &xi) in row.iter_mut().zip(x) {
                if xi != 0.0 {
                    *g = dz * xi;
                }
            }
        }
        loss + add_prior(theta, grad, self.prior_precision, self.data.len())
    }
}

impl Classifier for MlpModel {
    fn predict(&self, theta: &[f64], x: &[f64]) -> u32 {
        let mut hidden = vec![0.0; self.n_hidden];
        let mut logits = vec![0.0; self.n_classes];
        self.forward(theta, x, &mut hidden, &mut logits);
        let mut best = 0;
        for (o, &l) in logits.iter().enumerate() {
            if l > logits[best] {
                best = o;
            }
        }
        best as u32
    }
}

/// Largest mixed deviation `|fd - g| / max(1, |g|, |fd|)` between central
/// differences and the analytic gradient.
///
/// Each probe draws `theta ~ N(0, 0.5^2)` and a random case, then checks up
/// to 64 random coordinates with step `1e-5 (1 + |theta_i|)`.
pub fn gradient_check<M: LossModel + ?Sized>(model: &M, n_probes: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = model.dim();
    let mut grad = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    let mut worst: f64 = 0.0;
    for _ in 0..n_probes {
        let mut theta: Vec<f64> = (0..d)
            .map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let case = rng.random_range(0..model.n_cases().max(1));
        model.loss_grad(&theta, case, &mut grad);
        let coords: Vec<usize> = if d <= 64 {
            (0..d).collect()
        } else {
            (0..64).map(|_| rng.random_range(0..d)).collect()
        };
        for i in coords {
            let t = theta[i];
            let h = 1e-5 * (1.0 + t.abs());
            theta[i] = t + h;
            let fp = model.loss_grad(&theta, case, &mut scratch);
            theta[i] = t - h;
            let fm = model.loss_grad(&theta, case, &mut scratch);
            theta[i] = t;
            let fd = (fp - fm) / (2.0 * h);
            let dev = (fd - grad[i]).abs() / 1f64.max(grad[i].abs()).max(fd.abs());
            worst = worst.max(dev);
        }
    }
    worst
}
