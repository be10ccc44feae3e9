//! Sparsifying mean-field training with Dirac-Gauss marginals.
//!
//! Each training case is projected onto a diagonal quadratic (see
//! [`crate::projection`]); the projections are accumulated into an old and a
//! restarted sum that are blended by [`hybrid_coeffs`], and a quasi-Newton
//! step on the slab means is followed by the sieve, which remaps the zero
//! logits so a scheduled fraction of coordinates is pushed towards zero.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::projection::{quadratic_approx, LossModel, QuadraticSummary};

/// Version tag written into checkpoints.
pub const CHECKPOINT_VERSION: &str = "mfvi-ckpt-1";

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Target fraction of zeros at the end of training.
    pub f0_target: f64,
    /// Target fraction of coordinates held firmly nonzero.
    pub f1_target: f64,
    pub n_epochs: u32,
    /// Antithetic pairs per quadrature.
    pub n_pairs: usize,
    pub alpha_max: f64,
    pub alpha_init: f64,
    /// Largest conditional standard deviation of a nonzero coordinate.
    pub tau_max: f64,
    pub p_nz_zero: f64,
    pub p_nz_one: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            f0_target: 0.97,
            f1_target: 0.01,
            n_epochs: 10,
            n_pairs: 2,
            alpha_max: 0.1,
            alpha_init: 1e-5,
            tau_max: 0.3,
            p_nz_zero: 0.001,
            p_nz_one: 0.999,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfiguration(m));
        if !(0.0..=1.0).contains(&self.f0_target)
            || !(0.0..=1.0).contains(&self.f1_target)
            || self.f0_target + self.f1_target > 1.0
        {
            return bad(format!(
                "f0_target = {} and f1_target = {} must be fractions with sum at most 1",
                self.f0_target, self.f1_target
            ));
        }
        if self.n_pairs == 0 {
            return bad("n_pairs must be at least 1".into());
        }
        for (name, v) in [
            ("alpha_max", self.alpha_max),
            ("alpha_init", self.alpha_init),
            ("tau_max", self.tau_max),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        if !(0.0 < self.p_nz_zero && self.p_nz_zero < self.p_nz_one && self.p_nz_one < 1.0) {
            return bad(format!(
                "need 0 < p_nz_zero ({}) < p_nz_one ({}) < 1",
                self.p_nz_zero, self.p_nz_one
            ));
        }
        Ok(())
    }

    /// Gaussian prior precision folded into each case's loss.
    pub fn prior_precision(&self) -> f64 {
        self.tau_max.powi(-2)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Blend weights for the old (`alpha0`) and restarted (`alpha1`) sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridCoefficients {
    pub alpha0: f64,
    pub alpha1: f64,
}

impl HybridCoefficients {
    pub fn blend(&self, a0: f64, a1: f64) -> f64 {
        self.alpha0 * a0 + self.alpha1 * a1
    }
}

/// `alpha0 A0 + alpha1 A1` has the mean and variance of a `max(n0, n1)`-term sum.
pub fn hybrid_coeffs(n0: u64, n1: u64) -> Result<HybridCoefficients> {
    if n0 == 0 && n1 == 0 {
        return Err(Error::UndefinedSum);
    }
    let (a, b) = (n0 as f64, n1 as f64);
    Ok(HybridCoefficients {
        alpha0: ((a - b) / (a + b)).max(0.0),
        alpha1: (2.0 * a / (a + b)).max(1.0),
    })
}

/// `floor(N * 2^shift)` without floating point for negative shifts.
fn scaled_count(n: usize, shift: i64) -> u64 {
    let n = n as u64;
    if shift >= 0 {
        n.saturating_mul(1u64.checked_shl(shift as u32).unwrap_or(u64::MAX))
    } else {
        n.checked_shr((-shift) as u32).unwrap_or(0)
    }
}

/// Terms per restart in `epoch`: `floor(N 2^(epoch - n_epochs))`.
pub fn anneal_target(epoch: u32, n_epochs: u32, n: usize) -> u64 {
    scaled_count(n, i64::from(epoch) - i64::from(n_epochs))
}

/// Zero and held fractions at progress `t`.
///
/// With fewer than three epochs the ramp's denominator vanishes; the zero
/// fraction then jumps to its target once `t >= n_epochs - 1`.
pub fn sparsity_schedule(t: f64, f0_target: f64, f1_target: f64, n_epochs: u32) -> (f64, f64) {
    let e = f64::from(n_epochs);
    let ramp = if n_epochs >= 3 {
        ((1.0 - (1.0 - t).exp2()) / (1.0 - (2.0 - e).exp2())).clamp(0.0, 1.0)
    } else if t >= e - 1.0 {
        1.0
    } else {
        0.0
    };
    let f0 = ramp * f0_target;
    (f0, f1_target + f0_target - f0)
}

/// Zero logits before the sieve: `(log(H tau_max^2) - H nu^2) / 2`.
pub fn zeta_raw(h_hat: &[f64], nu: &[f64], tau_max: f64) -> Result<Vec<f64>> {
    check_len("zeta logits", h_hat.len(), nu.len())?;
    if let Some(i) = h_hat.iter().position(|&h| !(h > 0.0)) {
        return Err(Error::Precondition(format!(
            "hybrid Hessian must be positive, H[{i}] = {}",
            h_hat[i]
        )));
    }
    let t2 = tau_max * tau_max;
    Ok(h_hat
        .iter()
        .zip(nu)
        .map(|(&h, &v)| 0.5 * ((h * t2).ln() - h * v * v))
        .collect())
}

fn count_for(f: f64, d: usize) -> usize {
    ((f * d as f64 - 1e-9).ceil().max(0.0) as usize).min(d)
}

/// Boundary logits of the sieve, `(zeta0, zeta1)`.
///
/// `zeta0` is the smallest of the `ceil(f0 d)` largest logits and `zeta1` the
/// largest of the `ceil(f1 d)` smallest; `None` when the fraction is zero.
pub fn sieve_boundaries(zeta: &[f64], f0: f64, f1: f64) -> (Option<f64>, Option<f64>) {
    let d = zeta.len();
    let n_zero = count_for(f0, d);
    let n_one = count_for(f1, d).min(d - n_zero);
    let mut work = zeta.to_vec();
    let upper = (n_zero > 0).then(|| *work.select_nth_unstable_by(d - n_zero, f64::total_cmp).1);
    let lower = (n_one > 0).then(|| *work.select_nth_unstable_by(n_one - 1, f64::total_cmp).1);
    (upper, lower)
}

/// Monotone piecewise-affine remap of zero logits.
///
/// Logits at or above the upper boundary are translated so the boundary lands
/// on `lambda_zero`; logits at or below the lower boundary are translated so
/// it lands on `lambda_one`; the band in between is stretched linearly. A
/// missing boundary extends the neighbouring translation, and with both
/// fractions zero the map is the identity.
pub fn sieve_map(zeta: &[f64], f0: f64, f1: f64, lambda_zero: f64, lambda_one: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&f0) || !(0.0..=1.0).contains(&f1) || f0 + f1 > 1.0 + 1e-12 {
        return Err(Error::Precondition(format!("invalid sieve fractions f0={f0} f1={f1}")));
    }
    if !(lambda_zero > lambda_one) {
        return Err(Error::Precondition(format!(
            "sieve targets must satisfy lambda_zero ({lambda_zero}) > lambda_one ({lambda_one})"
        )));
    }
    if zeta.is_empty() {
        return Ok(Vec::new());
    }
    let (upper, lower) = sieve_boundaries(zeta, f0, f1);
    let map = |z: f64| -> f64 {
        match (upper, lower) {
            (None, None) => z,
            (Some(z0), None) => z - z0 + lambda_zero,
            (None, Some(z1)) => z - z1 + lambda_one,
            (Some(z0), Some(z1)) => {
                if z >= z0 {
                    z - z0 + lambda_zero
                } else if z <= z1 {
                    z - z1 + lambda_one
                } else {
                    lambda_one + (z - z1) * (lambda_zero - lambda_one) / (z0 - z1)
                }
            }
        }
    };
    Ok(zeta.iter().map(|&z| map(z)).collect())
}

/// Probability of being nonzero from a zero logit.
#[inline]
pub fn p_nonzero(zeta: f64) -> f64 {
    1.0 / (1.0 + zeta.exp())
}

/// Complete variational and accumulator state of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainState {
    pub version: String,
    pub config: TrainConfig,
    pub d: usize,
    pub n_cases: usize,
    /// Epochs completed so far.
    pub epoch: u32,
    /// Quadrature cursor.
    pub k: u64,
    pub h_min: f64,
    pub lambda_tgt_zero: f64,
    pub lambda_tgt_one: f64,
    pub zeta: Vec<f64>,
    pub p_nz: Vec<f64>,
    pub nu: Vec<f64>,
    pub tau: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub n0: u64,
    pub n1: u64,
    pub j0: f64,
    pub j1: f64,
    pub g0: Vec<f64>,
    pub g1: Vec<f64>,
    pub h0: Vec<f64>,
    pub h1: Vec<f64>,
    /// Mean per-case loss estimate over the last completed epoch.
    pub j_train: f64,
    /// Realized nonzero pattern, fixed at the start of the final epoch.
    pub r_nz: Option<Vec<f64>>,
}

impl TrainState {
    /// Initial state for `d` parameters and `n_cases` training cases with the
    /// expansion point at `mu_init`.
    pub fn init<R: Rng + ?Sized>(
        config: &TrainConfig,
        n_cases: usize,
        mu_init: Vec<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let d = mu_init.len();
        if d == 0 {
            return Err(Error::InvalidDimension {
                what: "trainer parameters",
                value: 0,
            });
        }
        if n_cases == 0 {
            return Err(Error::InvalidDataset("training set is empty".into()));
        }
        if !mu_init.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("initial parameters"));
        }
        let u: f64 = rng.random();
        let nq = config.n_pairs as u64;
        let k = (u * d as f64 / nq as f64).floor() as u64 * nq;
        let n0 = scaled_count(n_cases, 1 - i64::from(config.n_epochs)).max(1);
        let h_init = 1.0 / config.alpha_init;
        let sigma_init = h_init.powf(-0.5);
        let lambda_tgt_zero = -logit(config.p_nz_zero);
        let lambda_tgt_one = -logit(config.p_nz_one);
        Ok(Self {
            version: CHECKPOINT_VERSION.to_string(),
            config: config.clone(),
            d,
            n_cases,
            epoch: 0,
            k,
            h_min: 1.0 / (n0 as f64 * config.alpha_max),
            lambda_tgt_zero,
            lambda_tgt_one,
            zeta: vec![lambda_tgt_one; d],
            p_nz: vec![p_nonzero(lambda_tgt_one); d],
            nu: mu_init.clone(),
            tau: vec![sigma_init; d],
            mu: mu_init,
            sigma: vec![sigma_init; d],
            n0,
            n1: 0,
            j0: 0.0,
            j1: 0.0,
            g0: vec![0.0; d],
            g1: vec![0.0; d],
            h0: vec![h_init; d],
            h1: vec![0.0; d],
            j_train: 0.0,
            r_nz: None,
        })
    }

    /// Fold one case's quadratic projection into the sums and update the
    /// variational parameters. `t` is the training progress in epochs.
    pub fn variational_update(&mut self, q: &QuadraticSummary, t: f64) -> Result<()> {
        check_len("variational update", self.d, q.dim())?;
        if !(q.j.is_finite() && q.g.iter().chain(&q.h).all(|x| x.is_finite()) && t.is_finite()) {
            return Err(Error::NonFinite("variational update input"));
        }
        let cfg = &self.config;
        let h_floor = cfg.tau_max.powi(-2);
        self.n1 += 1;
        self.j1 += q.j;
        for i in 0..self.d {
            self.g1[i] += q.g[i];
            self.h1[i] = (self.h1[i] + q.h[i]).max(h_floor);
        }
        let hc = hybrid_coeffs(self.n0, self.n1)?;
        let step_floor = self.n0.max(self.n1) as f64 * self.h_min;
        let mut h_hat = vec![0.0; self.d];
        for i in 0..self.d {
            let g_hat = hc.blend(self.g0[i], self.g1[i]);
            h_hat[i] = hc.blend(self.h0[i], self.h1[i]);
            let g_nu = g_hat + h_hat[i] * (self.nu[i] - self.mu[i]);
            self.nu[i] -= g_nu / h_hat[i].max(step_floor);
            self.tau[i] = h_hat[i].powf(-0.5);
        }
        if self.epoch + 1 < cfg.n_epochs {
            let raw = zeta_raw(&h_hat, &self.nu, cfg.tau_max)?;
            let (f0, f1) = sparsity_schedule(t, cfg.f0_target, cfg.f1_target, cfg.n_epochs);
            self.zeta = sieve_map(&raw, f0, f1, self.lambda_tgt_zero, self.lambda_tgt_one)?;
            for (p, &z) in self.p_nz.iter_mut().zip(&self.zeta) {
                *p = p_nonzero(z);
            }
        } else if let Some(r) = &self.r_nz {
            self.p_nz.copy_from_slice(r);
        }
        let mut dj0 = 0.0;
        let mut dj1 = 0.0;
        for i in 0..self.d {
            let p = self.p_nz[i];
            let mu_new = p * self.nu[i];
            let delta = mu_new - self.mu[i];
            self.sigma[i] =
                (p * (1.0 - p) * self.nu[i] * self.nu[i] + p * self.tau[i] * self.tau[i]).sqrt();
            self.mu[i] = mu_new;
            // keep each quadratic sum's value at fixed theta unchanged
            dj0 += self.g0[i] * delta + 0.5 * self.h0[i] * delta * delta;
            dj1 += self.g1[i] * delta + 0.5 * self.h1[i] * delta * delta;
            self.g0[i] += self.h0[i] * delta;
            self.g1[i] += self.h1[i] * delta;
        }
        self.j0 += dj0;
        self.j1 += dj1;
        Ok(())
    }

    /// Fraction of coordinates that round to zero.
    pub fn frac_zero_realizable(&self) -> f64 {
        self.p_nz.iter().filter(|&&p| p < 0.5).count() as f64 / self.d as f64
    }

    /// Fraction of coordinates held at or above the nonzero target probability.
    pub fn frac_held(&self) -> f64 {
        let tol = 1e-9;
        self.p_nz
            .iter()
            .filter(|&&p| p >= self.config.p_nz_one - tol)
            .count() as f64
            / self.d as f64
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let state: Self = serde_json::from_str(&text)?;
        if state.version != CHECKPOINT_VERSION {
            return Err(Error::Format {
                path: path.to_path_buf(),
                offset: 0,
                message: format!(
                    "checkpoint version '{}', expected '{CHECKPOINT_VERSION}'",
                    state.version
                ),
            });
        }
        Ok(state)
    }
}

/// Quadratic model value at `theta` for a sum expanded about `mu`.
pub fn quadratic_form_value(j: f64, g: &[f64], h: &[f64], mu: &[f64], theta: &[f64]) -> f64 {
    let mut v = j;
    for i in 0..g.len() {
        let x = theta[i] - mu[i];
        v += g[i] * x + 0.5 * h[i] * x * x;
    }
    v
}

/// Summary of one completed epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: u32,
    pub j_train: f64,
    pub frac_zero_realizable: f64,
    pub frac_held: f64,
}

/// Run one pass over the training cases in random order.
pub fn epoch<M: LossModel + ?Sized, R: Rng + ?Sized>(
    state: &mut TrainState,
    model: &M,
    rng: &mut R,
) -> Result<EpochStats> {
    let n = model.n_cases();
    if n == 0 {
        return Err(Error::InvalidDataset("training set is empty".into()));
    }
    check_len("model dimension", state.d, model.dim())?;
    let e = state.epoch + 1;
    let n_epochs = state.config.n_epochs;
    state.n1 = 0;
    state.j1 = 0.0;
    state.g1.iter_mut().for_each(|x| *x = 0.0);
    state.h1.iter_mut().for_each(|x| *x = 0.0);
    let n_tgt = anneal_target(e, n_epochs, n).max(1);
    if e == n_epochs {
        state.r_nz = Some(
            state
                .p_nz
                .iter()
                .map(|&p| if p >= 0.5 { 1.0 } else { 0.0 })
                .collect(),
        );
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let nq = state.config.n_pairs;
    let mut j_sum = 0.0;
    for (i, &case) in order.iter().enumerate() {
        let q = quadratic_approx(model, case, &state.mu, &state.sigma, state.k, nq)?;
        j_sum += q.j;
        state.k += nq as u64;
        let t = f64::from(e - 1) + (i + 1) as f64 / n as f64;
        state.variational_update(&q, t)?;
        if state.n1 == n_tgt {
            state.n0 = state.n1;
            state.j0 = state.j1;
            std::mem::swap(&mut state.g0, &mut state.g1);
            std::mem::swap(&mut state.h0, &mut state.h1);
            state.n1 = 0;
            state.j1 = 0.0;
            state.g1.iter_mut().for_each(|x| *x = 0.0);
            state.h1.iter_mut().for_each(|x| *x = 0.0);
        }
    }
    state.epoch = e;
    state.j_train = j_sum / n as f64;
    Ok(EpochStats {
        epoch: e,
        j_train: state.j_train,
        frac_zero_realizable: state.frac_zero_realizable(),
        frac_held: state.frac_held(),
    })
}

/// Initialize and run all configured epochs, calling `on_epoch` after each.
pub fn train<M, R, F>(
    config: &TrainConfig,
    model: &M,
    mu_init: Vec<f64>,
    rng: &mut R,
    mut on_epoch: F,
) -> Result<TrainState>
where
    M: LossModel + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(&TrainState, &EpochStats) -> Result<()>,
{
    check_len("initial parameters", model.dim(), mu_init.len())?;
    let mut state = TrainState::init(config, model.n_cases(), mu_init, rng)?;
    while state.epoch < config.n_epochs {
        let stats = epoch(&mut state, model, rng)?;
        on_epoch(&state, &stats)?;
    }
    Ok(state)
}
