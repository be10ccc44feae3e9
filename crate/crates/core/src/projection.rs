//! Per-coordinate quadratic projection of a loss from gradients evaluated at
//! cross-polytope antithetic pairs.

use crate::error::{check_len, Error, Result};
use crate::quadrature::{antithetic_pair, cross_polytope_signs, index_bits};

/// Per-case loss with an analytic gradient.
///
/// Implementations must be reentrant: `loss_grad` may be called from several
/// threads at once.
pub trait LossModel: Sync {
    /// Parameter dimension.
    fn dim(&self) -> usize;

    /// Number of training cases.
    fn n_cases(&self) -> usize;

    /// Loss of `case` at `theta`; the gradient is written into `grad`.
    fn loss_grad(&self, theta: &[f64], case: usize, grad: &mut [f64]) -> f64;
}

/// Quadratic model `J + G^T (theta - mu) + 1/2 sum_i H_i (theta_i - mu_i)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSummary {
    pub j: f64,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

impl QuadraticSummary {
    pub fn new(j: f64, g: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        check_len("quadratic summary hessian", g.len(), h.len())?;
        if !j.is_finite() {
            return Err(Error::NonFinite("quadratic summary J"));
        }
        if !g.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("quadratic summary G"));
        }
        if !h.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("quadratic summary H"));
        }
        Ok(Self { j, g, h })
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }
}

/// Pairs after which all mixed quadratic terms have cancelled: `2^ceil(log2 d)`.
pub fn full_period(d: usize) -> u64 {
    1u64 << index_bits(d)
}

/// Project `model`'s loss for `case` onto a diagonal quadratic about `mu`,
/// using `n_pairs` antithetic pairs from iterates `k1, k1 + 1, ...`.
///
/// Coordinates with `sigma_i = 0` get `H_i = 0`.
pub fn quadratic_approx<M: LossModel + ?Sized>(
    model: &M,
    case: usize,
    mu: &[f64],
    sigma: &[f64],
    k1: u64,
    n_pairs: usize,
) -> Result<QuadraticSummary> {
    let d = model.dim();
    check_len("projection mean", d, mu.len())?;
    check_len("projection stddev", d, sigma.len())?;
    if n_pairs == 0 {
        return Err(Error::config("quadratic_approx needs at least one antithetic pair"));
    }
    let mut j = 0.0;
    let mut g = vec![0.0; d];
    let mut h = vec![0.0; d];
    let mut g_plus = vec![0.0; d];
    let mut g_minus = vec![0.0; d];
    for k in k1..k1 + n_pairs as u64 {
        let s = cross_polytope_signs(d, k)?;
        let pair = antithetic_pair(mu, sigma, &s)?;
        let j_plus = evaluate(model, &pair.plus, case, &mut g_plus)?;
        let j_minus = evaluate(model, &pair.minus, case, &mut g_minus)?;
        j += j_plus + j_minus;
        for i in 0..d {
            g[i] += g_plus[i] + g_minus[i];
            h[i] += (g_plus[i] - g_minus[i]) * s.get(i);
        }
    }
    let n_eval = 2.0 * n_pairs as f64;
    let mut curvature = 0.0;
    for i in 0..d {
        g[i] /= n_eval;
        h[i] = if sigma[i] > 0.0 {
            h[i] / (n_eval * sigma[i])
        } else {
            0.0
        };
        curvature += h[i] * sigma[i] * sigma[i];
    }
    j = j / n_eval - 0.5 * curvature;
    QuadraticSummary::new(j, g, h)
}

fn evaluate<M: LossModel + ?Sized>(model: &M, theta: &[f64], case: usize, grad: &mut [f64]) -> Result<f64> {
    let loss = model.loss_grad(theta, case, grad);
    if !loss.is_finite() {
        return Err(Error::Evaluation {
            quantity: "loss",
            node: theta.to_vec(),
        });
    }
    if !grad.iter().all(|x| x.is_finite()) {
        return Err(Error::Evaluation {
            quantity: "gradient",
            node: theta.to_vec(),
        });
    }
    Ok(loss)
}
