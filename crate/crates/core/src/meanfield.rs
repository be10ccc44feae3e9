//! Mean-field distributions: independent Gaussian, Laplace or Dirac-Gauss
//! (spike-and-slab) marginals, with closed-form moments, sampling and
//! orthonormal polynomial bases.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, Error, Result};
use crate::quadrature::NodeSet;

/// A single coordinate's marginal distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marginal {
    Gaussian { mean: f64, stddev: f64 },
    Laplace { loc: f64, scale: f64 },
    /// Point mass at zero with probability `p_zero`, otherwise `N(nu, tau^2)`.
    DiracGauss { p_zero: f64, nu: f64, tau: f64 },
}

impl Marginal {
    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Gaussian { mean, .. } => mean,
            Marginal::Laplace { loc, .. } => loc,
            Marginal::DiracGauss { p_zero, nu, .. } => (1.0 - p_zero) * nu,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Marginal::Gaussian { stddev, .. } => stddev * stddev,
            Marginal::Laplace { scale, .. } => 2.0 * scale * scale,
            Marginal::DiracGauss { p_zero, nu, tau } => {
                p_zero * (1.0 - p_zero) * nu * nu + (1.0 - p_zero) * tau * tau
            }
        }
    }

    pub fn stddev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// `E[(x - mean)^k]` in closed form.
    pub fn central_moment(&self, k: u32) -> f64 {
        match *self {
            Marginal::Gaussian { stddev, .. } => stddev.powi(k as i32) * gaussian_moment(k),
            Marginal::Laplace { scale, .. } => {
                if k % 2 == 1 {
                    0.0
                } else {
                    factorial(k) * scale.powi(k as i32)
                }
            }
            Marginal::DiracGauss { p_zero, nu, tau } => {
                let mu = self.mean();
                let c = nu - mu;
                let slab: f64 = (0..=k)
                    .map(|j| {
                        binomial(k, j)
                            * c.powi((k - j) as i32)
                            * tau.powi(j as i32)
                            * gaussian_moment(j)
                    })
                    .sum();
                p_zero * (-mu).powi(k as i32) + (1.0 - p_zero) * slab
            }
        }
    }

    /// `E[z^k]` for the standardized variable `z = (x - mean) / stddev`.
    pub fn standardized_moment(&self, k: u32) -> f64 {
        self.central_moment(k) / self.stddev().powi(k as i32)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Marginal::Gaussian { mean, stddev } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + stddev * z
            }
            Marginal::Laplace { loc, scale } => {
                // inverse CDF on u in (-1/2, 1/2)
                let u: f64 = rng.random::<f64>() - 0.5;
                loc - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            Marginal::DiracGauss { p_zero, nu, tau } => {
                if rng.random::<f64>() < p_zero {
                    0.0
                } else {
                    let z: f64 = rng.sample(StandardNormal);
                    nu + tau * z
                }
            }
        }
    }
}

/// `E[Z^k]` for a standard normal `Z`: `(k-1)!!` for even `k`.
fn gaussian_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    (1..k).step_by(2).map(f64::from).product()
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * f64::from(n - j) / f64::from(j + 1))
}

fn check_finite(what: &'static str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn check_nonempty(what: &'static str, len: usize) -> Result<()> {
    if len == 0 {
        Err(Error::InvalidDimension { what, value: 0 })
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMF {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl GaussianMF {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        check_nonempty("gaussian mean-field", mu.len())?;
        check_len("gaussian sigma", mu.len(), sigma.len())?;
        check_finite("gaussian mean", &mu)?;
        check_finite("gaussian sigma", &sigma)?;
        if sigma.iter().any(|&s| s < 0.0) {
            return Err(Error::Precondition("gaussian sigma must be nonnegative".into()));
        }
        Ok(Self { mu, sigma })
    }

    pub fn standard(d: usize) -> Result<Self> {
        Self::new(vec![0.0; d], vec![1.0; d])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceMF {
    pub loc: Vec<f64>,
    pub scale: Vec<f64>,
}

impl LaplaceMF {
    pub fn new(loc: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        check_nonempty("laplace mean-field", loc.len())?;
        check_len("laplace scale", loc.len(), scale.len())?;
        check_finite("laplace location", &loc)?;
        check_finite("laplace scale", &scale)?;
        if scale.iter().any(|&s| s <= 0.0) {
            return Err(Error::Precondition("laplace scale must be positive".into()));
        }
        Ok(Self { loc, scale })
    }

    pub fn stddev(&self) -> Vec<f64> {
        self.scale.iter().map(|b| b * std::f64::consts::SQRT_2).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiracGaussMF {
    pub p_zero: Vec<f64>,
    pub nu: Vec<f64>,
    pub tau: Vec<f64>,
}

impl DiracGaussMF {
    pub fn new(p_zero: Vec<f64>, nu: Vec<f64>, tau: Vec<f64>) -> Result<Self> {
        check_nonempty("dirac-gauss mean-field", p_zero.len())?;
        check_len("dirac-gauss nu", p_zero.len(), nu.len())?;
        check_len("dirac-gauss tau", p_zero.len(), tau.len())?;
        check_finite("dirac-gauss nu", &nu)?;
        check_finite("dirac-gauss tau", &tau)?;
        if p_zero.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Precondition("p_zero must lie in [0, 1]".into()));
        }
        if tau.iter().any(|&t| t < 0.0) {
            return Err(Error::Precondition("tau must be nonnegative".into()));
        }
        Ok(Self { p_zero, nu, tau })
    }

    /// Mean and standard deviation of each mixture marginal.
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        let mut mu = Vec::with_capacity(self.nu.len());
        let mut sigma = Vec::with_capacity(self.nu.len());
        for i in 0..self.nu.len() {
            let (p, nu, tau) = (self.p_zero[i], self.nu[i], self.tau[i]);
            mu.push((1.0 - p) * nu);
            sigma.push((p * (1.0 - p) * nu * nu + (1.0 - p) * tau * tau).sqrt());
        }
        (mu, sigma)
    }
}

/// A product of independent per-coordinate marginals.
#[derive(Debug, Clone, PartialEq)]
pub enum MeanField {
    Gaussian(GaussianMF),
    Laplace(LaplaceMF),
    DiracGauss(DiracGaussMF),
}

impl MeanField {
    /// Named test distributions replicated over `d` coordinates.
    ///
    /// `gauss` is `N(0, 1)`, `laplace` is `Laplace(0, 1)`, and `spikeslab`
    /// (alias `spikeslab-appendix`) is `0.5 delta_0 + 0.5 N(2, 1)`.
    pub fn preset(name: &str, d: usize) -> Result<Self> {
        match name {
            "gauss" => Ok(MeanField::Gaussian(GaussianMF::standard(d)?)),
            "laplace" => Ok(MeanField::Laplace(LaplaceMF::new(vec![0.0; d], vec![1.0; d])?)),
            "spikeslab" | "spikeslab-appendix" => Ok(MeanField::DiracGauss(DiracGaussMF::new(
                vec![0.5; d],
                vec![2.0; d],
                vec![1.0; d],
            )?)),
            other => Err(Error::config(format!(
                "unknown distribution '{other}' (expected gauss, laplace or spikeslab)"
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MeanField::Gaussian(g) => g.mu.len(),
            MeanField::Laplace(l) => l.loc.len(),
            MeanField::DiracGauss(m) => m.nu.len(),
        }
    }

    pub fn marginal(&self, i: usize) -> Marginal {
        match self {
            MeanField::Gaussian(g) => Marginal::Gaussian {
                mean: g.mu[i],
                stddev: g.sigma[i],
            },
            MeanField::Laplace(l) => Marginal::Laplace {
                loc: l.loc[i],
                scale: l.scale[i],
            },
            MeanField::DiracGauss(m) => Marginal::DiracGauss {
                p_zero: m.p_zero[i],
                nu: m.nu[i],
                tau: m.tau[i],
            },
        }
    }

    pub fn marginals(&self) -> impl Iterator<Item = Marginal> + '_ {
        (0..self.dim()).map(|i| self.marginal(i))
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            MeanField::Gaussian(g) => g.mu.clone(),
            MeanField::Laplace(l) => l.loc.clone(),
            MeanField::DiracGauss(m) => m.moments().0,
        }
    }

    pub fn stddev(&self) -> Vec<f64> {
        match self {
            MeanField::Gaussian(g) => g.sigma.clone(),
            MeanField::Laplace(l) => l.stddev(),
            MeanField::DiracGauss(m) => m.moments().1,
        }
    }

    /// `n` i.i.d. draws, each a full parameter vector.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let marginals: Vec<Marginal> = self.marginals().collect();
        (0..n)
            .map(|_| marginals.iter().map(|m| m.sample(rng)).collect())
            .collect()
    }

    pub fn orthonormal_basis(&self, max_degree: usize) -> Result<OrthonormalBasis> {
        OrthonormalBasis::new(self, max_degree)
    }
}

/// Per-coordinate polynomials orthonormal under each marginal, stored as
/// coefficients in the standardized variable `z = (x - mean) / stddev`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    marginals: Vec<Marginal>,
    means: Vec<f64>,
    stddevs: Vec<f64>,
    /// `coeffs[i][a][j]` multiplies `z^j` in `phi_a` for coordinate `i`.
    coeffs: Vec<Vec<Vec<f64>>>,
}

impl OrthonormalBasis {
    pub fn new(dist: &MeanField, max_degree: usize) -> Result<Self> {
        let marginals: Vec<Marginal> = dist.marginals().collect();
        let mut means = Vec::with_capacity(marginals.len());
        let mut stddevs = Vec::with_capacity(marginals.len());
        let mut coeffs = Vec::with_capacity(marginals.len());
        for (i, m) in marginals.iter().enumerate() {
            let sd = m.stddev();
            if !(sd > 0.0) {
                return Err(Error::DegenerateMarginal {
                    coord: i,
                    reason: format!("standard deviation is {sd}"),
                });
            }
            let moments: Vec<f64> = (0..=2 * max_degree as u32)
                .map(|k| m.standardized_moment(k))
                .collect();
            coeffs.push(gram_schmidt(&moments, max_degree).map_err(|reason| {
                Error::DegenerateMarginal { coord: i, reason }
            })?);
            means.push(m.mean());
            stddevs.push(sd);
        }
        Ok(Self {
            marginals,
            means,
            stddevs,
            coeffs,
        })
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn max_degree(&self) -> usize {
        self.coeffs[0].len() - 1
    }

    /// Coefficients of `phi_degree` for `coord` in powers of the standardized variable.
    pub fn coefficients(&self, coord: usize, degree: usize) -> &[f64] {
        &self.coeffs[coord][degree]
    }

    pub fn eval(&self, coord: usize, degree: usize, x: f64) -> f64 {
        let z = (x - self.means[coord]) / self.stddevs[coord];
        horner(&self.coeffs[coord][degree], z)
    }

    /// Exact `E[prod_a phi_{degrees[a]}(theta_coord)]` for one coordinate.
    pub fn expectation_of_product(&self, coord: usize, degrees: &[usize]) -> f64 {
        let poly = degrees.iter().fold(vec![1.0], |acc, &deg| {
            poly_mul(&acc, &self.coeffs[coord][deg])
        });
        let m = &self.marginals[coord];
        poly.iter()
            .enumerate()
            .map(|(j, c)| c * m.standardized_moment(j as u32))
            .sum()
    }
}

fn horner(c: &[f64], z: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * z + a)
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn inner(a: &[f64], b: &[f64], moments: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            s += x * y * moments[i + j];
        }
    }
    s
}

/// Orthonormalize the monomials `1, z, ..., z^max_degree` under the moment functional.
fn gram_schmidt(moments: &[f64], max_degree: usize) -> std::result::Result<Vec<Vec<f64>>, String> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_degree + 1);
    for deg in 0..=max_degree {
        let mut p = vec![0.0; deg + 1];
        p[deg] = 1.0;
        // two passes of projection removal for stability
        for _ in 0..2 {
            for q in &basis {
                let c = inner(&p, q, moments);
                for (pj, qj) in p.iter_mut().zip(q) {
                    *pj -= c * qj;
                }
            }
        }
        let norm2 = inner(&p, &p, moments);
        if !(norm2 > 1e-12) {
            return Err(format!("Gram matrix is singular at degree {deg} (norm^2 = {norm2:e})"));
        }
        let norm = norm2.sqrt();
        p.iter_mut().for_each(|x| *x /= norm);
        basis.push(p);
    }
    Ok(basis)
}

/// Weighted sum of `f` over the nodes.
pub fn integrate<F: Fn(&[f64]) -> f64>(nodes: &NodeSet, f: F) -> f64 {
    nodes.integrate(f)
}
