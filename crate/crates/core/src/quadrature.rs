//! Quadrature node sets for mean-field distributions.
//!
//! The centerpiece is the cross-polytope vertex sequence in the Hadamard
//! basis: iterate `k` yields a sign vector `S` and the antithetic pair
//! `mu ± S * sigma`. Every pair integrates all univariate quadratics exactly
//! (cubics too when the marginals are symmetric), and aligned windows of
//! `2^b` consecutive pairs integrate the mixed quadratic
//! `(theta_i - mu_i)(theta_j - mu_j)` exactly, where `b` is the 1-based
//! position of the lowest bit in which `i` and `j` differ.
//!
//! Also provided: simplex sigma points, stochastic blocked concatenations of
//! per-block quadratures, and the Monte Carlo / moment-matched baselines.
//!
//! Bit positions are 0-based machine bits internally. Where an API reports a
//! bit position it is converted to the 1-based convention with an explicit
//! `+ 1` (see [`lowest_differing_bit`]).

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::meanfield::MeanField;

/// Weight carried by each node of an antithetic pair.
pub const PAIR_WEIGHT: f64 = 0.5;

/// Default absolute threshold below which an integration error counts as exact.
pub const EXACT_TOL: f64 = 1e-10;

/// Number of bits needed to index `d` coordinates, `ceil(log2 d)`.
///
/// `d = 1` needs zero bits, so every parity is zero.
pub fn index_bits(d: usize) -> u32 {
    if d <= 1 {
        0
    } else {
        usize::BITS - (d - 1).leading_zeros()
    }
}

/// Parity of coordinate `i` at iterate `k`: XOR over bit positions of
/// `bit(i) AND bit(k)`.
///
/// Iterates are reduced modulo `2^index_bits(d)`; higher bits of `k` have no
/// partner bit in any coordinate index `i < d` anyway.
#[inline]
pub fn coordinate_parity(d: usize, i: usize, k: u64) -> bool {
    let mask = (1u64 << index_bits(d)) - 1;
    ((i as u64) & k & mask).count_ones() & 1 == 1
}

/// `+1.0` when the parity is set, `-1.0` otherwise.
#[inline]
pub fn coordinate_sign(d: usize, i: usize, k: u64) -> f64 {
    if coordinate_parity(d, i, k) {
        1.0
    } else {
        -1.0
    }
}

/// A vector of `±1` signs selecting one cross-polytope vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignVector {
    signs: Vec<i8>,
}

impl SignVector {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::InvalidDimension {
                what: "sign vector",
                value: 0,
            });
        }
        if let Some(bad) = signs.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::Precondition(format!(
                "sign entries must be -1 or +1, found {bad}"
            )));
        }
        Ok(Self { signs })
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.signs
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        f64::from(self.signs[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.signs.iter().map(|&s| f64::from(s))
    }
}

/// Signs for iterate `k` of the cross-polytope sequence in `d` dimensions.
pub fn cross_polytope_signs(d: usize, k: u64) -> Result<SignVector> {
    if d == 0 {
        return Err(Error::InvalidDimension {
            what: "cross-polytope sequence",
            value: d,
        });
    }
    let signs = (0..d)
        .map(|i| if coordinate_parity(d, i, k) { 1 } else { -1 })
        .collect();
    Ok(SignVector { signs })
}

/// Two equal-weight nodes placed symmetrically about the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct AntitheticPair {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl AntitheticPair {
    pub fn weight(&self) -> f64 {
        PAIR_WEIGHT
    }

    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        PAIR_WEIGHT * (f(&self.plus) + f(&self.minus))
    }
}

/// `plus = mu + S * sigma`, `minus = mu - S * sigma`.
///
/// A zero `sigma_i` pins both nodes to `mu_i` in that coordinate.
pub fn antithetic_pair(mu: &[f64], sigma: &[f64], s: &SignVector) -> Result<AntitheticPair> {
    check_len("antithetic pair sigma", mu.len(), sigma.len())?;
    check_len("antithetic pair signs", mu.len(), s.len())?;
    if let Some(i) = sigma.iter().position(|&x| !(x >= 0.0)) {
        return Err(Error::Precondition(format!(
            "sigma[{i}] = {} must be nonnegative",
            sigma[i]
        )));
    }
    let offset: Vec<f64> = sigma.iter().zip(s.iter()).map(|(&sd, sg)| sd * sg).collect();
    let plus = mu.iter().zip(&offset).map(|(m, o)| m + o).collect();
    let minus = mu.iter().zip(&offset).map(|(m, o)| m - o).collect();
    Ok(AntitheticPair { plus, minus })
}

/// Relative parity of two coordinates at iterate `k`.
///
/// Depends only on `i1 XOR i2` and `k`; it is `true` exactly when the two
/// signs produced by [`cross_polytope_signs`] differ.
pub fn relative_parity(i1: usize, i2: usize, k: u64) -> Result<bool> {
    if i1 == i2 {
        return Err(Error::InvalidPair(i1));
    }
    let x = (i1 ^ i2) as u64;
    Ok((x & k).count_ones() & 1 == 1)
}

/// 1-based position of the lowest bit in which `i1` and `i2` differ.
pub fn lowest_differing_bit(i1: usize, i2: usize) -> Result<u32> {
    if i1 == i2 {
        return Err(Error::InvalidPair(i1));
    }
    Ok((i1 ^ i2).trailing_zeros() + 1)
}

/// Number of antithetic pairs, `2^b`, after which every aligned window
/// integrates `phi_1(theta_i1) phi_1(theta_i2)` exactly.
pub fn exactness_period(i1: usize, i2: usize) -> Result<u64> {
    Ok(1u64 << lowest_differing_bit(i1, i2)?)
}

/// Evaluation nodes paired with nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl NodeSet {
    pub fn new(nodes: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        check_len("node set weights", nodes.len(), weights.len())?;
        if nodes.is_empty() {
            return Err(Error::InvalidDimension {
                what: "node set",
                value: 0,
            });
        }
        let dim = nodes[0].len();
        for node in &nodes {
            check_len("node set node", dim, node.len())?;
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::Precondition("node weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12f64.max(64.0 * f64::EPSILON * weights.len() as f64) {
            return Err(Error::Precondition(format!(
                "node weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { nodes, weights })
    }

    pub fn equal_weight(nodes: Vec<Vec<f64>>) -> Result<Self> {
        let w = 1.0 / nodes.len().max(1) as f64;
        let weights = vec![w; nodes.len()];
        Self::new(nodes, weights)
    }

    /// Concatenate several node sets, each contributing equally.
    pub fn pooled(sets: &[NodeSet]) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::InvalidDimension {
                what: "pooled node sets",
                value: 0,
            });
        }
        let share = 1.0 / sets.len() as f64;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for set in sets {
            nodes.extend(set.nodes.iter().cloned());
            weights.extend(set.weights.iter().map(|w| w * share));
        }
        Self::new(nodes, weights)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].len()
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(n, &w)| (n.as_slice(), w))
    }

    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.iter().map(|(node, w)| w * f(node)).sum()
    }

    /// Map standardized nodes `x` to `mu + sigma * x`.
    pub fn affine(&self, mu: &[f64], sigma: &[f64]) -> Result<Self> {
        check_len("affine mean", self.dim(), mu.len())?;
        check_len("affine stddev", self.dim(), sigma.len())?;
        let nodes = self
            .nodes
            .iter()
            .map(|x| {
                x.iter()
                    .zip(mu.iter().zip(sigma))
                    .map(|(xi, (m, s))| m + s * xi)
                    .collect()
            })
            .collect();
        Ok(Self {
            nodes,
            weights: self.weights.clone(),
        })
    }
}

impl From<AntitheticPair> for NodeSet {
    fn from(pair: AntitheticPair) -> Self {
        NodeSet {
            nodes: vec![pair.plus, pair.minus],
            weights: vec![PAIR_WEIGHT, PAIR_WEIGHT],
        }
    }
}

/// `2 * n_pairs` nodes from iterates `k1, k1 + 1, ...` of the cross-polytope sequence.
pub fn cross_polytope_nodes(mu: &[f64], sigma: &[f64], k1: u64, n_pairs: usize) -> Result<NodeSet> {
    if n_pairs == 0 {
        return Err(Error::InvalidDimension {
            what: "cross-polytope pair count",
            value: 0,
        });
    }
    let d = mu.len();
    let mut nodes = Vec::with_capacity(2 * n_pairs);
    for k in k1..k1 + n_pairs as u64 {
        let pair = antithetic_pair(mu, sigma, &cross_polytope_signs(d, k)?)?;
        nodes.push(pair.plus);
        nodes.push(pair.minus);
    }
    NodeSet::equal_weight(nodes)
}

/// Disjoint consecutive blocks covering `0..d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::config("block sizes must be positive and nonempty"));
        }
        let offsets = sizes
            .iter()
            .scan(0usize, |acc, &s| {
                let start = *acc;
                *acc += s;
                Some(start)
            })
            .collect();
        Ok(Self { sizes, offsets })
    }

    /// Blocks of `block` coordinates; a shorter trailing block takes the remainder.
    pub fn uniform(d: usize, block: usize) -> Result<Self> {
        if d == 0 || block == 0 {
            return Err(Error::config(format!(
                "cannot partition d={d} into blocks of {block}"
            )));
        }
        let mut sizes = vec![block; d / block];
        if d % block != 0 {
            sizes.push(d % block);
        }
        Self::new(sizes)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn dim(&self) -> usize {
        self.offsets.last().unwrap() + self.sizes.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// Index of the block containing coordinate `i`.
    pub fn block_of(&self, i: usize) -> usize {
        match self.offsets.binary_search(&i) {
            Ok(b) => b,
            Err(b) => b - 1,
        }
    }
}

/// Equal-weight simplex vertices in `n` dimensions with zero mean and
/// identity second moment, `n + 1` nodes of weight `1 / (n + 1)`.
pub fn simplex_sigma_points(n: usize) -> Result<NodeSet> {
    if n == 0 {
        return Err(Error::InvalidDimension {
            what: "simplex sigma points",
            value: 0,
        });
    }
    // x[row][col], rows are coordinates and columns are nodes
    let mut x = vec![vec![0.0; n + 1]; n];
    let mut r = (n as f64).sqrt();
    for i in 1..=n {
        let rem = (n + 1 - i) as f64;
        x[i - 1][i - 1] = r;
        for col in x[i - 1].iter_mut().skip(i) {
            *col = -r / rem;
        }
        r *= (rem * rem - 1.0).sqrt() / rem;
    }
    let nodes = (0..=n).map(|j| x.iter().map(|row| row[j]).collect()).collect();
    NodeSet::equal_weight(nodes)
}

/// Sigma points for a block of `size` coordinates using `m` nodes.
///
/// When `m - 1 > size` the `(m - 1)`-simplex is projected onto its first
/// `size` coordinates, which keeps the zero mean and identity covariance.
fn simplex_block(size: usize, m: usize) -> Result<NodeSet> {
    if m < size + 1 {
        return Err(Error::IncompatibleBlocks(format!(
            "block of {size} coordinates needs at least {} nodes, got {m}",
            size + 1
        )));
    }
    let full = simplex_sigma_points(m - 1)?;
    let nodes = full.nodes().iter().map(|x| x[..size].to_vec()).collect();
    NodeSet::equal_weight(nodes)
}

/// Concatenate per-block equal-weight quadratures after permuting each
/// block's node order independently and uniformly.
pub fn blocked_quadrature<R: Rng + ?Sized>(blocks: &[NodeSet], rng: &mut R) -> Result<NodeSet> {
    let Some(first) = blocks.first() else {
        return Err(Error::IncompatibleBlocks("no blocks supplied".into()));
    };
    let m = first.len();
    for (b, block) in blocks.iter().enumerate() {
        if block.len() != m {
            return Err(Error::IncompatibleBlocks(format!(
                "block {b} has {} nodes, block 0 has {m}",
                block.len()
            )));
        }
        let w = 1.0 / m as f64;
        if block.weights().iter().any(|&bw| (bw - w).abs() > 1e-12) {
            return Err(Error::IncompatibleBlocks(format!(
                "block {b} is not equal-weight"
            )));
        }
    }
    let d: usize = blocks.iter().map(NodeSet::dim).sum();
    let mut nodes = vec![Vec::with_capacity(d); m];
    let mut order: Vec<usize> = (0..m).collect();
    for block in blocks {
        order.shuffle(rng);
        for (node, &src) in nodes.iter_mut().zip(&order) {
            node.extend_from_slice(&block.nodes()[src]);
        }
    }
    NodeSet::equal_weight(nodes)
}

/// One stochastic blocked simplex quadrature in standardized coordinates.
pub fn blocked_simplex<R: Rng + ?Sized>(partition: &BlockPartition, rng: &mut R) -> Result<NodeSet> {
    let m = partition.sizes().iter().max().unwrap() + 1;
    let blocks = partition
        .sizes()
        .iter()
        .map(|&s| simplex_block(s, m))
        .collect::<Result<Vec<_>>>()?;
    blocked_quadrature(&blocks, rng)
}

/// I.i.d. samples with weight `1 / n`.
pub fn mc_nodes<R: Rng + ?Sized>(dist: &MeanField, n: usize, rng: &mut R) -> Result<NodeSet> {
    if n == 0 {
        return Err(Error::InvalidDimension {
            what: "sample count",
            value: 0,
        });
    }
    NodeSet::equal_weight(dist.sample(n, rng))
}

/// Samples translated so their sample mean equals the distribution mean.
pub fn mean_matched_nodes<R: Rng + ?Sized>(dist: &MeanField, n: usize, rng: &mut R) -> Result<NodeSet> {
    let mut samples = mc_nodes(dist, n, rng)?.nodes;
    let mu = dist.mean();
    let mu_hat = sample_mean(&samples);
    for x in &mut samples {
        for ((xi, m), mh) in x.iter_mut().zip(&mu).zip(&mu_hat) {
            *xi += m - mh;
        }
    }
    NodeSet::equal_weight(samples)
}

/// Result of [`moment_matched_nodes`].
#[derive(Debug, Clone)]
pub struct MomentMatched {
    pub nodes: NodeSet,
    /// Coordinates whose sample variance vanished; only their mean was matched.
    pub unscaled: Vec<usize>,
}

/// Samples shifted to the distribution mean and rescaled per coordinate by
/// `sigma / sigma_hat` so the sample variance matches as well.
pub fn moment_matched_nodes<R: Rng + ?Sized>(
    dist: &MeanField,
    n: usize,
    rng: &mut R,
) -> Result<MomentMatched> {
    if n < 2 {
        return Err(Error::InvalidDimension {
            what: "moment-matched sample count",
            value: n,
        });
    }
    let mut samples = mc_nodes(dist, n, rng)?.nodes;
    let mu = dist.mean();
    let sigma = dist.stddev();
    let mu_hat = sample_mean(&samples);
    let d = mu.len();
    let mut var_hat = vec![0.0; d];
    for x in &samples {
        for i in 0..d {
            let c = x[i] - mu_hat[i];
            var_hat[i] += c * c;
        }
    }
    let mut scale = vec![1.0; d];
    let mut unscaled = Vec::new();
    for i in 0..d {
        let sd_hat = (var_hat[i] / n as f64).sqrt();
        if sd_hat <= 1e-14 * (1.0 + mu_hat[i].abs()) {
            unscaled.push(i);
        } else {
            scale[i] = sigma[i] / sd_hat;
        }
    }
    for x in &mut samples {
        for i in 0..d {
            x[i] = (x[i] - mu_hat[i]) * scale[i] + mu[i];
        }
    }
    Ok(MomentMatched {
        nodes: NodeSet::equal_weight(samples)?,
        unscaled,
    })
}

fn sample_mean(samples: &[Vec<f64>]) -> Vec<f64> {
    let d = samples[0].len();
    let mut mean = vec![0.0; d];
    for x in samples {
        for (m, xi) in mean.iter_mut().zip(x) {
            *m += xi;
        }
    }
    let n = samples.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Quadrature families compared by the exact-pair counting experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMethod {
    BlockedSimplex { block: usize },
    CrossPolytope,
}

impl PairMethod {
    /// Evaluations per elementary quadrature of this family.
    pub fn group_size(&self) -> usize {
        match *self {
            PairMethod::BlockedSimplex { block } => block + 1,
            PairMethod::CrossPolytope => 2,
        }
    }
}

/// Standardized nodes (zero mean, unit variance marginals) for one trial of `method`.
fn standard_pair_nodes<R: Rng + ?Sized>(
    d: usize,
    method: PairMethod,
    n_evals: usize,
    rng: &mut R,
) -> Result<NodeSet> {
    let groups = n_evals / method.group_size();
    match method {
        PairMethod::CrossPolytope => {
            // aligned start: a window of w pairs begins at a multiple of w
            let w = groups.next_power_of_two() as u64;
            let period = 1u64 << index_bits(d);
            let slots = (period / w).max(1);
            let k1 = rng.random_range(0..slots) * w;
            cross_polytope_nodes(&vec![0.0; d], &vec![1.0; d], k1, groups)
        }
        PairMethod::BlockedSimplex { block } => {
            let partition = BlockPartition::uniform(d, block)?;
            let sets = (0..groups)
                .map(|_| blocked_simplex(&partition, rng))
                .collect::<Result<Vec<_>>>()?;
            NodeSet::pooled(&sets)
        }
    }
}

/// Number of mixed pairs `i < j` whose integral `E[phi_1(theta_i) phi_1(theta_j)]`
/// (exactly zero) is reproduced to within `tol` by `nodes`, which must be standardized.
pub fn exact_pair_count(nodes: &NodeSet, tol: f64) -> usize {
    let d = nodes.dim();
    // coordinate-major copy, pre-scaled by sqrt-free weights on one side
    let cols: Vec<Vec<f64>> = (0..d)
        .map(|i| nodes.nodes().iter().map(|x| x[i]).collect())
        .collect();
    let weights = nodes.weights();
    (0..d)
        .into_par_iter()
        .map(|i| {
            let wi: Vec<f64> = cols[i].iter().zip(weights).map(|(a, w)| a * w).collect();
            cols[i + 1..]
                .iter()
                .filter(|cj| {
                    let integral: f64 = wi.iter().zip(cj.iter()).map(|(a, b)| a * b).sum();
                    integral.abs() < tol
                })
                .count()
        })
        .sum()
}

/// Mean number of exactly integrated mixed quadratic pairs over `n_trials`
/// trials, trial `t` seeded with `base_seed + t`.
pub fn count_exact_pairs(
    d: usize,
    method: PairMethod,
    n_evals: usize,
    n_trials: usize,
    tol: f64,
    base_seed: u64,
) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidDimension {
            what: "exact-pair count",
            value: d,
        });
    }
    if let PairMethod::BlockedSimplex { block } = method {
        if block == 0 {
            return Err(Error::config("blocked-simplex block size must be positive"));
        }
    }
    let g = method.group_size();
    if n_evals == 0 || n_evals % g != 0 {
        return Err(Error::config(format!(
            "n_evals = {n_evals} is not a positive multiple of {g} for {method:?}"
        )));
    }
    if n_trials == 0 {
        return Err(Error::config("n_trials must be positive"));
    }
    if !(tol > 0.0) {
        return Err(Error::config("tolerance must be positive"));
    }
    let counts = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(base_seed, t as u64);
            standard_pair_nodes(d, method, n_evals, &mut rng).map(|nodes| exact_pair_count(&nodes, tol))
        })
        .collect::<Result<Vec<_>>>()?;
    let total: usize = counts.iter().sum();
    Ok(total as f64 / n_trials as f64)
}

/// Generator for trial `trial` of a run seeded with `base_seed`.
pub fn trial_rng(base_seed: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(trial))
}

/// Random aligned start index as in the training loop: a multiple of
/// `n_pairs` drawn uniformly below `d`.
pub fn random_start<R: RngCore + ?Sized>(d: usize, n_pairs: usize, rng: &mut R) -> u64 {
    let u: f64 = rng.random();
    ((u * d as f64 / n_pairs as f64).floor() as u64) * n_pairs as u64
}
