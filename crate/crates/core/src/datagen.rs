//! Synthetic regression data with AR(1)-correlated gaussian covariates,
//! `Cov(x_j, x_k) = ρ^|j−k|`.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::loss::{logistic, Dataset, Family};

pub const DEFAULT_RHO: f64 = 0.5;

/// True coefficient vector of a simulation.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum BetaRule {
    /// `β_j = 1/j` for `j = 1..p`.
    #[default]
    InverseIndex,
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub family: Family,
    pub beta: BetaRule,
    pub seed: u64,
}

impl SimSpec {
    pub fn new(n: usize, p: usize, family: Family, seed: u64) -> Self {
        SimSpec {
            n,
            p,
            rho: DEFAULT_RHO,
            family,
            beta: BetaRule::InverseIndex,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::InvalidConfig("n and p must be positive".into()));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::InvalidConfig(format!("rho must lie in (-1, 1), got {}", self.rho)));
        }
        if let BetaRule::Custom(b) = &self.beta {
            if b.len() != self.p {
                return Err(Error::InvalidConfig(format!(
                    "custom beta has length {}, expected {}",
                    b.len(),
                    self.p
                )));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig("custom beta must be finite".into()));
            }
        }
        Ok(())
    }
}

/// The coefficient vector `β*` of `spec`.
pub fn true_beta(spec: &SimSpec) -> Array1<f64> {
    match &spec.beta {
        BetaRule::InverseIndex => Array1::from_shape_fn(spec.p, |j| 1.0 / (j + 1) as f64),
        BetaRule::Custom(b) => Array1::from(b.clone()),
    }
}

/// Draws `n` rows `x_1 = z_1`, `x_j = ρ x_{j−1} + √(1−ρ²) z_j` and a
/// response `y = xᵀβ* + ε` (gaussian, `ε ~ N(0, 1)`) or
/// `y ~ Bernoulli(logistic(xᵀβ*))`. The stream is ChaCha20 seeded with
/// `spec.seed`, so equal specs give identical data.
pub fn generate(spec: &SimSpec) -> Result<Dataset> {
    spec.validate()?;
    let (n, p, rho) = (spec.n, spec.p, spec.rho);
    let beta = true_beta(spec);
    let innovation = (1.0 - rho * rho).sqrt();
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut x = Array2::zeros((n, p));
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let mut prev = 0.0;
        let mut eta = 0.0;
        for j in 0..p {
            let z: f64 = rng.sample(StandardNormal);
            let v = if j == 0 { z } else { rho * prev + innovation * z };
            x[[i, j]] = v;
            eta += v * beta[j];
            prev = v;
        }
        y[i] = match spec.family {
            Family::Gaussian => eta + rng.sample::<f64, _>(StandardNormal),
            Family::Binomial => (rng.random::<f64>() < logistic(eta)) as u8 as f64,
        };
    }
    Dataset::new(x, y)
}
