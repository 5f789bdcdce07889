//! Convex loss families with observation weights.
//!
//! Losses are normalized by `1/n`; observation weights are rescaled to sum
//! to `n` when a [`Dataset`] is built, so unit weights reproduce the plain
//! average.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use ndarray::{Array1, Array2, ShapeBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound on the binomial working weight `π(1 − π)`.
pub const WORKING_WEIGHT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[default]
    Gaussian,
    Binomial,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Binomial => "binomial",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Family::Gaussian),
            "binomial" => Ok(Family::Binomial),
            _ => Err(Error::InvalidConfig(format!("unknown family `{s}`"))),
        }
    }
}

/// Design matrix, response and weights.
///
/// The design is stored column-major so that coordinate updates read
/// contiguous columns.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Array2<f64>,
    y: Array1<f64>,
    obs_weights: Array1<f64>,
    pen_weights: Array1<f64>,
    names: Vec<String>,
    col_sq: OnceLock<Vec<f64>>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.x == other.x
            && self.y == other.y
            && self.obs_weights == other.obs_weights
            && self.pen_weights == other.pen_weights
            && self.names == other.names
    }
}

fn all_finite<'a>(mut it: impl Iterator<Item = &'a f64>) -> bool {
    it.all(|v| v.is_finite())
}

impl Dataset {
    /// Builds a dataset with unit observation and penalty weights.
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        let (n, p) = x.dim();
        if n == 0 {
            return Err(Error::InvalidData("the design has no rows".into()));
        }
        if y.len() != n {
            return Err(Error::InvalidData(format!(
                "response has length {} but the design has {n} rows",
                y.len()
            )));
        }
        if !all_finite(x.iter()) {
            return Err(Error::InvalidData("the design has non-finite entries".into()));
        }
        if !all_finite(y.iter()) {
            return Err(Error::InvalidData("the response has non-finite entries".into()));
        }
        let mut xf = Array2::zeros((n, p).f());
        xf.assign(&x);
        Ok(Dataset {
            x: xf,
            y,
            obs_weights: Array1::ones(n),
            pen_weights: Array1::ones(p),
            names: (1..=p).map(|j| format!("x{j}")).collect(),
            col_sq: OnceLock::new(),
        })
    }

    /// Sets observation weights, rescaled to sum to `n`.
    pub fn with_obs_weights(mut self, d: Array1<f64>) -> Result<Self> {
        if d.len() != self.n() {
            return Err(Error::InvalidData(format!(
                "expected {} observation weights, got {}",
                self.n(),
                d.len()
            )));
        }
        if !all_finite(d.iter()) || d.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidData(
                "observation weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = d.sum();
        if total <= 0.0 {
            return Err(Error::InvalidData("observation weights sum to zero".into()));
        }
        let n = self.n() as f64;
        self.obs_weights = if total == n { d } else { d * (n / total) };
        self.col_sq = OnceLock::new();
        Ok(self)
    }

    pub fn with_pen_weights(mut self, w: Array1<f64>) -> Result<Self> {
        if w.len() != self.p() {
            return Err(Error::InvalidData(format!(
                "expected {} penalty weights, got {}",
                self.p(),
                w.len()
            )));
        }
        if !all_finite(w.iter()) || w.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidData(
                "penalty weights must be finite and non-negative".into(),
            ));
        }
        self.pen_weights = w;
        Ok(self)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(Error::InvalidData(format!(
                "expected {} variable names, got {}",
                self.p(),
                names.len()
            )));
        }
        self.names = names;
        Ok(self)
    }

    /// Prepends an unpenalized column of ones named `(intercept)`.
    pub fn with_intercept(self) -> Self {
        let (n, p) = self.x.dim();
        let mut x = Array2::zeros((n, p + 1).f());
        x.column_mut(0).fill(1.0);
        x.slice_mut(ndarray::s![.., 1..]).assign(&self.x);
        let mut w = Array1::zeros(p + 1);
        w.slice_mut(ndarray::s![1..]).assign(&self.pen_weights);
        let mut names = Vec::with_capacity(p + 1);
        names.push("(intercept)".to_string());
        names.extend(self.names);
        Dataset {
            x,
            y: self.y,
            obs_weights: self.obs_weights,
            pen_weights: w,
            names,
            col_sq: OnceLock::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn obs_weights(&self) -> &Array1<f64> {
        &self.obs_weights
    }

    pub fn pen_weights(&self) -> &Array1<f64> {
        &self.pen_weights
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Contiguous view of column `j`.
    pub fn column(&self, j: usize) -> &[f64] {
        let start = j * self.n();
        &self.x.as_slice_memory_order().expect("column-major design")[start..start + self.n()]
    }

    pub(crate) fn y_slice(&self) -> &[f64] {
        self.y.as_slice().expect("contiguous response")
    }

    pub(crate) fn d_slice(&self) -> &[f64] {
        self.obs_weights.as_slice().expect("contiguous weights")
    }

    /// `Σ_i d_i x_ij² / n` for every column, cached.
    pub(crate) fn weighted_col_sq(&self) -> &[f64] {
        self.col_sq.get_or_init(|| {
            let n = self.n() as f64;
            let d = self.d_slice();
            (0..self.p())
                .map(|j| {
                    self.column(j)
                        .iter()
                        .zip(d)
                        .map(|(x, d)| d * x * x)
                        .sum::<f64>()
                        / n
                })
                .collect()
        })
    }

    /// Indices of unpenalized variables (`w_j = 0`).
    pub fn unpenalized(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| self.pen_weights[j] == 0.0).collect()
    }

    /// Checks family-specific response constraints.
    pub fn check_family(&self, family: Family) -> Result<()> {
        if family == Family::Binomial {
            if let Some(i) = self.y.iter().position(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidData(format!(
                    "binomial response must be 0 or 1; observation {} is {}",
                    i + 1,
                    self.y[i]
                )));
            }
        }
        Ok(())
    }

    /// Rows `rows` as a new dataset; observation weights are renormalized.
    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        let x = self.x.select(ndarray::Axis(0), rows);
        let y = self.y.select(ndarray::Axis(0), rows);
        let d = self.obs_weights.select(ndarray::Axis(0), rows);
        Dataset::new(x, y)?
            .with_obs_weights(d)?
            .with_pen_weights(self.pen_weights.clone())?
            .with_names(self.names.clone())
    }

    /// Copy with column `j` multiplied by `factors[j]`.
    pub fn scale_columns(&self, factors: &[f64]) -> Dataset {
        let mut out = self.clone();
        for (mut col, &f) in out.x.columns_mut().into_iter().zip(factors) {
            col.mapv_inplace(|v| v * f);
        }
        out.col_sq = OnceLock::new();
        out
    }
}

#[inline]
pub(crate) fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^η)` without overflow.
#[inline]
pub(crate) fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

/// Unweighted loss of a single observation: squared error for the gaussian
/// family and negative log-likelihood for the binomial family.
#[inline]
pub fn observation_loss(family: Family, y: f64, eta: f64) -> f64 {
    match family {
        Family::Gaussian => (y - eta) * (y - eta),
        Family::Binomial => softplus(eta) - y * eta,
    }
}

/// `Xβ`, skipping zero coefficients.
pub(crate) fn linear_predictor(data: &Dataset, beta: &[f64]) -> Vec<f64> {
    let mut eta = vec![0.0; data.n()];
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            for (e, x) in eta.iter_mut().zip(data.column(j)) {
                *e += b * x;
            }
        }
    }
    eta
}

pub(crate) fn loss_from_eta(family: Family, data: &Dataset, eta: &[f64]) -> f64 {
    let n = data.n() as f64;
    let s: f64 = match family {
        Family::Gaussian => data
            .d_slice()
            .iter()
            .zip(data.y_slice())
            .zip(eta)
            .map(|((d, y), e)| d * (y - e) * (y - e))
            .sum::<f64>()
            * 0.5,
        Family::Binomial => data
            .d_slice()
            .iter()
            .zip(data.y_slice())
            .zip(eta)
            .map(|((d, y), &e)| d * (softplus(e) - y * e))
            .sum(),
    };
    s / n
}

/// Per-observation derivative of the loss with respect to the linear
/// predictor, including the `d_i / n` factor.
pub(crate) fn eta_derivative(family: Family, data: &Dataset, eta: &[f64]) -> Vec<f64> {
    let n = data.n() as f64;
    let d = data.d_slice();
    let y = data.y_slice();
    match family {
        Family::Gaussian => (0..eta.len()).map(|i| d[i] * (eta[i] - y[i]) / n).collect(),
        Family::Binomial => (0..eta.len())
            .map(|i| d[i] * (logistic(eta[i]) - y[i]) / n)
            .collect(),
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn grad_from_eta(family: Family, data: &Dataset, eta: &[f64]) -> Vec<f64> {
    let u = eta_derivative(family, data, eta);
    (0..data.p()).map(|j| dot(data.column(j), &u)).collect()
}

/// `L(β)`: `(1/2n) Σ d_i (y_i − x_iᵀβ)²` or `(1/n) Σ d_i [log(1 + e^{x_iᵀβ}) − y_i x_iᵀβ]`.
pub fn loss_value(family: Family, data: &Dataset, beta: &Array1<f64>) -> f64 {
    let beta = beta.to_vec();
    loss_from_eta(family, data, &linear_predictor(data, &beta))
}

/// Analytic gradient of [`loss_value`].
pub fn loss_grad(family: Family, data: &Dataset, beta: &Array1<f64>) -> Array1<f64> {
    let beta = beta.to_vec();
    Array1::from(grad_from_eta(family, data, &linear_predictor(data, &beta)))
}

/// Second-order model of the loss at an expansion point, in working-response
/// form: `L̃(β) = L(β̃) + ½ Σ v_i (z_i − x_iᵀβ)² − ½ Σ v_i (z_i − x_iᵀβ̃)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadModel {
    /// Per-coordinate curvature `Σ_i v_i x_ij²`.
    pub a: Array1<f64>,
    /// Loss gradient at the expansion point.
    pub b: Array1<f64>,
    pub expansion_point: Array1<f64>,
    /// Working weights.
    pub v: Array1<f64>,
    /// Working response.
    pub z: Array1<f64>,
}

impl QuadModel {
    /// Value of the quadratic model at `beta`.
    pub fn value(&self, family: Family, data: &Dataset, beta: &Array1<f64>) -> f64 {
        let eta0 = linear_predictor(data, self.expansion_point.as_slice().unwrap());
        let eta = linear_predictor(data, &beta.to_vec());
        let half_sq = |eta: &[f64]| -> f64 {
            self.v
                .iter()
                .zip(&self.z)
                .zip(eta)
                .map(|((v, z), e)| v * (z - e) * (z - e))
                .sum::<f64>()
                * 0.5
        };
        loss_from_eta(family, data, &eta0) + half_sq(&eta) - half_sq(&eta0)
    }
}

/// Working weights `v` and working response `z` at linear predictor `eta`.
pub(crate) fn working_response(family: Family, data: &Dataset, eta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = data.n() as f64;
    let d = data.d_slice();
    let y = data.y_slice();
    match family {
        Family::Gaussian => (d.iter().map(|d| d / n).collect(), y.to_vec()),
        Family::Binomial => {
            let mut v = Vec::with_capacity(eta.len());
            let mut z = Vec::with_capacity(eta.len());
            for i in 0..eta.len() {
                let pi = logistic(eta[i]);
                let w = (pi * (1.0 - pi)).max(WORKING_WEIGHT_FLOOR);
                v.push(d[i] * w / n);
                z.push(eta[i] + (y[i] - pi) / w);
            }
            (v, z)
        }
    }
}

/// Quadratic approximation of the loss at `beta_tilde`.
///
/// The binomial working weight is floored at [`WORKING_WEIGHT_FLOOR`] in
/// both `v` and `z`, so the model gradient always equals the loss gradient.
pub fn quad_approx(family: Family, data: &Dataset, beta_tilde: &Array1<f64>) -> QuadModel {
    let bt = beta_tilde.to_vec();
    let eta = linear_predictor(data, &bt);
    let (v, z) = working_response(family, data, &eta);
    let a: Vec<f64> = (0..data.p())
        .map(|j| data.column(j).iter().zip(&v).map(|(x, v)| v * x * x).sum())
        .collect();
    let b = grad_from_eta(family, data, &eta);
    QuadModel {
        a: Array1::from(a),
        b: Array1::from(b),
        expansion_point: beta_tilde.clone(),
        v: Array1::from(v),
        z: Array1::from(z),
    }
}
