//! Fixed-λ minimization.
//!
//! Three nested loops:
//!
//! 1. [`cccp_minimize`] linearizes the concave part of the penalty at the
//!    current iterate and minimizes the resulting convex upper bound `U`.
//! 2. [`mlqa_minimize`] minimizes `U` by repeatedly replacing the loss with
//!    its quadratic model, solving that model, and backtracking along the
//!    segment towards the model minimizer until `U` decreases.
//! 3. [`cd_subproblem`] solves each quadratic model (plus the linear tilt,
//!    weighted L1 and ridge terms) by cyclic coordinate descent.
//!
//! All loops work on a restricted coordinate set; coordinates outside it stay
//! at their initial values.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::loss::{self, Dataset, Family, QuadModel};
use crate::penalty::PenaltySpec;

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_INNER_TOL: f64 = 1e-7;
pub const DEFAULT_OUTER_TOL: f64 = 1e-7;
pub const DEFAULT_CD_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_INNER_ITER: usize = 100;
pub const DEFAULT_MAX_OUTER_ITER: usize = 100;
pub const DEFAULT_MAX_CD_ITER: usize = 1000;

/// Sufficient-decrease constant of the line search.
const ARMIJO_C: f64 = 1e-4;
/// Smallest step tried by the line search, `2^-20`.
const MIN_STEP: f64 = 1.0 / 1_048_576.0;
/// Relative tolerance for surrogate values that differ only by rounding.
const ROUNDING_SLACK: f64 = 4.0 * f64::EPSILON;
/// Mean binomial loss below which the fit is treated as separated: every
/// observation is predicted with probability near one.
pub const SATURATED_LOSS: f64 = 1e-3;
/// Linear predictor beyond which a fitted probability rounds to exactly 0
/// or 1, `−ln(ε/2)`.
pub const SATURATED_ETA: f64 = 36.736_800_569_677_1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Mix between the penalty (`alpha = 1`) and the ridge term (`alpha = 0`).
    pub alpha: f64,
    pub inner_tol: f64,
    pub outer_tol: f64,
    pub cd_tol: f64,
    pub max_inner_iter: usize,
    pub max_outer_iter: usize,
    pub max_cd_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha: DEFAULT_ALPHA,
            inner_tol: DEFAULT_INNER_TOL,
            outer_tol: DEFAULT_OUTER_TOL,
            cd_tol: DEFAULT_CD_TOL,
            max_inner_iter: DEFAULT_MAX_INNER_ITER,
            max_outer_iter: DEFAULT_MAX_OUTER_ITER,
            max_cd_iter: DEFAULT_MAX_CD_ITER,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        for (name, tol) in [
            ("inner_tol", self.inner_tol),
            ("outer_tol", self.outer_tol),
            ("cd_tol", self.cd_tol),
        ] {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.max_inner_iter == 0 || self.max_outer_iter == 0 || self.max_cd_iter == 0 {
            return Err(Error::InvalidConfig("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

/// Result of a fixed-λ fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitState {
    pub beta: Array1<f64>,
    /// Support of `beta`.
    pub active: Vec<usize>,
    /// Objective `Q_λ(beta)`.
    pub objective: f64,
    pub converged: bool,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub cd_sweeps: usize,
    /// `Q_λ` at the initial point followed by its value after every CCCP step.
    pub objective_trace: Vec<f64>,
    /// Surrogate values recorded by each MLQA run, one vector per CCCP step.
    pub surrogate_traces: Vec<Vec<f64>>,
    /// Coordinates skipped because their subproblem was flat.
    pub degenerate: Vec<usize>,
    /// Set when a line search could not decrease the surrogate.
    pub non_improving: bool,
    /// Set when a binomial fit separated the data, fully or in part, and was
    /// stopped early.
    pub saturated: bool,
}

/// Per-coordinate weights of the convex part: the L1 threshold `α w_j κ`
/// and the quadratic coefficient `(1 − α) λ w_j + α w_j c / 2`.
pub(crate) fn convex_terms(pen: &PenaltySpec, data: &Dataset, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let kappa = pen.kappa();
    let ridge = (1.0 - alpha) * pen.lambda() + 0.5 * alpha * pen.convex_curvature();
    data.pen_weights()
        .iter()
        .map(|&w| (alpha * w * kappa, w * ridge))
        .unzip()
}

/// Linearization slopes `α w_j ∂D(β_j)` of the concave part.
pub(crate) fn tilt_at(pen: &PenaltySpec, data: &Dataset, alpha: f64, beta: &[f64]) -> Vec<f64> {
    data.pen_weights()
        .iter()
        .zip(beta)
        .map(|(&w, &b)| if w == 0.0 { 0.0 } else { alpha * w * pen.d_subgrad(b) })
        .collect()
}

pub(crate) fn penalty_sum(pen: &PenaltySpec, data: &Dataset, alpha: f64, beta: &[f64]) -> f64 {
    let ridge = (1.0 - alpha) * pen.lambda();
    data.pen_weights()
        .iter()
        .zip(beta)
        .filter(|(&w, &b)| w != 0.0 && b != 0.0)
        .map(|(&w, &b)| w * (alpha * pen.value(b.abs()) + ridge * b * b))
        .sum()
}

pub(crate) fn objective_from_eta(
    family: Family,
    pen: &PenaltySpec,
    data: &Dataset,
    alpha: f64,
    eta: &[f64],
    beta: &[f64],
) -> f64 {
    loss::loss_from_eta(family, data, eta) + penalty_sum(pen, data, alpha, beta)
}

/// `Q_λ(β) = L(β) + α Σ w_j J_λ(|β_j|) + (1 − α) λ Σ w_j β_j²`.
pub fn objective_q(
    family: Family,
    pen: &PenaltySpec,
    data: &Dataset,
    config: &SolverConfig,
    beta: &Array1<f64>,
) -> f64 {
    let b = beta.to_vec();
    let eta = loss::linear_predictor(data, &b);
    objective_from_eta(family, pen, data, config.alpha, &eta, &b)
}

/// Non-loss part of the surrogate: tilt, weighted L1 and quadratic terms.
struct SurrogateTerms {
    tilt: Vec<f64>,
    kappa_w: Vec<f64>,
    ridge: Vec<f64>,
}

impl SurrogateTerms {
    fn value(&self, beta: &[f64]) -> f64 {
        let mut s = 0.0;
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                s += self.tilt[j] * b + self.kappa_w[j] * b.abs() + self.ridge[j] * b * b;
            }
        }
        s
    }
}

#[inline]
fn soft_threshold(x: f64, c: f64) -> f64 {
    if x > c {
        x - c
    } else if x < -c {
        x + c
    } else {
        0.0
    }
}

struct CdRun {
    sweeps: usize,
    converged: bool,
}

/// Cyclic coordinate descent on `½ Σ v_i r_i² + Σ tilt_j β_j + Σ k_j |β_j| + Σ ridge_j β_j²`
/// where `r = z − Xβ` is kept up to date in place.
#[allow(clippy::too_many_arguments)]
fn cd_core(
    data: &Dataset,
    v: &[f64],
    a: &[f64],
    r: &mut [f64],
    beta: &mut [f64],
    terms: &SurrogateTerms,
    coords: &[usize],
    tol: f64,
    max_sweeps: usize,
    degenerate: &mut Vec<usize>,
) -> CdRun {
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for &j in coords {
            let denom = a[j] + 2.0 * terms.ridge[j];
            if denom <= 0.0 {
                if !degenerate.contains(&j) {
                    degenerate.push(j);
                }
                continue;
            }
            let col = data.column(j);
            let corr: f64 = col
                .iter()
                .zip(v)
                .zip(r.iter())
                .map(|((x, v), r)| x * v * r)
                .sum();
            let old = beta[j];
            let rho = corr + a[j] * old - terms.tilt[j];
            let new = soft_threshold(rho, terms.kappa_w[j]) / denom;
            if new != old {
                let delta = new - old;
                for (ri, x) in r.iter_mut().zip(col) {
                    *ri -= delta * x;
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < tol {
            return CdRun {
                sweeps,
                converged: true,
            };
        }
    }
    CdRun {
        sweeps,
        converged: false,
    }
}

/// Outcome of [`cd_subproblem`].
#[derive(Debug, Clone, PartialEq)]
pub struct CdOutcome {
    pub beta: Array1<f64>,
    pub sweeps: usize,
    pub converged: bool,
    pub degenerate: Vec<usize>,
}

/// Minimizes `L̃(β) + Σ tilt_j β_j + Σ kappa_weights_j |β_j| + Σ ridge_j β_j²`
/// over the coordinates in `restrict`, the others frozen at `beta0`.
#[allow(clippy::too_many_arguments)]
pub fn cd_subproblem(
    data: &Dataset,
    quad: &QuadModel,
    tilt: &[f64],
    kappa_weights: &[f64],
    ridge: &[f64],
    beta0: &Array1<f64>,
    restrict: &[usize],
    tol: f64,
    max_sweeps: usize,
) -> CdOutcome {
    let mut beta = beta0.to_vec();
    let eta = loss::linear_predictor(data, &beta);
    let mut r: Vec<f64> = quad.z.iter().zip(&eta).map(|(z, e)| z - e).collect();
    let terms = SurrogateTerms {
        tilt: tilt.to_vec(),
        kappa_w: kappa_weights.to_vec(),
        ridge: ridge.to_vec(),
    };
    let mut degenerate = Vec::new();
    let run = cd_core(
        data,
        quad.v.as_slice().unwrap(),
        quad.a.as_slice().unwrap(),
        &mut r,
        &mut beta,
        &terms,
        restrict,
        tol,
        max_sweeps,
        &mut degenerate,
    );
    CdOutcome {
        beta: Array1::from(beta),
        sweeps: run.sweeps,
        converged: run.converged,
        degenerate,
    }
}

/// Outcome of [`mlqa_minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlqaOutcome {
    pub beta: Array1<f64>,
    /// Surrogate value `U` at `beta`.
    pub surrogate: f64,
    pub iterations: usize,
    pub cd_sweeps: usize,
    pub converged: bool,
    pub non_improving: bool,
    pub saturated: bool,
    /// `U` at the start and after every accepted update.
    pub trace: Vec<f64>,
    pub degenerate: Vec<usize>,
}

struct Inner {
    beta: Vec<f64>,
    surrogate: f64,
    iterations: usize,
    cd_sweeps: usize,
    converged: bool,
    non_improving: bool,
    saturated: bool,
    trace: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn mlqa_core(
    family: Family,
    data: &Dataset,
    config: &SolverConfig,
    terms: &SurrogateTerms,
    mut beta: Vec<f64>,
    mut eta: Vec<f64>,
    restrict: &[usize],
    degenerate: &mut Vec<usize>,
) -> Inner {
    let mut u_cur = loss::loss_from_eta(family, data, &eta) + terms.value(&beta);
    let mut trace = vec![u_cur];
    let mut a = vec![0.0; data.p()];
    let mut cd_sweeps = 0;
    let mut iterations = 0;
    let mut converged = false;
    let mut non_improving = false;
    let mut saturated = false;

    while iterations < config.max_inner_iter {
        iterations += 1;
        let (v, z) = loss::working_response(family, data, &eta);
        match family {
            Family::Gaussian => {
                let cs = data.weighted_col_sq();
                for &j in restrict {
                    a[j] = cs[j];
                }
            }
            Family::Binomial => {
                for &j in restrict {
                    a[j] = data.column(j).iter().zip(&v).map(|(x, v)| v * x * x).sum();
                }
            }
        }
        let mut r: Vec<f64> = z.iter().zip(&eta).map(|(z, e)| z - e).collect();
        let model_cur = 0.5 * r.iter().zip(&v).map(|(r, v)| v * r * r).sum::<f64>();
        let pen_cur = terms.value(&beta);

        let mut beta_a = beta.clone();
        let run = cd_core(
            data,
            &v,
            &a,
            &mut r,
            &mut beta_a,
            terms,
            restrict,
            config.cd_tol,
            config.max_cd_iter,
            degenerate,
        );
        cd_sweeps += run.sweeps;
        let model_a = 0.5 * r.iter().zip(&v).map(|(r, v)| v * r * r).sum::<f64>();
        // predicted decrease Ũ(β) − Ũ(β^a); non-negative because CD starts at β
        let gap = (model_cur + pen_cur) - (model_a + terms.value(&beta_a));
        let step = beta.iter().zip(&beta_a).map(|(b, ba)| (b - ba).abs()).fold(0.0, f64::max);
        if step == 0.0 {
            converged = true;
            break;
        }
        // near the minimizer both the gap and the change in U are at rounding level
        let slack = ROUNDING_SLACK * u_cur.abs().max(1.0);
        let eta_a: Vec<f64> = z.iter().zip(&r).map(|(z, r)| z - r).collect();

        let mut h = 1.0;
        let accepted = loop {
            let (b_h, e_h) = if h == 1.0 {
                (beta_a.clone(), eta_a.clone())
            } else {
                (
                    beta.iter().zip(&beta_a).map(|(b, ba)| b + h * (ba - b)).collect::<Vec<_>>(),
                    eta.iter().zip(&eta_a).map(|(e, ea)| e + h * (ea - e)).collect::<Vec<_>>(),
                )
            };
            let l_h = loss::loss_from_eta(family, data, &e_h);
            let u_h = l_h + terms.value(&b_h);
            if u_h <= u_cur - ARMIJO_C * h * gap + slack {
                break Some((b_h, e_h, l_h, u_h, h));
            }
            h *= 0.5;
            if h < MIN_STEP {
                break None;
            }
        };
        let Some((b_h, e_h, l_h, u_h, h)) = accepted else {
            non_improving = true;
            break;
        };
        beta = b_h;
        eta = e_h;
        u_cur = u_h;
        trace.push(u_cur);
        if family == Family::Binomial && (l_h < SATURATED_LOSS || eta.iter().any(|e| e.abs() > SATURATED_ETA)) {
            saturated = true;
            break;
        }
        // the gaussian model is exact, so a full step lands on the minimizer
        if family == Family::Gaussian && h == 1.0 && run.converged {
            converged = true;
            break;
        }
        let scale = 1.0 + beta.iter().map(|b| b.abs()).fold(0.0, f64::max);
        if h * step <= config.inner_tol * scale {
            converged = true;
            break;
        }
    }
    Inner {
        beta,
        surrogate: u_cur,
        iterations,
        cd_sweeps,
        converged,
        non_improving,
        saturated,
        trace,
    }
}

/// Minimizes the convex surrogate
/// `U(β) = L(β) + Σ tilt_j β_j + Σ α w_j κ |β_j| + Σ ridge_j β_j²`
/// by modified local quadratic approximation over `restrict`.
pub fn mlqa_minimize(
    family: Family,
    pen: &PenaltySpec,
    data: &Dataset,
    config: &SolverConfig,
    tilt: &[f64],
    beta_init: &Array1<f64>,
    restrict: &[usize],
) -> MlqaOutcome {
    let (kappa_w, ridge) = convex_terms(pen, data, config.alpha);
    let terms = SurrogateTerms {
        tilt: tilt.to_vec(),
        kappa_w,
        ridge,
    };
    let beta = beta_init.to_vec();
    let eta = loss::linear_predictor(data, &beta);
    let mut degenerate = Vec::new();
    let out = mlqa_core(family, data, config, &terms, beta, eta, restrict, &mut degenerate);
    MlqaOutcome {
        beta: Array1::from(out.beta),
        surrogate: out.surrogate,
        iterations: out.iterations,
        cd_sweeps: out.cd_sweeps,
        converged: out.converged,
        non_improving: out.non_improving,
        saturated: out.saturated,
        trace: out.trace,
        degenerate,
    }
}

pub(crate) fn support(beta: &[f64]) -> Vec<usize> {
    beta.iter()
        .enumerate()
        .filter(|(_, b)| **b != 0.0)
        .map(|(j, _)| j)
        .collect()
}

/// Momentum point `β + (k − 1)/(k + 2)·(β − β_prev)` and its linear
/// predictor, or `None` when it would not move.
fn extrapolate(
    beta: &[f64],
    prev: &[f64],
    eta: &[f64],
    prev_eta: &[f64],
    age: usize,
) -> Option<(Vec<f64>, Vec<f64>)> {
    if age < 2 || beta == prev {
        return None;
    }
    let m = (age - 1) as f64 / (age + 2) as f64;
    let z = beta.iter().zip(prev).map(|(b, p)| b + m * (b - p)).collect();
    let ez = eta.iter().zip(prev_eta).map(|(e, p)| e + m * (e - p)).collect();
    Some((z, ez))
}

/// Convex-concave procedure: repeatedly linearize the concave part of the
/// penalty at the current iterate and minimize the convex upper bound.
pub fn cccp_minimize(
    family: Family,
    pen: &PenaltySpec,
    data: &Dataset,
    config: &SolverConfig,
    beta_init: &Array1<f64>,
    restrict: &[usize],
) -> FitState {
    let alpha = config.alpha;
    let (kappa_w, ridge) = convex_terms(pen, data, alpha);
    let mut terms = SurrogateTerms {
        tilt: vec![0.0; data.p()],
        kappa_w,
        ridge,
    };
    let mut beta = beta_init.to_vec();
    let mut eta = loss::linear_predictor(data, &beta);
    let mut q = objective_from_eta(family, pen, data, alpha, &eta, &beta);
    let mut objective_trace = vec![q];
    let mut prev_beta = beta.clone();
    let mut prev_eta = eta.clone();
    let mut momentum_age = 0usize;
    let mut surrogate_traces = Vec::new();
    let mut degenerate = Vec::new();
    let mut converged = false;
    let mut non_improving = false;
    let mut saturated = false;
    let mut outer = 0;
    let mut inner_total = 0;
    let mut sweeps_total = 0;

    while outer < config.max_outer_iter {
        outer += 1;
        // Linearize at an extrapolated point when that does not raise Q. The
        // surrogate is tight there, so the step still cannot increase Q.
        let (base, base_eta) = match extrapolate(&beta, &prev_beta, &eta, &prev_eta, momentum_age) {
            Some((z, ez)) if objective_from_eta(family, pen, data, alpha, &ez, &z) <= q => {
                momentum_age += 1;
                (z, ez)
            }
            _ => {
                momentum_age = 2;
                (beta.clone(), eta.clone())
            }
        };
        terms.tilt = tilt_at(pen, data, alpha, &base);
        let inner = mlqa_core(
            family,
            data,
            config,
            &terms,
            base,
            base_eta,
            restrict,
            &mut degenerate,
        );
        inner_total += inner.iterations;
        sweeps_total += inner.cd_sweeps;
        non_improving |= inner.non_improving;
        surrogate_traces.push(inner.trace);
        let saturated_step = inner.saturated;

        let max_change = beta
            .iter()
            .zip(&inner.beta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let max_abs = inner.beta.iter().map(|b| b.abs()).fold(0.0, f64::max);
        prev_beta = std::mem::replace(&mut beta, inner.beta);
        // refresh the linear predictor so rounding does not accumulate
        prev_eta = std::mem::replace(&mut eta, loss::linear_predictor(data, &beta));
        let q_new = objective_from_eta(family, pen, data, alpha, &eta, &beta);
        objective_trace.push(q_new);
        let q_change = (q - q_new).abs();
        q = q_new;

        if saturated_step {
            saturated = true;
            break;
        }
        if pen.is_convex() {
            converged = inner.converged;
            break;
        }
        if max_change <= config.outer_tol * (1.0 + max_abs)
            && q_change <= config.outer_tol * q.abs().max(1.0)
        {
            converged = inner.converged || max_change == 0.0;
            break;
        }
    }
    degenerate.sort_unstable();
    FitState {
        active: support(&beta),
        beta: Array1::from(beta),
        objective: q,
        converged,
        outer_iterations: outer,
        inner_iterations: inner_total,
        cd_sweeps: sweeps_total,
        objective_trace,
        surrogate_traces,
        degenerate,
        non_improving,
        saturated,
    }
}
