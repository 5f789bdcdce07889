//! Solution paths over a decreasing λ grid.
//!
//! Each grid point is fitted by [`fit_fixed_lambda`], which runs the CCCP
//! solver on a small working set and grows it with the worst KKT violators
//! until no inactive coordinate violates the optimality conditions.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{self, Dataset, Family};
use crate::penalty::{Penalty, PenaltySpec};
use crate::solver::{self, cccp_minimize, FitState, SolverConfig};

pub const DEFAULT_N_LAMBDA: usize = 100;
pub const DEFAULT_LAMBDA_RATIO: f64 = 0.01;
/// Default `λ_min / λ_max` for logistic models with more penalized
/// variables than observations, where small λ drives coefficients to infinity.
pub const DEFAULT_LAMBDA_RATIO_WIDE_BINOMIAL: f64 = 0.05;
pub const DEFAULT_VIOLATOR_BATCH: usize = 10;
pub const DEFAULT_KKT_TOL: f64 = 1e-6;
pub const DEFAULT_STANDARDIZE: bool = true;
/// Lower bound on `alpha` when inverting the origin slope for `λ_max`; with
/// a pure ridge penalty the zero vector is never a solution.
pub const MIN_GRID_ALPHA: f64 = 1e-3;

/// Decreasing, positive λ values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    values: Vec<f64>,
}

impl LambdaGrid {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidConfig("lambda grid is empty".into()));
        }
        if values.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidConfig("lambda values must be positive and finite".into()));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidConfig("lambda values must be strictly decreasing".into()));
        }
        Ok(LambdaGrid { values })
    }

    /// `n` log-equispaced values from `lambda_max` down to `ratio·lambda_max`.
    pub fn log_spaced(lambda_max: f64, ratio: f64, n: usize) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidConfig(format!("lambda ratio must lie in (0, 1), got {ratio}")));
        }
        if n < 2 {
            return Err(Error::InvalidConfig("at least two lambda values are required".into()));
        }
        let step = ratio.ln() / (n - 1) as f64;
        let mut values: Vec<f64> = (0..n).map(|k| lambda_max * (step * k as f64).exp()).collect();
        values[0] = lambda_max;
        values[n - 1] = lambda_max * ratio;
        Self::from_values(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lambda_max(&self) -> f64 {
        self.values[0]
    }

    pub fn lambda_min(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `λ_min / λ_max`.
    pub fn ratio(&self) -> f64 {
        self.lambda_min() / self.lambda_max()
    }
}

/// How each grid point's solver is initialized.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialPolicy {
    /// Start from the solution at the previous (larger) λ.
    #[default]
    WarmStart,
    /// Start every grid point from the same vector, given on the original
    /// scale of the covariates.
    GlobalInitial(Array1<f64>),
}

impl InitialPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            InitialPolicy::WarmStart => "warm",
            InitialPolicy::GlobalInitial(_) => "global",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub family: Family,
    /// Scale columns to unit mean square before fitting.
    pub standardize: bool,
    pub initial: InitialPolicy,
    /// Number of KKT violators moved into the working set per expansion.
    pub violator_batch: usize,
    pub kkt_tol: f64,
    pub n_lambda: usize,
    /// `λ_min / λ_max`; `None` selects [`default_lambda_ratio`].
    pub lambda_ratio: Option<f64>,
    /// Explicit grid overriding `n_lambda` and `lambda_ratio`.
    pub lambda_values: Option<Vec<f64>>,
    pub solver: SolverConfig,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            family: Family::Gaussian,
            standardize: DEFAULT_STANDARDIZE,
            initial: InitialPolicy::WarmStart,
            violator_batch: DEFAULT_VIOLATOR_BATCH,
            kkt_tol: DEFAULT_KKT_TOL,
            n_lambda: DEFAULT_N_LAMBDA,
            lambda_ratio: None,
            lambda_values: None,
            solver: SolverConfig::default(),
        }
    }
}

impl ProblemConfig {
    pub fn validate(&self, data: &Dataset) -> Result<()> {
        self.solver.validate()?;
        data.check_family(self.family)?;
        if self.violator_batch == 0 {
            return Err(Error::InvalidConfig("violator batch must be positive".into()));
        }
        if !(self.kkt_tol > 0.0) {
            return Err(Error::InvalidConfig("kkt tolerance must be positive".into()));
        }
        if let InitialPolicy::GlobalInitial(b) = &self.initial {
            if b.len() != data.p() {
                return Err(Error::InvalidConfig(format!(
                    "global initial has length {}, expected {}",
                    b.len(),
                    data.p()
                )));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig("global initial must be finite".into()));
            }
        }
        if let Some(v) = &self.lambda_values {
            LambdaGrid::from_values(v.clone())?;
        } else {
            if self.n_lambda < 2 {
                return Err(Error::InvalidConfig("at least two lambda values are required".into()));
            }
            if let Some(r) = self.lambda_ratio {
                if !(r > 0.0 && r < 1.0) {
                    return Err(Error::InvalidConfig(format!("lambda ratio must lie in (0, 1), got {r}")));
                }
            }
        }
        Ok(())
    }
}

/// `0.05` for logistic models with more penalized variables than
/// observations, `0.01` otherwise.
pub fn default_lambda_ratio(family: Family, data: &Dataset) -> f64 {
    let penalized = data.p() - data.unpenalized().len();
    if family == Family::Binomial && penalized > data.n() {
        DEFAULT_LAMBDA_RATIO_WIDE_BINOMIAL
    } else {
        DEFAULT_LAMBDA_RATIO
    }
}

/// Columns scaled to unit mean square.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub data: Dataset,
    /// Mean squares `s_j = Σ_i x_ij² / n`, with 1 for all-zero columns.
    pub scale: Vec<f64>,
    /// All-zero columns, left unscaled.
    pub zero_columns: Vec<usize>,
}

/// Divides column `j` by `√s_j`, `s_j = Σ_i x_ij² / n`.
pub fn standardize_columns(data: &Dataset) -> Standardized {
    let n = data.n() as f64;
    let mut zero_columns = Vec::new();
    let scale: Vec<f64> = (0..data.p())
        .map(|j| {
            let s = data.column(j).iter().map(|v| v * v).sum::<f64>() / n;
            if s > 0.0 {
                s
            } else {
                zero_columns.push(j);
                1.0
            }
        })
        .collect();
    let factors: Vec<f64> = scale.iter().map(|s| 1.0 / s.sqrt()).collect();
    Standardized {
        data: data.scale_columns(&factors),
        scale,
        zero_columns,
    }
}

/// KKT diagnostics of a candidate solution.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub max_violation: f64,
    /// Coordinates whose violation exceeds the tolerance, worst first.
    pub violators: Vec<usize>,
}

/// First-order optimality check. For `β_j ≠ 0` the violation is the
/// magnitude of the partial derivative of `Q_λ`; for `β_j = 0` it is the
/// amount by which `|∂L/∂β_j|` exceeds the subgradient bound `α w_j κ`.
pub fn kkt_check(
    family: Family,
    pen: &PenaltySpec,
    data: &Dataset,
    config: &SolverConfig,
    beta: &Array1<f64>,
    tol: f64,
) -> KktReport {
    let b = beta.to_vec();
    let eta = loss::linear_predictor(data, &b);
    let g = loss::grad_from_eta(family, data, &eta);
    let violations = kkt_violations(pen, data, config.alpha, &b, &g);
    let max_violation = violations.iter().copied().fold(0.0, f64::max);
    let mut violators: Vec<usize> = (0..b.len()).filter(|&j| violations[j] > tol).collect();
    violators.sort_by(|&i, &j| violations[j].total_cmp(&violations[i]).then(i.cmp(&j)));
    KktReport {
        max_violation,
        violators,
    }
}

fn kkt_violations(pen: &PenaltySpec, data: &Dataset, alpha: f64, beta: &[f64], g: &[f64]) -> Vec<f64> {
    let ridge = 2.0 * (1.0 - alpha) * pen.lambda();
    let kappa = pen.kappa();
    data.pen_weights()
        .iter()
        .zip(beta)
        .zip(g)
        .map(|((&w, &b), &gj)| {
            if b != 0.0 {
                let pen_part = if w == 0.0 {
                    0.0
                } else {
                    w * (alpha * b.signum() * pen.grad(b.abs()) + ridge * b)
                };
                (gj + pen_part).abs()
            } else {
                (gj.abs() - alpha * w * kappa).max(0.0)
            }
        })
        .collect()
}

/// A fixed-λ fit produced by the working-set loop.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFit {
    /// State of the final CCCP run.
    pub state: FitState,
    pub kkt: KktReport,
    /// Number of times the working set was enlarged.
    pub expansions: usize,
    /// Final working set.
    pub working_set: Vec<usize>,
    /// CCCP converged and the KKT conditions hold at `kkt_tol`.
    pub converged: bool,
}

fn union_sorted(mut a: Vec<usize>, b: &[usize]) -> Vec<usize> {
    a.extend_from_slice(b);
    a.sort_unstable();
    a.dedup();
    a
}

/// Working-set solve at one λ: start from the support of `beta_init` plus
/// the unpenalized coordinates, then repeatedly add up to `violator_batch`
/// of the worst KKT violators outside the set and re-solve.
///
/// Sets that are still growing are solved at the square roots of the
/// solver tolerances; only a set with no outside violators is solved to
/// full precision, and it is checked again afterwards.
pub fn fit_fixed_lambda(
    pen: &PenaltySpec,
    data: &Dataset,
    config: &ProblemConfig,
    beta_init: &Array1<f64>,
) -> PointFit {
    let family = config.family;
    let tight = config.solver;
    let loose = SolverConfig {
        inner_tol: tight.inner_tol.sqrt().max(tight.inner_tol),
        outer_tol: tight.outer_tol.sqrt().max(tight.outer_tol),
        cd_tol: tight.cd_tol.sqrt().max(tight.cd_tol),
        ..tight
    };
    let mut working = union_sorted(solver::support(beta_init.as_slice().unwrap()), &data.unpenalized());
    let mut init = beta_init.clone();
    let mut expansions = 0;
    let mut precise = false;
    loop {
        let solver = if precise { &tight } else { &loose };
        let state = cccp_minimize(family, pen, data, solver, &init, &working);
        let kkt = kkt_check(family, pen, data, &tight, &state.beta, config.kkt_tol);
        let added: Vec<usize> = kkt
            .violators
            .iter()
            .copied()
            .filter(|j| working.binary_search(j).is_err())
            .take(config.violator_batch)
            .collect();
        if added.is_empty() || working.len() == data.p() {
            if !precise {
                precise = true;
                init = state.beta;
                continue;
            }
            let converged = state.converged && kkt.max_violation <= config.kkt_tol;
            return PointFit {
                state,
                kkt,
                expansions,
                working_set: working,
                converged,
            };
        }
        expansions += 1;
        precise = false;
        working = union_sorted(working, &added);
        init = state.beta;
    }
}

/// Solution path in the original covariate scale.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub penalty: Penalty,
    pub family: Family,
    pub alpha: f64,
    pub standardize: bool,
    pub initial: InitialPolicy,
    pub variables: Vec<String>,
    pub grid: LambdaGrid,
    /// `p × n_lambda`; column `k` is the estimate at `grid.values()[k]`.
    pub coefficients: Array2<f64>,
    /// Nonzero count of each column.
    pub df: Vec<usize>,
    /// `Q_λ` of the problem actually solved (on standardized columns when
    /// `standardize` is set).
    pub objective: Vec<f64>,
    pub converged: Vec<bool>,
    pub kkt_max_violation: Vec<f64>,
    /// All-zero columns left unscaled by standardization.
    pub zero_columns: Vec<usize>,
}

impl PathResult {
    pub fn p(&self) -> usize {
        self.coefficients.nrows()
    }

    pub fn n_lambda(&self) -> usize {
        self.grid.len()
    }

    pub fn beta(&self, k: usize) -> Array1<f64> {
        self.coefficients.column(k).to_owned()
    }
}

struct Prepared {
    data: Dataset,
    /// `√s_j`, or 1 when not standardizing.
    root_scale: Vec<f64>,
    zero_columns: Vec<usize>,
}

fn prepare(data: &Dataset, config: &ProblemConfig) -> Prepared {
    if config.standardize {
        let st = standardize_columns(data);
        Prepared {
            data: st.data,
            root_scale: st.scale.iter().map(|s| s.sqrt()).collect(),
            zero_columns: st.zero_columns,
        }
    } else {
        Prepared {
            data: data.clone(),
            root_scale: vec![1.0; data.p()],
            zero_columns: Vec::new(),
        }
    }
}

/// Fit of the unpenalized coordinates alone, all penalized ones held at zero.
fn null_fit(data: &Dataset, config: &ProblemConfig) -> Array1<f64> {
    let unpen = data.unpenalized();
    let zero = Array1::zeros(data.p());
    if unpen.is_empty() {
        return zero;
    }
    // the penalty never touches unpenalized coordinates, so any spec will do
    let spec = Penalty::with_defaults(crate::PenaltyKind::Lasso).at(1.0).unwrap();
    cccp_minimize(config.family, &spec, data, &config.solver, &zero, &unpen).beta
}

/// `λ_max` and the null fit on already prepared data.
fn grid_for(penalty: &Penalty, data: &Dataset, config: &ProblemConfig) -> Result<(LambdaGrid, Array1<f64>)> {
    let beta_null = null_fit(data, config);
    if let Some(v) = &config.lambda_values {
        return Ok((LambdaGrid::from_values(v.clone())?, beta_null));
    }
    let g = loss::loss_grad(config.family, data, &beta_null);
    let g_max = data
        .pen_weights()
        .iter()
        .zip(g.iter())
        .filter(|(&w, _)| w > 0.0)
        .map(|(&w, &gj)| gj.abs() / w)
        .fold(0.0, f64::max);
    if !(g_max > 0.0) || !g_max.is_finite() {
        return Err(Error::DegenerateResponse);
    }
    let alpha = config.solver.alpha.max(MIN_GRID_ALPHA);
    let lambda_max = penalty.lambda_for_kappa(g_max / alpha);
    let ratio = config
        .lambda_ratio
        .unwrap_or_else(|| default_lambda_ratio(config.family, data));
    Ok((LambdaGrid::log_spaced(lambda_max, ratio, config.n_lambda)?, beta_null))
}

/// The grid [`fit_path`] would use: `λ_max` is the smallest λ at which the
/// zero vector (after fitting the unpenalized coordinates) is stationary.
pub fn lambda_grid(penalty: &Penalty, data: &Dataset, config: &ProblemConfig) -> Result<LambdaGrid> {
    config.validate(data)?;
    let prepared = prepare(data, config);
    Ok(grid_for(penalty, &prepared.data, config)?.0)
}

/// Fits the full solution path.
pub fn fit_path(penalty: &Penalty, data: &Dataset, config: &ProblemConfig) -> Result<PathResult> {
    config.validate(data)?;
    let prepared = prepare(data, config);
    let work = &prepared.data;
    let (grid, beta_null) = grid_for(penalty, work, config)?;
    let p = data.p();
    let global = match &config.initial {
        InitialPolicy::WarmStart => None,
        InitialPolicy::GlobalInitial(b) => Some(Array1::from_shape_fn(p, |j| b[j] * prepared.root_scale[j])),
    };

    let mut coefficients = Array2::zeros((p, grid.len()));
    let mut df = Vec::with_capacity(grid.len());
    let mut objective = Vec::with_capacity(grid.len());
    let mut converged = Vec::with_capacity(grid.len());
    let mut kkt_max_violation = Vec::with_capacity(grid.len());
    let mut previous = beta_null;
    for (k, &lambda) in grid.values().iter().enumerate() {
        let spec = penalty.at(lambda)?;
        let init = global.as_ref().unwrap_or(&previous);
        let fit = fit_fixed_lambda(&spec, work, config, init);
        for j in 0..p {
            coefficients[[j, k]] = fit.state.beta[j] / prepared.root_scale[j];
        }
        df.push(fit.state.active.len());
        objective.push(fit.state.objective);
        converged.push(fit.converged);
        kkt_max_violation.push(fit.kkt.max_violation);
        previous = fit.state.beta;
    }
    Ok(PathResult {
        penalty: *penalty,
        family: config.family,
        alpha: config.solver.alpha,
        standardize: config.standardize,
        initial: config.initial.clone(),
        variables: data.names().to_vec(),
        grid,
        coefficients,
        df,
        objective,
        converged,
        kkt_max_violation,
        zero_columns: prepared.zero_columns,
    })
}
