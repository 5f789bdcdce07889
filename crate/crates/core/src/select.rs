//! Choosing λ by K-fold cross-validation or a generalized information
//! criterion.

use std::fmt;
use std::str::FromStr;

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::loss::{self, Dataset, Family};
use crate::path::{fit_path, InitialPolicy, PathResult, ProblemConfig};
use crate::penalty::{Penalty, PenaltyKind};

pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvOptions {
    pub n_folds: usize,
    /// Seed of the fold assignment.
    pub seed: u64,
    /// Pick the largest λ whose score is within one standard error of the
    /// minimum instead of the minimizer itself.
    pub one_se: bool,
    /// Worker threads for the fold fits.
    pub jobs: usize,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            n_folds: DEFAULT_FOLDS,
            seed: DEFAULT_SEED,
            one_se: false,
            jobs: 1,
        }
    }
}

/// Complexity weight `a_n` of the information criterion
/// `2n·L(β̂) + a_n·df`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum GicPolicy {
    /// `a_n = log n`.
    #[default]
    Bic,
    /// `a_n = log(log n)·log p`.
    Gic,
    /// `a_n = 2`.
    Aic,
    Custom(f64),
}

impl GicPolicy {
    pub fn weight(self, n: usize, p: usize) -> f64 {
        let n = n as f64;
        match self {
            GicPolicy::Bic => n.ln(),
            GicPolicy::Gic => n.ln().ln() * (p as f64).ln(),
            GicPolicy::Aic => 2.0,
            GicPolicy::Custom(a) => a,
        }
    }
}

impl fmt::Display for GicPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GicPolicy::Bic => f.write_str("bic"),
            GicPolicy::Gic => f.write_str("gic"),
            GicPolicy::Aic => f.write_str("aic"),
            GicPolicy::Custom(a) => write!(f, "{a}"),
        }
    }
}

impl FromStr for GicPolicy {
    type Err = Error;

    /// `bic`, `gic`, `aic` or a non-negative number used as `a_n`.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bic" => Ok(GicPolicy::Bic),
            "gic" => Ok(GicPolicy::Gic),
            "aic" => Ok(GicPolicy::Aic),
            other => match other.parse::<f64>() {
                Ok(a) if a >= 0.0 && a.is_finite() => Ok(GicPolicy::Custom(a)),
                _ => Err(Error::InvalidConfig(format!(
                    "unknown information criterion {s:?}; expected bic, gic, aic or a non-negative number"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Path fitted on the full data; its grid is the one scored.
    pub path: PathResult,
    /// CV mean held-out loss or information criterion, per λ.
    pub scores: Vec<f64>,
    /// Standard error of the CV score across folds.
    pub score_se: Option<Vec<f64>>,
    /// Pooled held-out misclassification rate (binomial CV only).
    pub misclassification: Option<Vec<f64>>,
    pub selected_index: usize,
    pub selected_beta: Array1<f64>,
}

impl SelectionResult {
    pub fn lambda(&self) -> &[f64] {
        self.path.grid.values()
    }

    pub fn selected_lambda(&self) -> f64 {
        self.lambda()[self.selected_index]
    }
}

/// Index of the smallest score; ties go to the larger λ (smaller index).
fn argmin(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s < scores[best] {
            best = k;
        }
    }
    best
}

fn row_order(data: &Dataset, a: usize, b: usize) -> std::cmp::Ordering {
    let x = data.x();
    data.y()[a]
        .total_cmp(&data.y()[b])
        .then_with(|| {
            x.row(a)
                .iter()
                .zip(x.row(b))
                .map(|(u, v)| u.total_cmp(v))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .then_with(|| data.obs_weights()[a].total_cmp(&data.obs_weights()[b]))
}

/// Seeded fold labels in `0..n_folds`. Observations are first put in a
/// canonical order so that the labels follow the rows when the data set is
/// permuted. For the binomial family each class is dealt round-robin across
/// the folds.
pub fn assign_folds(data: &Dataset, family: Family, n_folds: usize, seed: u64) -> Result<Vec<usize>> {
    let n = data.n();
    if n_folds < 2 || n_folds > n {
        return Err(Error::InvalidConfig(format!(
            "number of folds must lie in [2, {n}], got {n_folds}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| row_order(data, a, b));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; n];
    let strata: Vec<Vec<usize>> = match family {
        Family::Gaussian => vec![order],
        Family::Binomial => {
            let (ones, zeros): (Vec<usize>, Vec<usize>) = order.into_iter().partition(|&i| data.y()[i] == 1.0);
            vec![zeros, ones]
        }
    };
    let mut next = 0;
    for mut stratum in strata {
        stratum.shuffle(&mut rng);
        for i in stratum {
            folds[i] = next % n_folds;
            next += 1;
        }
    }
    Ok(folds)
}

struct FoldScore {
    loss: Vec<f64>,
    errors: Vec<f64>,
    weight: f64,
}

/// Builds the configuration of one fold fit from its training rows.
type FoldConfig<'a> = dyn Fn(&Dataset) -> Result<ProblemConfig> + Sync + 'a;

fn score_fold(
    penalty: &Penalty,
    data: &Dataset,
    family: Family,
    fold_config: &FoldConfig,
    folds: &[usize],
    fold: usize,
) -> Result<FoldScore> {
    let (test, train): (Vec<usize>, Vec<usize>) = (0..data.n()).partition(|&i| folds[i] == fold);
    let train_data = data.subset(&train)?;
    if family == Family::Binomial {
        let ones = train_data.y().iter().filter(|&&v| v == 1.0).count();
        if ones == 0 || ones == train_data.n() {
            return Err(Error::InvalidData(format!(
                "training set of fold {} contains a single response class",
                fold + 1
            )));
        }
    }
    let config = fold_config(&train_data)?;
    let path = fit_path(penalty, &train_data, &config)?;
    let m = path.n_lambda();
    let mut loss = vec![0.0; m];
    let mut errors = vec![0.0; m];
    let mut weight = 0.0;
    let d = data.obs_weights();
    let x = data.x();
    for &i in &test {
        weight += d[i];
        let row = x.row(i);
        for k in 0..m {
            let eta: f64 = row.iter().zip(path.coefficients.column(k)).map(|(a, b)| a * b).sum();
            let y = data.y()[i];
            loss[k] += d[i] * held_out_loss(config.family, y, eta);
            if config.family == Family::Binomial && ((eta >= 0.0) != (y == 1.0)) {
                errors[k] += d[i];
            }
        }
    }
    Ok(FoldScore { loss, errors, weight })
}

/// Squared error for the gaussian family, negative log-likelihood for the
/// binomial family.
fn held_out_loss(family: Family, y: f64, eta: f64) -> f64 {
    match family {
        Family::Gaussian => (y - eta) * (y - eta),
        Family::Binomial => loss::observation_loss(family, y, eta),
    }
}

/// K-fold cross-validation with seeded fold labels from [`assign_folds`].
pub fn cv_select(penalty: &Penalty, data: &Dataset, config: &ProblemConfig, options: &CvOptions) -> Result<SelectionResult> {
    config.validate(data)?;
    let folds = assign_folds(data, config.family, options.n_folds, options.seed)?;
    cv_select_with_folds(penalty, data, config, &folds, options)
}

/// Cross-validation with caller-supplied fold labels `0..K`. Every fold is
/// fitted over the grid of the full-data path; the score at each λ is the
/// weighted mean held-out loss pooled over all observations.
pub fn cv_select_with_folds(
    penalty: &Penalty,
    data: &Dataset,
    config: &ProblemConfig,
    folds: &[usize],
    options: &CvOptions,
) -> Result<SelectionResult> {
    check_folds(data, folds)?;
    let full = fit_path(penalty, data, config)?;
    let fold_config = ProblemConfig {
        lambda_values: Some(full.grid.values().to_vec()),
        ..config.clone()
    };
    cv_core(penalty, data, config.family, full, folds, options, &|_| Ok(fold_config.clone()))
}

fn check_folds(data: &Dataset, folds: &[usize]) -> Result<()> {
    if folds.len() != data.n() {
        return Err(Error::InvalidConfig("one fold label per observation is required".into()));
    }
    let k = folds.iter().max().map_or(0, |m| m + 1);
    if k < 2 || (0..k).any(|f| !folds.contains(&f)) {
        return Err(Error::InvalidConfig("fold labels must cover 0..K with K >= 2".into()));
    }
    Ok(())
}

/// Scores the grid of `full` by refitting `penalty` on every fold.
fn cv_core(
    penalty: &Penalty,
    data: &Dataset,
    family: Family,
    full: PathResult,
    folds: &[usize],
    options: &CvOptions,
    fold_config: &FoldConfig,
) -> Result<SelectionResult> {
    let k = folds.iter().max().map_or(0, |m| m + 1);
    let jobs = options.jobs.clamp(1, k);
    let mut results: Vec<Option<Result<FoldScore>>> = (0..k).map(|_| None).collect();
    if jobs == 1 {
        for (f, slot) in results.iter_mut().enumerate() {
            *slot = Some(score_fold(penalty, data, family, fold_config, folds, f));
        }
    } else {
        std::thread::scope(|s| {
            let chunk = k.div_ceil(jobs);
            for (c, slots) in results.chunks_mut(chunk).enumerate() {
                s.spawn(move || {
                    for (o, slot) in slots.iter_mut().enumerate() {
                        *slot = Some(score_fold(penalty, data, family, fold_config, folds, c * chunk + o));
                    }
                });
            }
        });
    }
    let scores_by_fold = results.into_iter().map(|r| r.unwrap()).collect::<Result<Vec<_>>>()?;

    let m = full.n_lambda();
    let total_weight: f64 = scores_by_fold.iter().map(|f| f.weight).sum();
    let mut scores = vec![0.0; m];
    let mut mis = vec![0.0; m];
    for f in &scores_by_fold {
        for j in 0..m {
            scores[j] += f.loss[j];
            mis[j] += f.errors[j];
        }
    }
    scores.iter_mut().for_each(|s| *s /= total_weight);
    mis.iter_mut().for_each(|s| *s /= total_weight);
    let kf = k as f64;
    let se: Vec<f64> = (0..m)
        .map(|j| {
            let means: Vec<f64> = scores_by_fold.iter().map(|f| f.loss[j] / f.weight).collect();
            let mean = means.iter().sum::<f64>() / kf;
            let var = means.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (kf - 1.0);
            (var / kf).sqrt()
        })
        .collect();

    let best = argmin(&scores);
    let selected_index = if options.one_se {
        let bound = scores[best] + se[best];
        (0..=best).find(|&j| scores[j] <= bound).unwrap_or(best)
    } else {
        best
    };
    Ok(SelectionResult {
        selected_beta: full.beta(selected_index),
        score_se: Some(se),
        misclassification: (family == Family::Binomial).then_some(mis),
        scores,
        selected_index,
        path: full,
    })
}

/// Cross-validation of a fit whose every grid point starts from a
/// cross-validated lasso estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SeededSelection {
    pub selection: SelectionResult,
    /// Lasso cross-validation that produced the starting vector.
    pub seed: SelectionResult,
}

/// Cross-validates `penalty` under a lasso-seeded global initial vector.
///
/// On the full data every grid point starts from the lasso estimate
/// chosen by cross-validation. Inside each fold the starting vector is the
/// lasso fit on that fold's training rows at the same position of the lasso
/// grid, so the held-out rows never shape the fits they score. Both
/// cross-validations share one fold assignment.
pub fn cv_select_lasso_seeded(
    penalty: &Penalty,
    data: &Dataset,
    config: &ProblemConfig,
    options: &CvOptions,
) -> Result<SeededSelection> {
    config.validate(data)?;
    let folds = assign_folds(data, config.family, options.n_folds, options.seed)?;
    let lasso = Penalty::with_defaults(PenaltyKind::Lasso);
    let lasso_config = ProblemConfig {
        initial: InitialPolicy::WarmStart,
        lambda_values: None,
        ..config.clone()
    };
    let seed = cv_select_with_folds(&lasso, data, &lasso_config, &folds, options)?;
    // warm starts make the truncated grid reproduce the leading points
    let seed_grid = seed.lambda()[..=seed.selected_index].to_vec();

    let full = fit_path(
        penalty,
        data,
        &ProblemConfig {
            initial: InitialPolicy::GlobalInitial(seed.selected_beta.clone()),
            ..config.clone()
        },
    )?;
    let grid = full.grid.values().to_vec();
    let fold_config = |train: &Dataset| -> Result<ProblemConfig> {
        let seed_path = fit_path(
            &lasso,
            train,
            &ProblemConfig {
                lambda_values: Some(seed_grid.clone()),
                ..lasso_config.clone()
            },
        )?;
        Ok(ProblemConfig {
            initial: InitialPolicy::GlobalInitial(seed_path.beta(seed_grid.len() - 1)),
            lambda_values: Some(grid.clone()),
            ..config.clone()
        })
    };
    let selection = cv_core(penalty, data, config.family, full, &folds, options, &fold_config)?;
    Ok(SeededSelection { selection, seed })
}

/// `2n·L(β̂_λ) + a_n·df_λ` at every point of a fitted path; `df` counts all
/// nonzero coefficients.
pub fn gic_scores(path: &PathResult, data: &Dataset, policy: GicPolicy) -> Vec<f64> {
    let n = data.n();
    let a_n = policy.weight(n, data.p());
    (0..path.n_lambda())
        .map(|k| {
            let l = loss::loss_value(path.family, data, &path.beta(k));
            2.0 * n as f64 * l + a_n * path.df[k] as f64
        })
        .collect()
}

/// Scores a fitted path by an information criterion.
pub fn gic_from_path(path: PathResult, data: &Dataset, policy: GicPolicy) -> SelectionResult {
    let scores = gic_scores(&path, data, policy);
    let selected_index = argmin(&scores);
    SelectionResult {
        selected_beta: path.beta(selected_index),
        scores,
        score_se: None,
        misclassification: None,
        selected_index,
        path,
    }
}

/// Fits the path and selects λ by an information criterion.
pub fn gic_select(penalty: &Penalty, data: &Dataset, config: &ProblemConfig, policy: GicPolicy) -> Result<SelectionResult> {
    let path = fit_path(penalty, data, config)?;
    Ok(gic_from_path(path, data, policy))
}
