//! `ncreg` command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array1;

use ncreg::datagen::{generate, SimSpec, DEFAULT_RHO};
use ncreg::io::{self, ReadOptions, DEFAULT_T_RANGE};
use ncreg::path::{LambdaGrid, DEFAULT_N_LAMBDA, DEFAULT_STANDARDIZE};
use ncreg::penalty::PenaltySpec;
use ncreg::select::{DEFAULT_FOLDS, DEFAULT_SEED};
use ncreg::solver::DEFAULT_ALPHA;
use ncreg::{
    cv_select, cv_select_lasso_seeded, fit_path, gic_select, CvOptions, Dataset, Error, Family, GicPolicy, InitialPolicy, PathResult, Penalty,
    PenaltyKind, ProblemConfig, SelectionResult, SolverConfig,
};

#[derive(Parser, Debug)]
#[command(name = "ncreg", version, about = "Penalized linear and logistic regression with nonconvex penalties")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit at a single lambda.
    Fit(FitArgs),
    /// Fit a solution path over a decreasing lambda grid.
    Path(PathArgs),
    /// Choose lambda by K-fold cross-validation.
    Cv(CvArgs),
    /// Choose lambda by a generalized information criterion.
    Gic(GicArgs),
    /// Generate a synthetic data set with AR(1) correlated covariates.
    Simulate(SimulateArgs),
    /// Draw penalty functions as SVG.
    PlotPenalties(PlotArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Initial {
    /// Start each lambda from the previous solution.
    Warm,
    /// Start every lambda from one fixed vector.
    Global,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// CSV file with a header row; every column other than the response and
    /// the observation weights is a covariate.
    data: PathBuf,

    /// Name of the response column.
    #[arg(long, default_value = "y")]
    response: String,

    /// Name of the observation-weight column, used when present.
    #[arg(long, value_name = "COLUMN", default_value = "obs_weight")]
    obs_weights: String,

    /// CSV file with columns `variable,weight`; unlisted variables keep
    /// weight 1 and weight 0 leaves a variable unpenalized.
    #[arg(long, value_name = "FILE")]
    pen_weights: Option<PathBuf>,

    /// Add an unpenalized intercept column.
    #[arg(long, overrides_with = "no_intercept")]
    intercept: bool,

    /// Fit without an intercept.
    #[arg(long, overrides_with = "intercept")]
    no_intercept: bool,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[command(flatten)]
    data: DataArgs,

    #[arg(long)]
    family: Option<Family>,

    #[arg(long, value_parser = parse_kind)]
    penalty: PenaltyKind,

    /// Concave scale of the penalty [default: depends on the penalty].
    #[arg(long)]
    tau: Option<f64>,

    /// Secondary scale of classo and sridge.
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,

    /// Mix between the penalty (1) and a ridge term (0).
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,

    /// Scale covariates to unit mean square before fitting.
    #[arg(long, overrides_with = "no_standardize")]
    standardize: bool,

    /// Fit on the covariates as given.
    #[arg(long, overrides_with = "standardize")]
    no_standardize: bool,

    /// Initialization of each grid point.
    #[arg(long, value_enum, default_value_t = Initial::Warm)]
    initial: Initial,

    /// Source of the global initial vector: `lasso` for the cross-validated
    /// lasso fit, or a selection JSON file written by `cv` or `gic`.
    /// Implies `--initial global`. Under `cv`, a lasso seed is refitted on
    /// the training rows of every fold.
    #[arg(long, value_name = "PATH|lasso")]
    global_initial_from: Option<String>,

    /// Cross-validation folds, for `cv` and for a lasso global initial
    /// vector.
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    folds: usize,

    /// Seed of the fold assignment.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Worker threads for cross-validation folds.
    #[arg(long, default_value_t = 1)]
    jobs: usize,

    /// Write the result here instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Number of grid values.
    #[arg(long, default_value_t = DEFAULT_N_LAMBDA)]
    n_lambda: usize,

    /// Ratio of the smallest to the largest grid value [default: 0.01, or
    /// 0.05 for binomial data with more penalized variables than rows].
    #[arg(long)]
    lambda_ratio: Option<f64>,

    /// Explicit comma-separated grid, replacing --n-lambda and
    /// --lambda-ratio.
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// Regularization level.
    #[arg(long)]
    lambda: f64,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args, Debug)]
struct PathArgs {
    #[command(flatten)]
    model: ModelArgs,

    #[command(flatten)]
    grid: GridArgs,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Also draw the coefficient paths to this SVG file.
    #[arg(long, value_name = "FILE")]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CvArgs {
    #[command(flatten)]
    model: ModelArgs,

    #[command(flatten)]
    grid: GridArgs,

    /// Pick the largest lambda within one standard error of the best score.
    #[arg(long)]
    one_se: bool,
}

#[derive(Args, Debug)]
struct GicArgs {
    #[command(flatten)]
    model: ModelArgs,

    #[command(flatten)]
    grid: GridArgs,

    /// Complexity weight: bic, gic, aic or a non-negative number.
    #[arg(long, default_value_t = GicPolicy::default())]
    gic_policy: GicPolicy,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,

    #[arg(long)]
    p: usize,

    #[arg(long)]
    family: Option<Family>,

    /// Correlation between neighbouring covariates.
    #[arg(long, default_value_t = DEFAULT_RHO, allow_negative_numbers = true)]
    rho: f64,

    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Write the CSV here instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Comma-separated penalties to draw [default: all].
    #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
    penalty: Vec<PenaltyKind>,

    #[arg(long, default_value_t = 1.0)]
    lambda: f64,

    #[arg(long, default_value_t = 3.0)]
    tau: f64,

    #[arg(long, default_value_t = 0.5)]
    gamma: f64,

    /// Smallest plotted t.
    #[arg(long, default_value_t = DEFAULT_T_RANGE.0, allow_negative_numbers = true)]
    t_min: f64,

    /// Largest plotted t.
    #[arg(long, default_value_t = DEFAULT_T_RANGE.1, allow_negative_numbers = true)]
    t_max: f64,

    /// Write the SVG here instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<PenaltyKind, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = PenaltyKind::ALL.iter().map(|k| k.as_str()).collect();
        format!("unknown penalty `{s}`; expected one of {}", names.join(", "))
    })
}

/// Failures with their exit status: 2 for usage errors, 1 for data errors.
enum Failure {
    Usage(String),
    Data(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::PenaltyDomain { .. } | Error::InvalidConfig(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

fn emit(output: Option<&Path>, text: &str) -> Outcome {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| io_failure(path, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::Data(e.to_string()))
        }
    }
}

/// Settings that can be checked before any data is read.
struct Plan {
    penalty: Penalty,
    config: ProblemConfig,
    cv: CvOptions,
    global_from: Option<String>,
}

fn plan(model: &ModelArgs, grid: Option<&GridArgs>) -> Outcome<Plan> {
    let penalty = Penalty::new(
        model.penalty,
        model.tau.unwrap_or(model.penalty.default_tau()),
        model.gamma,
    )?;
    let solver = SolverConfig {
        alpha: model.alpha,
        ..SolverConfig::default()
    };
    solver.validate()?;
    let standardize = match (model.standardize, model.no_standardize) {
        (true, _) => true,
        (_, true) => false,
        _ => DEFAULT_STANDARDIZE,
    };
    let mut config = ProblemConfig {
        family: model.family.unwrap_or_default(),
        standardize,
        solver,
        ..ProblemConfig::default()
    };
    if let Some(g) = grid {
        config.n_lambda = g.n_lambda;
        config.lambda_ratio = g.lambda_ratio;
        if let Some(values) = &g.lambda {
            LambdaGrid::from_values(values.clone())?;
            config.lambda_values = Some(values.clone());
        } else {
            if g.n_lambda < 2 {
                return Err(Failure::Usage("--n-lambda must be at least 2".into()));
            }
            if let Some(r) = g.lambda_ratio {
                if !(r > 0.0 && r < 1.0) {
                    return Err(Failure::Usage(format!("--lambda-ratio must lie in (0, 1), got {r}")));
                }
            }
        }
    }
    if model.folds < 2 {
        return Err(Failure::Usage("--folds must be at least 2".into()));
    }
    if model.jobs == 0 {
        return Err(Failure::Usage("--jobs must be positive".into()));
    }
    let global_from = match (&model.global_initial_from, model.initial) {
        (Some(src), _) => Some(src.clone()),
        (None, Initial::Global) => Some("lasso".into()),
        (None, Initial::Warm) => None,
    };
    Ok(Plan {
        penalty,
        config,
        cv: CvOptions {
            n_folds: model.folds,
            seed: model.seed,
            one_se: false,
            jobs: model.jobs,
        },
        global_from,
    })
}

fn load(args: &DataArgs) -> Outcome<Dataset> {
    let options = ReadOptions {
        response: args.response.clone(),
        obs_weight: args.obs_weights.clone(),
    };
    let mut data = io::read_dataset(&args.data, &options).map_err(|e| match e {
        Error::Io(io) => io_failure(&args.data, io),
        other => Failure::Data(format!("{}: {other}", args.data.display())),
    })?;
    if let Some(path) = &args.pen_weights {
        let w = io::read_pen_weights(path, data.names()).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        data = data.with_pen_weights(w)?;
    }
    // intercept is on unless switched off
    if !args.no_intercept || args.intercept {
        data = data.with_intercept();
    }
    Ok(data)
}

fn global_initial(plan: &Plan, data: &Dataset, source: &str) -> Outcome<Array1<f64>> {
    if source == "lasso" {
        let config = ProblemConfig {
            initial: InitialPolicy::WarmStart,
            lambda_values: None,
            ..plan.config.clone()
        };
        let sel = cv_select(&Penalty::with_defaults(PenaltyKind::Lasso), data, &config, &plan.cv)?;
        eprintln!(
            "global initial: cross-validated lasso at lambda = {}",
            sel.selected_lambda()
        );
        return Ok(sel.selected_beta);
    }
    let path = Path::new(source);
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let doc = io::read_selection_json(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let mut beta = Array1::zeros(data.p());
    for (name, &b) in doc.variables.iter().zip(&doc.selected_beta) {
        let j = data.names().iter().position(|n| n == name).ok_or_else(|| {
            Failure::Data(format!("{}: variable {name:?} is not in the data", path.display()))
        })?;
        beta[j] = b;
    }
    Ok(beta)
}

fn prepare(model: &ModelArgs, grid: Option<&GridArgs>) -> Outcome<(Plan, Dataset)> {
    let mut plan = plan(model, grid)?;
    let data = load(&model.data)?;
    seed(&mut plan, &data)?;
    Ok((plan, data))
}

fn seed(plan: &mut Plan, data: &Dataset) -> Outcome {
    if let Some(src) = plan.global_from.clone() {
        plan.config.initial = InitialPolicy::GlobalInitial(global_initial(plan, data, &src)?);
    }
    Ok(())
}

fn warn_unconverged(path: &PathResult) {
    let bad: Vec<usize> = (0..path.n_lambda()).filter(|&k| !path.converged[k]).collect();
    if let Some(&first) = bad.first() {
        eprintln!(
            "warning: {} of {} grid points did not converge (first at lambda = {}); they are flagged in the output",
            bad.len(),
            path.n_lambda(),
            path.grid.values()[first]
        );
    }
    if !path.zero_columns.is_empty() {
        let names: Vec<&str> = path.zero_columns.iter().map(|&j| path.variables[j].as_str()).collect();
        eprintln!("warning: constant zero columns left at zero: {}", names.join(", "));
    }
}

fn write_path(path: &PathResult, format: Format, output: Option<&Path>) -> Outcome {
    let text = match format {
        Format::Json => io::path_to_json(path)?,
        Format::Csv => io::path_to_csv(path)?,
    };
    emit(output, &text)
}

fn run_fit(args: &FitArgs) -> Outcome {
    let grid = GridArgs {
        n_lambda: DEFAULT_N_LAMBDA,
        lambda_ratio: None,
        lambda: Some(vec![args.lambda]),
    };
    let (plan, data) = prepare(&args.model, Some(&grid))?;
    let path = fit_path(&plan.penalty, &data, &plan.config)?;
    warn_unconverged(&path);
    write_path(&path, args.format, args.model.output.as_deref())
}

fn run_path(args: &PathArgs) -> Outcome {
    let (plan, data) = prepare(&args.model, Some(&args.grid))?;
    let path = fit_path(&plan.penalty, &data, &plan.config)?;
    warn_unconverged(&path);
    write_path(&path, args.format, args.model.output.as_deref())?;
    if let Some(svg) = &args.svg {
        fs::write(svg, io::plot_path(&path)).map_err(|e| io_failure(svg, e))?;
    }
    Ok(())
}

fn report_selection(sel: &SelectionResult) {
    warn_unconverged(&sel.path);
    eprintln!(
        "selected lambda = {} (index {}, {} nonzero)",
        sel.selected_lambda(),
        sel.selected_index,
        sel.path.df[sel.selected_index]
    );
}

fn run_cv(args: &CvArgs) -> Outcome {
    let mut plan = plan(&args.model, Some(&args.grid))?;
    let data = load(&args.model.data)?;
    let options = CvOptions {
        one_se: args.one_se,
        ..plan.cv
    };
    // a lasso seed is refitted inside every fold
    let sel = if plan.global_from.as_deref() == Some("lasso") {
        let seeded = cv_select_lasso_seeded(&plan.penalty, &data, &plan.config, &options)?;
        eprintln!(
            "global initial: cross-validated lasso at lambda = {}",
            seeded.seed.selected_lambda()
        );
        seeded.selection
    } else {
        seed(&mut plan, &data)?;
        cv_select(&plan.penalty, &data, &plan.config, &options)?
    };
    report_selection(&sel);
    let text = io::selection_to_json(&sel, "cv", &options.n_folds.to_string())?;
    emit(args.model.output.as_deref(), &text)
}

fn run_gic(args: &GicArgs) -> Outcome {
    let (plan, data) = prepare(&args.model, Some(&args.grid))?;
    let sel = gic_select(&plan.penalty, &data, &plan.config, args.gic_policy)?;
    report_selection(&sel);
    let text = io::selection_to_json(&sel, "gic", &args.gic_policy.to_string())?;
    emit(args.model.output.as_deref(), &text)
}

fn run_simulate(args: &SimulateArgs) -> Outcome {
    let spec = SimSpec {
        rho: args.rho,
        ..SimSpec::new(args.n, args.p, args.family.unwrap_or_default(), args.seed)
    };
    let data = generate(&spec)?;
    let mut buf = Vec::new();
    io::write_dataset_to(&data, &mut buf, &ReadOptions::default())?;
    emit(args.output.as_deref(), &String::from_utf8(buf).expect("csv output is utf-8"))
}

fn run_plot(args: &PlotArgs) -> Outcome {
    let kinds: &[PenaltyKind] = if args.penalty.is_empty() {
        &PenaltyKind::ALL
    } else {
        &args.penalty
    };
    let specs = kinds
        .iter()
        .map(|&k| PenaltySpec::new(k, args.lambda, args.tau, args.gamma))
        .collect::<Result<Vec<_>, _>>()?;
    let svg = io::plot_penalties(&specs, (args.t_min, args.t_max))?;
    emit(args.output.as_deref(), &svg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Path(a) => run_path(a),
        Command::Cv(a) => run_cv(a),
        Command::Gic(a) => run_gic(a),
        Command::Simulate(a) => run_simulate(a),
        Command::PlotPenalties(a) => run_plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
