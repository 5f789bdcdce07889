use serde::{Deserialize, Serialize};

use super::TOOL_VERSION;
use crate::error::Result;
use crate::loss::Family;
use crate::path::PathResult;
use crate::penalty::Penalty;
use crate::select::SelectionResult;

pub const PATH_SCHEMA: &str = "ncreg.path";
pub const SELECTION_SCHEMA: &str = "ncreg.selection";
pub const SCHEMA_VERSION: u32 = 1;

/// Serialized solution path. `coefficients[k]` holds the `p` estimates at
/// `lambda[k]`, in the order of `variables`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDocument {
    pub schema: String,
    pub version: u32,
    pub tool_version: String,
    pub penalty: Penalty,
    pub family: Family,
    pub alpha: f64,
    pub standardize: bool,
    /// `warm` or `global`.
    pub initial: String,
    pub variables: Vec<String>,
    pub lambda: Vec<f64>,
    pub coefficients: Vec<Vec<f64>>,
    pub df: Vec<usize>,
    pub objective: Vec<f64>,
    pub converged: Vec<bool>,
    pub kkt_max_violation: Vec<f64>,
}

impl From<&PathResult> for PathDocument {
    fn from(r: &PathResult) -> Self {
        PathDocument {
            schema: PATH_SCHEMA.into(),
            version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.into(),
            penalty: r.penalty,
            family: r.family,
            alpha: r.alpha,
            standardize: r.standardize,
            initial: r.initial.name().into(),
            variables: r.variables.clone(),
            lambda: r.grid.values().to_vec(),
            coefficients: (0..r.n_lambda()).map(|k| r.coefficients.column(k).to_vec()).collect(),
            df: r.df.clone(),
            objective: r.objective.clone(),
            converged: r.converged.clone(),
            kkt_max_violation: r.kkt_max_violation.clone(),
        }
    }
}

pub fn path_to_json(result: &PathResult) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&PathDocument::from(result))?;
    s.push('\n');
    Ok(s)
}

pub fn read_path_json(text: &str) -> Result<PathDocument> {
    Ok(serde_json::from_str(text)?)
}

/// Long format: one `lambda,variable,coefficient` row per variable and grid
/// value.
pub fn path_to_csv(result: &PathResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["lambda", "variable", "coefficient"])?;
    for (k, lambda) in result.grid.values().iter().enumerate() {
        for (j, name) in result.variables.iter().enumerate() {
            w.write_record([lambda.to_string(), name.clone(), result.coefficients[[j, k]].to_string()])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Serialized tuning result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDocument {
    pub schema: String,
    pub version: u32,
    pub tool_version: String,
    /// `cv` or `gic`.
    pub method: String,
    /// Fold count for CV, `a_n` policy for GIC.
    pub criterion: String,
    pub penalty: Penalty,
    pub family: Family,
    pub alpha: f64,
    pub variables: Vec<String>,
    pub lambda: Vec<f64>,
    pub scores: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub score_se: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub misclassification: Option<Vec<f64>>,
    pub df: Vec<usize>,
    pub selected_index: usize,
    pub selected_lambda: f64,
    pub selected_beta: Vec<f64>,
}

pub fn selection_to_json(result: &SelectionResult, method: &str, criterion: &str) -> Result<String> {
    let path = &result.path;
    let doc = SelectionDocument {
        schema: SELECTION_SCHEMA.into(),
        version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.into(),
        method: method.into(),
        criterion: criterion.into(),
        penalty: path.penalty,
        family: path.family,
        alpha: path.alpha,
        variables: path.variables.clone(),
        lambda: path.grid.values().to_vec(),
        scores: result.scores.clone(),
        score_se: result.score_se.clone(),
        misclassification: result.misclassification.clone(),
        df: path.df.clone(),
        selected_index: result.selected_index,
        selected_lambda: result.selected_lambda(),
        selected_beta: result.selected_beta.to_vec(),
    };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

pub fn read_selection_json(text: &str) -> Result<SelectionDocument> {
    Ok(serde_json::from_str(text)?)
}
