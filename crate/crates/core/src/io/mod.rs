//! Reading data sets, writing results and drawing plots.

mod data;
mod document;
mod svg;

pub use data::{read_dataset, read_dataset_from, read_pen_weights, write_dataset, write_dataset_to, ReadOptions};
pub use document::{
    path_to_csv, path_to_json, read_path_json, read_selection_json, selection_to_json, PathDocument, SelectionDocument, PATH_SCHEMA,
    SCHEMA_VERSION, SELECTION_SCHEMA,
};
pub use svg::{
    figure_penalties, penalty_curves, plot_path, plot_penalties, PenaltyCurve, DEFAULT_CURVE_POINTS, DEFAULT_T_RANGE,
};

/// Version of this library, recorded in every written document.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
