//! Non-convex penalized regression for linear and logistic models.
//!
//! The solver minimizes
//!
//! ```text
//! Q(β) = L(β) + α Σ_j w_j J_λ(|β_j|) + (1 − α) λ Σ_j w_j β_j²
//! ```
//!
//! for eight penalties `J_λ` (lasso, SCAD, MCP, truncated L1, clipped lasso,
//! sparse ridge, modified log and modified bridge). Each fixed-λ problem is
//! solved by a convex-concave procedure whose convex subproblems are
//! minimized by a modified local quadratic approximation with a line search,
//! and each quadratic model by coordinate descent. Solution paths are built
//! over a decreasing λ grid with KKT-driven active sets.

pub mod datagen;
pub mod error;
pub mod io;
pub mod loss;
pub mod path;
pub mod penalty;
pub mod select;
pub mod solver;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use loss::{Dataset, Family};
pub use path::{fit_path, InitialPolicy, LambdaGrid, PathResult, ProblemConfig};
pub use penalty::{Penalty, PenaltyKind, PenaltySpec};
pub use select::{cv_select, cv_select_lasso_seeded, gic_select, CvOptions, GicPolicy, SeededSelection, SelectionResult};
pub use solver::{FitState, SolverConfig};
