//! Penalized solutions and regularization paths.

mod ista;
mod lasso;
mod path;

pub use ista::{ista_oracle, ista_with, IstaOptions, IstaSolution};
pub use lasso::{
    kkt_violation, lambda_max, lasso_objective, smooth_gradient, soft_threshold, solve_lasso, solve_lasso_with,
    LassoOptions, LassoSolution,
};
pub use path::{
    back_transform, fused_back_transform, lambda_grid, path, path_with, restriction_violation, PathOptions, PathPoint,
    PathResult, PrecisionReport,
};
