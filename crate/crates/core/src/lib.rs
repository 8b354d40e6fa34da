//! Least squares with L1 penalties on differences of categorical effects.
//!
//! Nominal factors are penalized on all pairwise differences of their dummy
//! coefficients, ordinal factors on adjacent differences. Levels whose
//! differences are shrunk to zero fuse into one effect; a factor whose levels
//! all fuse with the reference drops out of the model.
//!
//! The typical pipeline:
//!
//! ```no_run
//! use catfuse::{build_augmented, extract_clusters, path, standard_weights, DEFAULT_SQRT_GAMMA};
//! # fn main() -> catfuse::Result<()> {
//! # let ds: catfuse::Dataset = unimplemented!();
//! let weights = standard_weights(&ds, true)?;
//! let problem = build_augmented(&ds, &weights, DEFAULT_SQRT_GAMMA.powi(2))?;
//! let result = path(&problem, 100)?;
//! let (beta, _intercept) = result.coefficients_at(0.5)?;
//! let partition = extract_clusters(ds.schemas(), &beta, 1e-8);
//! # Ok(()) }
//! ```

pub mod coding;
pub mod data;
pub mod error;
pub mod linalg;
pub mod selection;
pub mod simlab;
pub mod solver;
pub mod structure;
pub mod weights;

pub use coding::{build_augmented, AugmentedProblem, ThetaLayout, DEFAULT_SQRT_GAMMA};
pub use data::{ingest_csv, parse_schema, read_schema, Dataset, FactorSchema, Scale};
pub use error::{Error, Result};
pub use solver::{path, path_with, solve_lasso, PathOptions, PathResult};
pub use structure::{degrees_of_freedom, extract_clusters, refit, ClusterPartition};
pub use weights::{adaptive_weights, build_weights, standard_weights, WeightConfig, WeightSet};

/// Version string embedded in output files.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
