//! Differentially private search for second-order stationary points.
//!
//! The crate provides, in dependency order:
//!
//! - [`objective`]: two synthetic smooth non-convex problem families with
//!   per-sample regularity bounds and exact population oracles;
//! - [`tree_mech`]: the aggregated Gaussian noise tree that privatizes a
//!   running sum with noise logarithmic in its length;
//! - [`oracles`]: single-use batched gradient and gradient-difference
//!   estimators with per-call sensitivity receipts;
//! - [`calibrate`]: the closed-form parameter chain from (n, d, ε, δ) to
//!   step count, batch sizes, step size, and noise scales;
//! - [`spider`]: the optimizer loop — drift-gated variance reduction plus
//!   frozen-gated saddle escape — and candidate selection;
//! - [`verify`]: non-private certification and statistical audits of runs;
//! - [`harness`]: config-driven experiments, sweeps, and report extraction
//!   used by the `dp-spider` binary.
//!
//! Everything downstream of a seed is deterministic: datasets, tree noise,
//! and perturbations each draw from independently keyed streams, so any
//! recorded run can be reproduced bit-for-bit from its seeds alone.

pub mod calibrate;
pub mod committed;
pub mod eps;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod objective;
pub mod oracles;
pub mod seeding;
pub mod spider;
pub mod tree_mech;
pub mod verify;

pub use calibrate::{derive_params, Calibration, CalibrationInputs, CalibrationOptions};
pub use error::{Error, Result};
pub use objective::{generate_dataset, make_problem, Dataset, Family, NoiseModel, ProblemSpec};
pub use spider::{run_spider, select_best_candidate, Trace};
pub use verify::{check_sosp, min_eigenvalue, SospReport};
