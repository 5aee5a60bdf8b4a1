//! Trajectory engine for the unperturbed and perturbed processes: Heun
//! integration of the Stratonovich SDE, level-set hitting detection and
//! reproducible parallel batches.

pub mod batch;
pub mod engine;
pub mod level;
pub mod rng;

pub use batch::{parallel_map, run_batch, run_endpoints, worker_count, Endpoint, StartSpec, WORKERS_ENV};
pub use engine::{Engine, HittingEvent, Outcome, Scheme, SimConfig};
pub use level::{AdaptedRadius, LevelTarget, TargetSet};
pub use rng::{stream, stream_seed, TrajRng};

use crate::coeffs::Model;

/// Ito-equivalent drift correction
/// `1/2 sum_i (Dv_i) v_i(x) + 1/2 eps^2 sum_j (Dv~_j) v~_j(x)`.
pub fn strat_correction(model: &Model, x: &[f64], eps: f64) -> Vec<f64> {
    model.strat_correction(x, eps)
}
