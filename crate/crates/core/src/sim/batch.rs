use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::{Engine, HittingEvent};
use super::level::{AdaptedRadius, TargetSet};
use super::rng::stream;
use crate::error::{Error, Result};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "METALAB_WORKERS";

/// Worker count: explicit setting, else `METALAB_WORKERS`, else all cores.
pub fn worker_count(explicit: Option<usize>) -> usize {
    if let Some(w) = explicit {
        return w.max(1);
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        if let Ok(w) = v.trim().parse::<usize>() {
            return w.max(1);
        }
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Maps `f` over `0..n` on a pool of `workers` threads, returning results
/// in index order.
pub fn parallel_map<T, F>(n: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if workers <= 1 {
        return Ok((0..n).map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
}

/// Initial condition of every trajectory in a batch.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum StartSpec {
    Fixed(Vec<f64>),
    /// Uniform in the angles on `{zeta = level}`.
    OnLevel { radius: AdaptedRadius, level: f64 },
}

/// Final state of a fixed-horizon run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    pub index: usize,
    pub state: Vec<f64>,
    /// False when the trajectory blew up; `state` is then meaningless.
    pub ok: bool,
}

/// Runs `n_traj` independent trajectories to the first target crossing.
pub fn run_batch(engine: &Engine<'_>, start: &StartSpec, targets: &TargetSet) -> Result<Vec<HittingEvent>> {
    let cfg = engine.config();
    parallel_map(cfg.n_traj, worker_count(cfg.workers), |i| {
        let mut rng = stream(cfg.seed, i as u64);
        let x0 = match start {
            StartSpec::Fixed(x) => x.clone(),
            StartSpec::OnLevel { radius, level } => radius.sample_on_level(*level, &mut rng),
        };
        engine.run_until_hit(i, &x0, targets, &mut rng)
    })
}

/// Runs `n_traj` trajectories for time `t` and collects the endpoints.
pub fn run_endpoints(engine: &Engine<'_>, start: &StartSpec, t: f64) -> Result<Vec<Endpoint>> {
    let cfg = engine.config();
    parallel_map(cfg.n_traj, worker_count(cfg.workers), |i| {
        let mut rng = stream(cfg.seed, i as u64);
        let x0 = match start {
            StartSpec::Fixed(x) => x.clone(),
            StartSpec::OnLevel { radius, level } => radius.sample_on_level(*level, &mut rng),
        };
        match engine.run_for(&x0, t, &mut rng, |_, _, _| {}) {
            Ok(state) => Endpoint { index: i, state, ok: true },
            Err(_) => Endpoint {
                index: i,
                state: vec![f64::NAN; x0.len()],
                ok: false,
            },
        }
    })
}
