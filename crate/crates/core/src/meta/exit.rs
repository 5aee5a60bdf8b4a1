use serde::{Deserialize, Serialize};

use super::stats::{mean_se, ols, proportion, LinearFit};
use super::{EstimateMeta, Lab};
use crate::error::{Error, Result};
use crate::sim::{run_batch, Engine, HittingEvent, Outcome, SimConfig, StartSpec, TargetSet};

/// Largest tolerated fraction of timed-out trajectories for probabilities.
pub const TIMEOUT_LIMIT: f64 = 0.01;
/// Largest tolerated fraction of timed-out trajectories per exit-time level.
pub const EXIT_TIME_TIMEOUT_LIMIT: f64 = 0.10;

/// Two-sided exit probability from `Gamma_zeta` to `Gamma_kappa2` before
/// `Gamma_kappa1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitProbEstimate {
    pub surface_id: usize,
    pub gamma: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub zeta: f64,
    pub n_traj: usize,
    pub upper_hits: usize,
    pub timeouts: usize,
    pub probability: f64,
    pub std_error: f64,
    /// `(zeta^gamma - kappa1^gamma) / (kappa2^gamma - kappa1^gamma)`.
    pub predicted: f64,
    pub meta: EstimateMeta,
}

impl ExitProbEstimate {
    /// `|empirical - predicted|` in units of the standard error.
    pub fn z_score(&self) -> f64 {
        (self.probability - self.predicted).abs() / self.std_error
    }
}

pub fn predicted_exit_prob(gamma: f64, zeta: f64, kappa1: f64, kappa2: f64) -> f64 {
    (zeta.powf(gamma) - kappa1.powf(gamma)) / (kappa2.powf(gamma) - kappa1.powf(gamma))
}

/// Which functional form the exit-time fit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeFit {
    /// `ln E tau` against `ln(1/eps)`; the slope estimates `gamma`.
    PowerLaw,
    /// `E tau` against `ln(1/eps)` (repelling surfaces).
    Logarithmic,
}

/// Mean exit times from a small neighborhood of a surface to `Gamma_kappa`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeStats {
    pub surface_id: usize,
    pub gamma: f64,
    pub kappa: f64,
    pub eps: Vec<f64>,
    /// Starting level for each `eps`.
    pub start: Vec<f64>,
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub timeouts: Vec<usize>,
    pub fit_kind: TimeFit,
    pub fit: LinearFit,
    pub meta: EstimateMeta,
}

impl<'m> Lab<'m> {
    /// Starts `cfg.n_traj` trajectories on `Gamma_zeta` (uniform in the
    /// angles) and records which of `Gamma_kappa1`, `Gamma_kappa2` they
    /// reach first.
    pub fn exit_prob(&self, k: usize, zeta: f64, kappa1: f64, kappa2: f64, cfg: &SimConfig) -> Result<ExitProbEstimate> {
        Ok(self.exit_prob_events(k, zeta, kappa1, kappa2, cfg)?.0)
    }

    /// [`exit_prob`](Self::exit_prob) together with the raw hitting events;
    /// target 0 is `Gamma_kappa1` and target 1 is `Gamma_kappa2`.
    pub fn exit_prob_events(
        &self,
        k: usize,
        zeta: f64,
        kappa1: f64,
        kappa2: f64,
        cfg: &SimConfig,
    ) -> Result<(ExitProbEstimate, Vec<HittingEvent>)> {
        self.check_surface(k)?;
        if !(kappa1 > 0.0 && kappa1 <= zeta && zeta <= kappa2 && kappa1 < kappa2) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < kappa1 <= zeta <= kappa2 with kappa1 < kappa2, got ({kappa1}, {zeta}, {kappa2})"
            )));
        }
        let max = self.max_level(k);
        if kappa2 > max {
            return Err(Error::InvalidArgument(format!(
                "kappa2 = {kappa2} exceeds the largest level {max:.4} inside the chart"
            )));
        }
        let engine = Engine::new(self.model, cfg.clone())?;
        let mut targets = TargetSet::new(vec![self.radius(k).clone()]);
        targets.add(0, kappa1);
        let upper = targets.add(0, kappa2);
        let start = StartSpec::OnLevel {
            radius: self.radius(k).clone(),
            level: zeta,
        };
        let events = run_batch(&engine, &start, &targets)?;
        let timeouts = events.iter().filter(|e| e.outcome != Outcome::Hit).count();
        check_timeouts(timeouts, events.len(), TIMEOUT_LIMIT)?;
        let upper_hits = events.iter().filter(|e| e.target == Some(upper)).count();
        let (p, se) = proportion(upper_hits, events.len() - timeouts);
        let gamma = self.gamma(k);
        let est = ExitProbEstimate {
            surface_id: k,
            gamma,
            kappa1,
            kappa2,
            zeta,
            n_traj: events.len(),
            upper_hits,
            timeouts,
            probability: p,
            std_error: se,
            predicted: predicted_exit_prob(gamma, zeta, kappa1, kappa2),
            meta: cfg.into(),
        };
        Ok((est, events))
    }

    /// Mean first-passage time to `Gamma_kappa` for each `eps`, starting at
    /// `zeta = start_factor * eps`. Attracting surfaces are fitted with a
    /// power law in `1/eps`, repelling ones with an affine law in
    /// `ln(1/eps)`.
    pub fn exit_time_scaling(
        &self,
        k: usize,
        kappa: f64,
        eps: &[f64],
        start_factor: f64,
        cfg: &SimConfig,
    ) -> Result<ExitTimeStats> {
        self.check_surface(k)?;
        if eps.len() < 4 || eps.windows(2).any(|w| !(w[1] < w[0])) || eps.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::InvalidArgument(
                "need at least 4 positive, strictly decreasing eps values".into(),
            ));
        }
        if kappa > self.max_level(k) {
            return Err(Error::InvalidArgument(format!("kappa = {kappa} lies outside the chart")));
        }
        let gamma = self.gamma(k);
        let mut out = ExitTimeStats {
            surface_id: k,
            gamma,
            kappa,
            eps: eps.to_vec(),
            start: vec![],
            mean: vec![],
            std_error: vec![],
            timeouts: vec![],
            fit_kind: if gamma > 0.0 { TimeFit::PowerLaw } else { TimeFit::Logarithmic },
            fit: ols(&[0.0, 1.0], &[0.0, 0.0]),
            meta: cfg.into(),
        };
        for &e in eps {
            let level = start_factor * e;
            if !(level < kappa) {
                return Err(Error::InvalidArgument(format!(
                    "start level {level} is not below kappa = {kappa}"
                )));
            }
            let run_cfg = SimConfig { eps: e, ..cfg.clone() };
            let engine = Engine::new(self.model, run_cfg)?;
            let mut targets = TargetSet::new(vec![self.radius(k).clone()]);
            targets.add(0, kappa);
            let start = StartSpec::OnLevel {
                radius: self.radius(k).clone(),
                level,
            };
            let events = run_batch(&engine, &start, &targets)?;
            let timeouts = events.iter().filter(|e| e.outcome != Outcome::Hit).count();
            if timeouts as f64 > EXIT_TIME_TIMEOUT_LIMIT * events.len() as f64 {
                return Err(Error::TimeoutDominated {
                    eps: e,
                    timeouts,
                    total: events.len(),
                });
            }
            let times: Vec<f64> = events.iter().map(|e| e.time).collect();
            let (m, se) = mean_se(&times);
            out.start.push(level);
            out.mean.push(m);
            out.std_error.push(se);
            out.timeouts.push(timeouts);
        }
        let x: Vec<f64> = eps.iter().map(|e| (1.0 / e).ln()).collect();
        out.fit = match out.fit_kind {
            TimeFit::PowerLaw => ols(&x, &out.mean.iter().map(|m| m.ln()).collect::<Vec<_>>()),
            TimeFit::Logarithmic => ols(&x, &out.mean),
        };
        Ok(out)
    }
}

pub(crate) fn check_timeouts(timeouts: usize, total: usize, limit: f64) -> Result<()> {
    if timeouts as f64 > limit * total as f64 {
        return Err(Error::TooManyTimeouts {
            timeouts,
            total,
            limit_percent: 100.0 * limit,
        });
    }
    Ok(())
}
