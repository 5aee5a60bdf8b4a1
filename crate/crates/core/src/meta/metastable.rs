use serde::{Deserialize, Serialize};

use super::chain::{chain_hitting_distribution, ChainSpec};
use super::exit::{check_timeouts, TIMEOUT_LIMIT};
use super::histogram::{HistogramSpec, OccupationHistogram};
use super::stats::{mean_se, proportion};
use super::{EstimateMeta, Lab};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::sim::{run_batch, run_endpoints, stream, Engine, Outcome, SimConfig, StartSpec, TargetSet};
use crate::spectral::Classification;

/// Probe level for the unperturbed attraction events.
pub const KAPPA_PROBE: f64 = 1e-2;
/// Default ratio `r` between the neighborhood level and `eps`.
pub const DEFAULT_R: f64 = 10.0;
/// Default radius (in the adapted coordinate) of the surface weights.
pub const KAPPA_REPORT: f64 = 0.05;

/// Probabilities of settling near each attracting surface first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PxEstimate {
    pub x: Vec<f64>,
    /// Attracting surfaces, by decreasing exponent.
    pub surfaces: Vec<usize>,
    /// Level `zeta` whose sub-level sets define the events.
    pub level: f64,
    pub weights: Vec<f64>,
    pub std_error: Vec<f64>,
    pub timeouts: usize,
    /// Weights recomputed with the level halved, when requested.
    pub half_level_weights: Option<Vec<f64>>,
    pub meta: EstimateMeta,
}

impl PxEstimate {
    /// Largest change of a weight when the level is halved.
    pub fn sensitivity(&self) -> Option<f64> {
        self.half_level_weights.as_ref().map(|h| {
            h.iter()
                .zip(&self.weights)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
    }
}

/// Estimated transitions between attracting surfaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QMatrixEstimate {
    pub surfaces: Vec<usize>,
    pub eps: f64,
    pub r: f64,
    pub q: Vec<Vec<f64>>,
    pub std_error: Vec<Vec<f64>>,
    pub timeouts: Vec<usize>,
    /// The same estimate at `eps / 2`.
    pub half_eps: Option<Box<QMatrixEstimate>>,
    pub meta: EstimateMeta,
}

impl QMatrixEstimate {
    /// Largest `|q(eps) - q(eps/2)|` beyond three combined standard errors.
    pub fn drift(&self) -> Option<f64> {
        let h = self.half_eps.as_ref()?;
        let mut worst = 0.0f64;
        for i in 0..self.q.len() {
            for j in 0..self.q.len() {
                let s = (self.std_error[i][j].powi(2) + h.std_error[i][j].powi(2)).sqrt();
                worst = worst.max((self.q[i][j] - h.q[i][j]).abs() - 3.0 * s);
            }
        }
        Some(worst.max(0.0))
    }

    pub fn chain(&self, gammas: Vec<f64>, p0: Vec<f64>) -> ChainSpec {
        ChainSpec {
            gammas,
            q: self.q.clone(),
            p0,
        }
    }
}

/// Endpoint law of `X^eps_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetastableResult {
    pub x: Vec<f64>,
    pub t: f64,
    pub kappa_report: f64,
    /// Attracting surfaces, by decreasing exponent.
    pub surfaces: Vec<usize>,
    /// Mass with `zeta_k < kappa_report`.
    pub weights: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Mass near no attracting surface, including failed trajectories.
    pub unassigned: f64,
    pub failures: usize,
    /// Histogram of all endpoints.
    pub histogram: OccupationHistogram,
    pub meta: EstimateMeta,
}

/// One time-scale window `eps^-gamma_{l+1} << t << eps^-gamma_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleWindow {
    pub l: usize,
    /// `(gamma_{l+1}, gamma_l)`, with `gamma_{m+1} = 0`.
    pub exponents: (f64, f64),
    pub t: f64,
    pub predicted: Vec<f64>,
    pub empirical: Option<Vec<f64>>,
}

/// Predicted and measured weights across all windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetastableProfile {
    pub eps: f64,
    pub surfaces: Vec<usize>,
    pub windows: Vec<ScaleWindow>,
}

/// Long-run occupation of the unperturbed process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantMeasure {
    pub histogram: OccupationHistogram,
    /// `(threshold, fraction of time with min_k zeta_k < threshold)`.
    pub proximity: Vec<(f64, f64)>,
    pub burn_in: f64,
    pub duration: f64,
    pub meta: EstimateMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeynmanKacEstimate {
    pub x: Vec<f64>,
    pub t: f64,
    pub g: String,
    pub value: f64,
    pub std_error: f64,
    pub failures: usize,
    pub meta: EstimateMeta,
}

/// Representative time of window `l`: the geometric midpoint
/// `eps^-(gamma_{l+1} + gamma_l)/2` of the window.
pub fn representative_time(eps: f64, gammas: &[f64], l: usize) -> f64 {
    let hi = gammas[l - 1];
    let lo = gammas.get(l).copied().unwrap_or(0.0);
    eps.powf(-(lo + hi) / 2.0)
}

impl<'m> Lab<'m> {
    fn attracting_targets(&self, level: f64) -> Result<(Vec<usize>, TargetSet)> {
        let ids = self.attracting();
        if ids.is_empty() {
            return Err(Error::InvalidArgument("the model has no attracting surface".into()));
        }
        for &k in &ids {
            if level > self.max_level(k) {
                return Err(Error::InvalidArgument(format!(
                    "level {level} exceeds the chart of surface {k}"
                )));
            }
        }
        let mut targets = TargetSet::new(ids.iter().map(|&k| self.radius(k).clone()).collect());
        for i in 0..ids.len() {
            targets.add(i, level);
        }
        Ok((ids, targets))
    }

    /// Level used by [`p_x`](Self::p_x) by default: `kappa_probe` without
    /// perturbation, `r eps` otherwise.
    pub fn default_px_level(eps: f64) -> f64 {
        if eps > 0.0 {
            DEFAULT_R * eps
        } else {
            KAPPA_PROBE
        }
    }

    /// Frequencies with which trajectories from `x` first enter
    /// `{zeta_k < level}` for each attracting surface `k`.
    pub fn p_x(&self, x: &[f64], level: f64, with_sensitivity: bool, cfg: &SimConfig) -> Result<PxEstimate> {
        let (ids, weights, se, timeouts) = self.px_once(x, level, cfg)?;
        let half_level_weights = if with_sensitivity {
            Some(self.px_once(x, 0.5 * level, cfg)?.1)
        } else {
            None
        };
        Ok(PxEstimate {
            x: x.to_vec(),
            surfaces: ids,
            level,
            weights,
            std_error: se,
            timeouts,
            half_level_weights,
            meta: cfg.into(),
        })
    }

    #[allow(clippy::type_complexity)]
    fn px_once(&self, x: &[f64], level: f64, cfg: &SimConfig) -> Result<(Vec<usize>, Vec<f64>, Vec<f64>, usize)> {
        if x.len() != self.model.dim() {
            return Err(Error::InvalidArgument("start point has the wrong dimension".into()));
        }
        let (ids, targets) = self.attracting_targets(level)?;
        let m = ids.len();
        if let Some(i) = ids.iter().position(|&k| self.radius(k).zeta(x) <= level) {
            let mut w = vec![0.0; m];
            w[i] = 1.0;
            return Ok((ids, w, vec![0.0; m], 0));
        }
        let engine = Engine::new(self.model, cfg.clone())?;
        let events = run_batch(&engine, &StartSpec::Fixed(x.to_vec()), &targets)?;
        let timeouts = events.iter().filter(|e| e.outcome != Outcome::Hit).count();
        check_timeouts(timeouts, events.len(), TIMEOUT_LIMIT)?;
        let hits = events.len() - timeouts;
        let (w, se) = (0..m)
            .map(|i| proportion(events.iter().filter(|e| e.target == Some(i)).count(), hits))
            .unzip();
        Ok((ids, w, se, timeouts))
    }

    /// Transition frequencies between the `r eps` neighborhoods of the
    /// attracting surfaces, optionally repeated at `eps / 2`.
    ///
    /// Rows with a single possible destination are filled in without
    /// simulation.
    pub fn qmatrix(&self, r: f64, with_half: bool, cfg: &SimConfig) -> Result<QMatrixEstimate> {
        let mut est = self.qmatrix_once(r, cfg)?;
        if with_half {
            let half = SimConfig {
                eps: 0.5 * cfg.eps,
                ..cfg.clone()
            };
            est.half_eps = Some(Box::new(self.qmatrix_once(r, &half)?));
        }
        Ok(est)
    }

    fn qmatrix_once(&self, r: f64, cfg: &SimConfig) -> Result<QMatrixEstimate> {
        if !(cfg.eps > 0.0) {
            return Err(Error::InvalidArgument("the q-matrix protocol needs eps > 0".into()));
        }
        let level = r * cfg.eps;
        let (ids, _) = self.attracting_targets(level)?;
        let m = ids.len();
        if m < 2 {
            return Err(Error::InvalidArgument("need at least two attracting surfaces".into()));
        }
        for &k in &ids {
            if level >= 0.1 * self.max_level(k) {
                return Err(Error::InvalidArgument(format!(
                    "r eps = {level} is not below a tenth of the chart of surface {k}"
                )));
            }
        }
        let mut q = vec![vec![0.0; m]; m];
        let mut se = vec![vec![0.0; m]; m];
        let mut timeouts = vec![0; m];
        if m == 2 {
            q[0][1] = 1.0;
            q[1][0] = 1.0;
        } else {
            let engine = Engine::new(self.model, cfg.clone())?;
            for i in 0..m {
                let others: Vec<usize> = (0..m).filter(|&j| j != i).collect();
                let mut targets = TargetSet::new(others.iter().map(|&j| self.radius(ids[j]).clone()).collect());
                for n in 0..others.len() {
                    targets.add(n, level);
                }
                let start = StartSpec::OnLevel {
                    radius: self.radius(ids[i]).clone(),
                    level,
                };
                let events = run_batch(&engine, &start, &targets)?;
                let to = events.iter().filter(|e| e.outcome != Outcome::Hit).count();
                check_timeouts(to, events.len(), TIMEOUT_LIMIT)?;
                timeouts[i] = to;
                for (n, &j) in others.iter().enumerate() {
                    let c = events.iter().filter(|e| e.target == Some(n)).count();
                    (q[i][j], se[i][j]) = proportion(c, events.len() - to);
                }
            }
        }
        Ok(QMatrixEstimate {
            surfaces: ids,
            eps: cfg.eps,
            r,
            q,
            std_error: se,
            timeouts,
            half_eps: None,
            meta: cfg.into(),
        })
    }

    /// Law of `X^eps_t` from `x`: weights within `kappa_report` of each
    /// attracting surface and a histogram of all endpoints.
    pub fn metastable_distribution(
        &self,
        x: &[f64],
        t: f64,
        kappa_report: f64,
        hist: &HistogramSpec,
        cfg: &SimConfig,
    ) -> Result<MetastableResult> {
        if !(t > 0.0) || !(t <= cfg.t_max) {
            return Err(Error::InvalidArgument(format!("need 0 < t <= t_max, got t = {t}")));
        }
        hist.validate(self.model.dim())?;
        let ids = self.attracting();
        let engine = Engine::new(self.model, cfg.clone())?;
        let ends = run_endpoints(&engine, &StartSpec::Fixed(x.to_vec()), t)?;
        let n = ends.len();
        let mut counts = vec![0usize; ids.len()];
        let mut histogram = OccupationHistogram::new(hist.clone());
        let mut failures = 0;
        for e in &ends {
            if !e.ok {
                failures += 1;
                histogram.overflow += 1.0;
                histogram.samples += 1;
                continue;
            }
            histogram.add(&e.state, 1.0);
            if let Some(i) = ids.iter().position(|&k| self.radius(k).zeta(&e.state) < kappa_report) {
                counts[i] += 1;
            }
        }
        histogram.normalize();
        let (weights, std_error): (Vec<f64>, Vec<f64>) = counts.iter().map(|&c| proportion(c, n)).unzip();
        Ok(MetastableResult {
            x: x.to_vec(),
            t,
            kappa_report,
            surfaces: ids,
            unassigned: 1.0 - weights.iter().sum::<f64>(),
            weights,
            std_error,
            failures,
            histogram,
            meta: cfg.into(),
        })
    }

    /// Predicted weights in every window from the chain, and (when
    /// `simulate`) the measured weights at each representative time.
    pub fn metastable_profile(
        &self,
        x: &[f64],
        chain: &ChainSpec,
        kappa_report: f64,
        simulate: bool,
        cfg: &SimConfig,
    ) -> Result<MetastableProfile> {
        chain.validate()?;
        let ids = self.attracting();
        if ids.len() != chain.len() {
            return Err(Error::InvalidArgument(
                "chain size differs from the number of attracting surfaces".into(),
            ));
        }
        let mut windows = vec![];
        for l in 1..=chain.len() {
            let t = representative_time(cfg.eps, &chain.gammas, l);
            let mut predicted = chain_hitting_distribution(chain, l)?;
            predicted.resize(chain.len(), 0.0);
            let empirical = if simulate {
                let run = SimConfig {
                    t_max: cfg.t_max.max(t),
                    ..cfg.clone()
                };
                let spec = HistogramSpec::square(self.model.domain_radius(), 1);
                Some(self.metastable_distribution(x, t, kappa_report, &spec, &run)?.weights)
            } else {
                None
            };
            windows.push(ScaleWindow {
                l,
                exponents: (chain.gammas.get(l).copied().unwrap_or(0.0), chain.gammas[l - 1]),
                t,
                predicted,
                empirical,
            });
        }
        Ok(MetastableProfile {
            eps: cfg.eps,
            surfaces: ids,
            windows,
        })
    }

    /// Time-averaged occupation of one unperturbed trajectory from `x0`
    /// over `[burn_in, burn_in + duration]`.
    pub fn invariant_measure(
        &self,
        x0: &[f64],
        burn_in: f64,
        duration: f64,
        hist: &HistogramSpec,
        thresholds: &[f64],
        cfg: &SimConfig,
    ) -> Result<InvariantMeasure> {
        if self
            .solutions
            .iter()
            .any(|s| s.classification != Classification::Repelling)
        {
            return Err(Error::InvalidArgument(
                "the invariant measure needs all surfaces repelling".into(),
            ));
        }
        if self.model.confinement().is_none() {
            return Err(Error::InvalidArgument("the invariant measure needs confinement".into()));
        }
        hist.validate(self.model.dim())?;
        let run = SimConfig {
            eps: 0.0,
            ..cfg.clone()
        };
        let engine = Engine::new(self.model, run.clone())?;
        let mut rng = stream(cfg.seed, 0);
        let start = engine.run_for(x0, burn_in, &mut rng, |_, _, _| {})?;
        let mut histogram = OccupationHistogram::new(hist.clone());
        let mut near = vec![0.0; thresholds.len()];
        let mut total = 0.0;
        engine.run_for(&start, duration, &mut rng, |_, h, x| {
            histogram.add(x, h);
            let z = self.radii.iter().map(|r| r.zeta(x)).fold(f64::INFINITY, f64::min);
            for (n, th) in near.iter_mut().zip(thresholds) {
                if z < *th {
                    *n += h;
                }
            }
            total += h;
        })?;
        histogram.normalize();
        Ok(InvariantMeasure {
            histogram,
            proximity: thresholds.iter().zip(&near).map(|(t, n)| (*t, n / total)).collect(),
            burn_in,
            duration,
            meta: (&run).into(),
        })
    }

    /// Monte Carlo value of `u(t, x) = E_x g(X^eps_t)`.
    pub fn feynman_kac(&self, x: &[f64], t: f64, g: &Expr, cfg: &SimConfig) -> Result<FeynmanKacEstimate> {
        if g.max_variable().is_some_and(|v| v >= self.model.dim()) {
            return Err(Error::InvalidArgument(format!(
                "`{}` uses a coordinate beyond the dimension",
                g.source()
            )));
        }
        let run = SimConfig {
            t_max: cfg.t_max.max(t),
            ..cfg.clone()
        };
        let engine = Engine::new(self.model, run.clone())?;
        let ends = run_endpoints(&engine, &StartSpec::Fixed(x.to_vec()), t)?;
        let values: Vec<f64> = ends.iter().filter(|e| e.ok).map(|e| g.eval(&e.state)).collect();
        let (value, std_error) = mean_se(&values);
        Ok(FeynmanKacEstimate {
            x: x.to_vec(),
            t,
            g: g.source().to_string(),
            value,
            std_error: if std_error.is_nan() { 0.0 } else { std_error },
            failures: ends.len() - values.len(),
            meta: (&run).into(),
        })
    }
}
