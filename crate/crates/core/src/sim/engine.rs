use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::level::TargetSet;
use crate::coeffs::Model;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Stratonovich predictor-corrector; the same increments drive both
    /// stages.
    Heun,
    /// Euler-Maruyama on the Ito form (drift plus `1/2 sum (Dv_i) v_i`).
    EulerCorrected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub eps: f64,
    pub dt: f64,
    pub t_max: f64,
    pub scheme: Scheme,
    pub seed: u64,
    pub n_traj: usize,
    pub adaptive: bool,
    /// Worker threads; `None` uses `METALAB_WORKERS` or all cores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Trajectories leaving `|x|_inf <= bounding_box` are flagged.
    pub bounding_box: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            eps: 0.0,
            dt: 1e-3,
            t_max: 100.0,
            scheme: Scheme::Heun,
            seed: 1,
            n_traj: 1000,
            adaptive: true,
            workers: None,
            bounding_box: 1e6,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.t_max > 0.0) || !(self.eps >= 0.0) || !(self.bounding_box > 0.0) {
            return Err(Error::InvalidArgument(
                "dt, t_max and bounding_box must be positive and eps non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Hit,
    Timeout,
    /// The state left the bounding box or became non-finite.
    NonFinite,
}

/// First-passage record of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingEvent {
    pub index: usize,
    pub outcome: Outcome,
    /// Id of the target that was hit.
    pub target: Option<usize>,
    /// Hit time, interpolated within the step; the stopping time otherwise.
    pub time: f64,
    pub state: Vec<f64>,
    /// Adapted radius of the hit target at `state` (NaN without a hit).
    pub zeta: f64,
}

/// Scratch buffers reused across steps.
struct Work {
    f0: Vec<f64>,
    f1: Vec<f64>,
    g0: Vec<f64>,
    g1: Vec<f64>,
    gt0: Vec<f64>,
    gt1: Vec<f64>,
    xbar: Vec<f64>,
    xin: Vec<f64>,
    dw: Vec<f64>,
    dwt: Vec<f64>,
    scratch: Vec<f64>,
}

/// Integrator for `X^eps`.
#[derive(Debug, Clone)]
pub struct Engine<'m> {
    model: &'m Model,
    cfg: SimConfig,
    d: usize,
    n: usize,
    np: usize,
}

impl<'m> Engine<'m> {
    pub fn new(model: &'m Model, cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.eps > 0.0 && !model.has_perturbation() {
            return Err(Error::InvalidArgument(
                "eps > 0 requires perturbation fields (fields.v_tilde)".into(),
            ));
        }
        let np = if cfg.eps > 0.0 { model.n_pert_noise() } else { 0 };
        Ok(Self {
            d: model.dim(),
            n: model.n_noise(),
            np,
            model,
            cfg,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn model(&self) -> &Model {
        self.model
    }

    fn work(&self) -> Work {
        let (d, n, np) = (self.d, self.n, self.np);
        Work {
            f0: vec![0.0; d],
            f1: vec![0.0; d],
            g0: vec![0.0; n * d],
            g1: vec![0.0; n * d],
            gt0: vec![0.0; np * d],
            gt1: vec![0.0; np * d],
            xbar: vec![0.0; d],
            xin: vec![0.0; d],
            dw: vec![0.0; n],
            dwt: vec![0.0; np],
            scratch: vec![0.0; d],
        }
    }

    #[inline]
    fn eval(&self, x: &[f64], f: &mut [f64], g: &mut [f64], gt: &mut [f64], scratch: &mut [f64]) {
        let d = self.d;
        self.model.drift(x, self.cfg.eps, f, scratch);
        for i in 0..self.n {
            self.model.v(i + 1).eval(x, &mut g[i * d..(i + 1) * d]);
        }
        for j in 0..self.np {
            self.model
                .v_tilde(j + 1)
                .expect("perturbation field")
                .eval(x, &mut gt[j * d..(j + 1) * d]);
        }
    }

    /// Step size at `x` given the coefficients already evaluated there.
    #[inline]
    fn step_size(&self, x: &[f64], w: &Work, remaining: f64) -> f64 {
        let mut h = self.cfg.dt.min(remaining);
        if !self.cfg.adaptive {
            return h;
        }
        let zmin = self
            .model
            .surfaces()
            .iter()
            .map(|s| s.distance(x))
            .fold(f64::INFINITY, f64::min);
        let threshold = if self.cfg.eps > 0.0 { 10.0 * self.cfg.eps } else { 1e-3 };
        if zmin < threshold {
            let eps2 = self.cfg.eps * self.cfg.eps;
            let g2: f64 = w.g0.iter().map(|v| v * v).sum::<f64>()
                + eps2 * w.gt0.iter().map(|v| v * v).sum::<f64>();
            let f = w.f0.iter().map(|v| v * v).sum::<f64>().sqrt();
            if g2 > 0.0 {
                h = h.min(0.01 * zmin * zmin / g2);
            }
            if f > 0.0 {
                h = h.min(0.1 * zmin / f);
            }
            h = h.max(1e-12).min(remaining);
        }
        h
    }

    /// Advances `x` by one step of size chosen from the current state;
    /// returns the step taken.
    #[inline]
    fn advance<R: Rng>(&self, x: &mut [f64], remaining: f64, rng: &mut R, w: &mut Work) -> f64 {
        {
            let Work { f0, g0, gt0, scratch, .. } = w;
            self.eval(x, f0, g0, gt0, scratch);
        }
        let h = self.step_size(x, w, remaining);
        let sq = h.sqrt();
        for v in w.dw.iter_mut() {
            *v = sq * rng.sample::<f64, _>(StandardNormal);
        }
        for v in w.dwt.iter_mut() {
            *v = sq * rng.sample::<f64, _>(StandardNormal);
        }
        let mut xin = std::mem::take(&mut w.xin);
        xin.copy_from_slice(x);
        self.apply(&xin, h, w, x);
        w.xin = xin;
        h
    }

    /// One step from `x` with prescribed Wiener increments (`dw` for the
    /// unperturbed noise, `dwt` for the perturbation).
    pub fn step_with(&self, x: &[f64], h: f64, dw: &[f64], dwt: &[f64]) -> Vec<f64> {
        let mut w = self.work();
        {
            let Work { f0, g0, gt0, scratch, .. } = &mut w;
            self.eval(x, f0, g0, gt0, scratch);
        }
        w.dw.copy_from_slice(&dw[..self.n]);
        w.dwt.copy_from_slice(&dwt[..self.np]);
        let mut out = x.to_vec();
        self.apply(x, h, &mut w, &mut out);
        out
    }

    /// Writes the step from `x` into `out`, given the coefficients at `x`
    /// and the increments stored in `w`.
    #[inline]
    fn apply(&self, x: &[f64], h: f64, w: &mut Work, out: &mut [f64]) {
        let d = self.d;
        let eps = self.cfg.eps;
        match self.cfg.scheme {
            Scheme::Heun => {
                for k in 0..d {
                    let mut s = x[k] + w.f0[k] * h;
                    for i in 0..self.n {
                        s += w.g0[i * d + k] * w.dw[i];
                    }
                    for j in 0..self.np {
                        s += eps * w.gt0[j * d + k] * w.dwt[j];
                    }
                    w.xbar[k] = s;
                }
                {
                    let Work { xbar, f1, g1, gt1, scratch, .. } = w;
                    self.eval(xbar, f1, g1, gt1, scratch);
                }
                for k in 0..d {
                    let mut s = 0.5 * (w.f0[k] + w.f1[k]) * h;
                    for i in 0..self.n {
                        s += 0.5 * (w.g0[i * d + k] + w.g1[i * d + k]) * w.dw[i];
                    }
                    for j in 0..self.np {
                        s += 0.5 * eps * (w.gt0[j * d + k] + w.gt1[j * d + k]) * w.dwt[j];
                    }
                    out[k] = x[k] + s;
                }
            }
            Scheme::EulerCorrected => {
                let corr = self.model.strat_correction(x, eps);
                for k in 0..d {
                    let mut s = (w.f0[k] + corr[k]) * h;
                    for i in 0..self.n {
                        s += w.g0[i * d + k] * w.dw[i];
                    }
                    for j in 0..self.np {
                        s += eps * w.gt0[j * d + k] * w.dwt[j];
                    }
                    out[k] = x[k] + s;
                }
            }
        }
    }

    #[inline]
    fn escaped(&self, x: &[f64]) -> bool {
        x.iter().any(|v| !v.is_finite() || v.abs() > self.cfg.bounding_box)
    }

    /// Runs until the first crossing of any target level set, the time cap,
    /// or a blow-up.
    pub fn run_until_hit<R: Rng>(&self, index: usize, x0: &[f64], targets: &TargetSet, rng: &mut R) -> HittingEvent {
        let nr = targets.radii.len();
        let mut zp = vec![0.0; nr];
        let mut zn = vec![0.0; nr];
        targets.zetas(x0, &mut zp);
        for (id, t) in targets.targets.iter().enumerate() {
            if (zp[t.radius] - t.level).abs() <= 1e-12 {
                return HittingEvent {
                    index,
                    outcome: Outcome::Hit,
                    target: Some(id),
                    time: 0.0,
                    state: x0.to_vec(),
                    zeta: zp[t.radius],
                };
            }
        }
        let mut w = self.work();
        let mut x = x0.to_vec();
        let mut xp = x0.to_vec();
        let mut t = 0.0;
        while t < self.cfg.t_max {
            xp.copy_from_slice(&x);
            let h = self.advance(&mut x, self.cfg.t_max - t, rng, &mut w);
            if self.escaped(&x) {
                return HittingEvent {
                    index,
                    outcome: Outcome::NonFinite,
                    target: None,
                    time: t + h,
                    state: x,
                    zeta: f64::NAN,
                };
            }
            targets.zetas(&x, &mut zn);
            let mut best: Option<(f64, usize)> = None;
            for (id, tg) in targets.targets.iter().enumerate() {
                let a = zp[tg.radius] - tg.level;
                let b = zn[tg.radius] - tg.level;
                if a * b <= 0.0 || (a.is_infinite() != b.is_infinite() && (a < 0.0 || b < 0.0)) {
                    let s = if a.is_finite() && b.is_finite() && a != b {
                        (a / (a - b)).clamp(0.0, 1.0)
                    } else {
                        1.0
                    };
                    if best.is_none_or(|(bs, _)| s < bs) {
                        best = Some((s, id));
                    }
                }
            }
            if let Some((s, id)) = best {
                let state: Vec<f64> = xp.iter().zip(&x).map(|(p, q)| p + s * (q - p)).collect();
                let tg = targets.targets[id];
                let zeta = targets.radii[tg.radius].zeta(&state);
                return HittingEvent {
                    index,
                    outcome: Outcome::Hit,
                    target: Some(id),
                    time: t + s * h,
                    state,
                    zeta,
                };
            }
            std::mem::swap(&mut zp, &mut zn);
            t += h;
        }
        HittingEvent {
            index,
            outcome: Outcome::Timeout,
            target: None,
            time: self.cfg.t_max,
            state: x,
            zeta: f64::NAN,
        }
    }

    /// Integrates for time `t`, calling `observe(t, h, x)` after every step
    /// of size `h`. Returns the final state.
    pub fn run_for<R: Rng>(
        &self,
        x0: &[f64],
        t_end: f64,
        rng: &mut R,
        mut observe: impl FnMut(f64, f64, &[f64]),
    ) -> Result<Vec<f64>> {
        let mut w = self.work();
        let mut x = x0.to_vec();
        let mut t = 0.0;
        while t < t_end {
            let h = self.advance(&mut x, t_end - t, rng, &mut w);
            t += h;
            if self.escaped(&x) {
                return Err(Error::NonFinite { time: t });
            }
            observe(t, h, &x);
        }
        Ok(x)
    }
}
