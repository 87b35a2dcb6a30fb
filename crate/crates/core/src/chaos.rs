//! Li-Yorke pair statistics on attractor fibers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attractor::{with_pool, AttractorSample, FiberClass, Thresholds};
use crate::base_flow::BasePoint;
use crate::error::{Error, Result};
use crate::solver::{Discretization, GridField, ProblemSpec, Stepper};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChaosConfig {
    pub dt: f64,
    pub horizon: f64,
    pub window: f64,
    /// Distance sampling interval, a multiple of `dt`.
    pub sample_every: f64,
    pub threshold_lo: f64,
    /// `None` uses a tenth of the median `b_norm` of the Fine samples.
    pub threshold_hi: Option<f64>,
}

impl Default for ChaosConfig {
    fn default() -> Self {
        Self { dt: 1e-3, horizon: 2000.0, window: 50.0, sample_every: 0.1, threshold_lo: 0.05, threshold_hi: None }
    }
}

impl ChaosConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window > 0.0 && self.horizon >= 10.0 * self.window) {
            return Err(Error::Config(format!(
                "chaos.horizon = {} must be at least ten windows (window = {})",
                self.horizon, self.window
            )));
        }
        if !(self.dt > 0.0 && self.sample_every >= self.dt) {
            return Err(Error::Config(format!(
                "chaos.sample_every = {} must be at least dt = {}",
                self.sample_every, self.dt
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub liminf_est: f64,
    pub limsup_est: f64,
    pub horizon: f64,
    pub window: f64,
}

/// Joint forward run of two initial fields over the same fiber. Over the
/// last half, the sampled distances are cut into windows; the estimates are
/// the smallest window minimum and the largest window maximum.
pub fn liyorke_stats(
    disc: &Discretization,
    p: &BasePoint,
    z1: &GridField,
    z2: &GridField,
    prob: &ProblemSpec,
    cfg: &ChaosConfig,
) -> Result<PairStats> {
    cfg.validate()?;
    if let Some(bound) = prob.default_r_start() {
        if z1.sup_norm().max(z2.sup_norm()) > bound {
            return Err(Error::Precondition(format!("pair fields exceed the attracting level {bound}")));
        }
    }
    let stepper = Stepper::new(disc, prob, cfg.dt)?;
    let every = (cfg.sample_every / cfg.dt).round().max(1.0) as usize;
    let n_steps = crate::solver::step_count(cfg.horizon, cfg.dt);
    let half = 0.5 * cfg.horizon;
    let mut window_min: Vec<f64> = Vec::new();
    let mut window_max: Vec<f64> = Vec::new();
    let mut states = [z1.values.clone(), z2.values.clone()];
    let mut record = |time: f64, st: &[Vec<f64>]| {
        if time < half - 1e-9 {
            return;
        }
        let d = st[0].iter().zip(&st[1]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let w = (((time - half) / cfg.window) + 1e-9).floor() as usize;
        if w >= window_min.len() {
            window_min.resize(w + 1, f64::INFINITY);
            window_max.resize(w + 1, 0.0);
        }
        window_min[w] = window_min[w].min(d);
        window_max[w] = window_max[w].max(d);
    };
    if n_steps == 0 {
        record(0.0, &states);
    }
    stepper.run(p, 0.0, n_steps, &mut states, every, |_, time, st| {
        record(time, st);
        Ok(true)
    })?;
    let liminf = window_min.iter().copied().fold(f64::INFINITY, f64::min);
    let limsup = window_max.iter().copied().fold(0.0, f64::max);
    Ok(PairStats { liminf_est: if liminf.is_finite() { liminf } else { 0.0 }, limsup_est: limsup, horizon: cfg.horizon, window: cfg.window })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChaosRecord {
    pub base: BasePoint,
    pub stats: Option<PairStats>,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChaosScan {
    pub records: Vec<ChaosRecord>,
    /// Flagged fraction among Fine fibers; `None` without Fine fibers.
    pub fraction: Option<f64>,
    pub fine_count: usize,
    pub threshold_hi: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// For each Fine fiber with a nondegenerate boundary, test the pair
/// `(b/3, 2b/3)`: flagged if `liminf < threshold_lo * limsup` and
/// `limsup > threshold_hi`. Fibers whose boundary is below `zero_tol` carry
/// no pair and are never flagged.
pub fn fiber_chaos_scan(
    disc: &Discretization,
    samples: &[AttractorSample],
    prob: &ProblemSpec,
    cfg: &ChaosConfig,
    th: &Thresholds,
    jobs: usize,
) -> Result<ChaosScan> {
    cfg.validate()?;
    let fine: Vec<&AttractorSample> = samples.iter().filter(|s| s.fiber_class == FiberClass::Fine).collect();
    let threshold_hi = cfg.threshold_hi.unwrap_or_else(|| 0.1 * median(fine.iter().map(|s| s.b_norm).collect()));
    let results: Vec<Result<ChaosRecord>> = with_pool(jobs, || {
        samples
            .par_iter()
            .map(|s| {
                if s.fiber_class != FiberClass::Fine || s.b_norm < th.zero_tol {
                    return Ok(ChaosRecord { base: s.base, stats: None, flagged: false });
                }
                let z1 = s.b_field.scaled(1.0 / 3.0);
                let z2 = s.b_field.scaled(2.0 / 3.0);
                let st = liyorke_stats(disc, &s.base, &z1, &z2, prob, cfg)?;
                let flagged = st.liminf_est < cfg.threshold_lo * st.limsup_est && st.limsup_est > threshold_hi;
                Ok(ChaosRecord { base: s.base, stats: Some(st), flagged })
            })
            .collect()
    })?;
    let records = results.into_iter().collect::<Result<Vec<_>>>()?;
    let flagged = records.iter().filter(|r| r.flagged).count();
    Ok(ChaosScan {
        fraction: (!fine.is_empty()).then(|| flagged as f64 / fine.len() as f64),
        fine_count: fine.len(),
        records,
        threshold_hi,
    })
}
