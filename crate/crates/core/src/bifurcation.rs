//! Sweeps of the parameter `gamma` through zero.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attractor::{pullback_upper, with_pool, PullbackConfig};
use crate::base_flow::BasePoint;
use crate::error::{Error, Result};
use crate::solver::{Discretization, ProblemSpec};

pub const DEFAULT_GAMMAS: [f64; 10] = [-1.0, -0.5, -0.1, -0.01, 0.0, 0.01, 0.05, 0.1, 0.5, 1.0];

/// Positive equilibrium of `y' = gamma y - k (y - r0)^3`: the root `b > r0` of
/// `gamma b = k (b - r0)^3`, by bisection.
pub fn homogeneous_oracle(gamma: f64, k: f64, r0: f64) -> f64 {
    assert!(gamma > 0.0 && k > 0.0 && r0 > 0.0, "homogeneous_oracle needs positive parameters");
    let f = |b: f64| k * (b - r0).powi(3) - gamma * b;
    let mut hi = r0 + 1.0;
    while f(hi) <= 0.0 {
        hi = r0 + 2.0 * (hi - r0);
    }
    let mut lo = r0;
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub gamma: f64,
    pub b_norm: f64,
    pub min_b: f64,
    pub converged: bool,
}

/// Right limit of `b_gamma` at zero extrapolated from the two smallest
/// positive `gamma`, assuming `b_gamma = b_0 + C gamma^(1/3)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RightLimit {
    pub extrapolated: f64,
    pub at_zero: Option<f64>,
    pub smallest_positive: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub records: Vec<SweepRecord>,
    pub right_limit: Option<RightLimit>,
}

impl Sweep {
    pub fn at(&self, gamma: f64) -> Option<&SweepRecord> {
        self.records.iter().find(|r| r.gamma == gamma)
    }
}

/// Pullback boundary at `p_ref` for each `gamma`. The norms must be
/// nondecreasing in `gamma` up to `tol`.
pub fn sweep(
    disc: &Discretization,
    gammas: &[f64],
    base: &ProblemSpec,
    p_ref: &BasePoint,
    cfg: &PullbackConfig,
    tol: f64,
    jobs: usize,
) -> Result<Sweep> {
    if gammas.is_empty() {
        return Err(Error::Config("bifurcation.gammas must not be empty".into()));
    }
    let mut gammas = gammas.to_vec();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    // one common initial level so that the comparison in gamma applies
    let r_start = match cfg.r_start {
        Some(r) => r,
        None => base
            .with_gamma(*gammas.last().unwrap())
            .default_r_start()
            .ok_or_else(|| Error::Config("a sweep needs a nonlinearity (section g)".into()))?,
    };
    let cfg = PullbackConfig { r_start: Some(r_start), ..cfg.clone() };
    let results: Vec<Result<SweepRecord>> = with_pool(jobs, || {
        gammas
            .par_iter()
            .map(|&g| {
                let pb = pullback_upper(disc, p_ref, &base.with_gamma(g), &cfg)?;
                Ok(SweepRecord { gamma: g, b_norm: pb.b_norm(), min_b: pb.b_field.min(), converged: pb.converged })
            })
            .collect()
    })?;
    let records = results.into_iter().collect::<Result<Vec<_>>>()?;
    for w in records.windows(2) {
        if w[1].b_norm < w[0].b_norm - tol {
            return Err(Error::SchemeViolation(format!(
                "b_norm decreases from {} at gamma = {} to {} at gamma = {}",
                w[0].b_norm, w[0].gamma, w[1].b_norm, w[1].gamma
            )));
        }
    }
    let positive: Vec<&SweepRecord> = records.iter().filter(|r| r.gamma > 0.0).collect();
    let right_limit = (positive.len() >= 2).then(|| {
        let (a, b) = (positive[0], positive[1]);
        let (ca, cb) = (a.gamma.cbrt(), b.gamma.cbrt());
        let c = (b.b_norm - a.b_norm) / (cb - ca);
        RightLimit {
            extrapolated: a.b_norm - c * ca,
            at_zero: records.iter().find(|r| r.gamma == 0.0).map(|r| r.b_norm),
            smallest_positive: a.b_norm,
        }
    });
    Ok(Sweep { records, right_limit })
}
