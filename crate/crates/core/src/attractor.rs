//! Upper boundary `b(p)` of the pullback attractor, fiber classification from
//! the backward cocycle, section scans and the segment structure of coboundary
//! problems.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base_flow::BasePoint;
use crate::cocycle::{CocycleConfig, LinearCocycle, ZeroExponent};
use crate::error::{Error, Result};
use crate::solver::{Discretization, GridField, ProblemSpec, Stepper};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PullbackConfig {
    pub dt: f64,
    /// Initial level; `None` uses four times the invariant box.
    pub r_start: Option<f64>,
    pub t_initial: f64,
    pub t_cap: f64,
    pub cauchy_tol: f64,
    /// Allowed increase between successive pullback iterates, relative to
    /// the initial level.
    pub monotone_tol: f64,
}

impl Default for PullbackConfig {
    fn default() -> Self {
        Self { dt: 1e-3, r_start: None, t_initial: 50.0, t_cap: 800.0, cauchy_tol: 1e-4, monotone_tol: 1e-9 }
    }
}

impl PullbackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("pullback.dt must be positive, got {}", self.dt)));
        }
        if !(self.t_initial > 0.0 && self.t_cap >= self.t_initial) {
            return Err(Error::Config(format!(
                "pullback horizons need 0 < t_initial <= t_cap, got t_initial = {}, t_cap = {}",
                self.t_initial, self.t_cap
            )));
        }
        if let Some(r) = self.r_start {
            if !(r > 0.0) {
                return Err(Error::Config(format!("pullback.r_start must be positive, got {r}")));
            }
        }
        Ok(())
    }

    /// Pullback horizons: `t_initial` doubled up to `t_cap`.
    pub fn horizons(&self) -> Vec<f64> {
        let mut out = vec![self.t_initial];
        while *out.last().unwrap() < self.t_cap {
            let next = (2.0 * out.last().unwrap()).min(self.t_cap);
            out.push(next);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub zero_tol: f64,
    pub positive_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { zero_tol: 1e-3, positive_tol: 1e-2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FiberClass {
    Fine,
    Singular,
    Inconclusive,
}

impl FiberClass {
    pub fn name(&self) -> &'static str {
        match self {
            FiberClass::Fine => "fine",
            FiberClass::Singular => "singular",
            FiberClass::Inconclusive => "inconclusive",
        }
    }

    fn index(&self) -> usize {
        match self {
            FiberClass::Fine => 0,
            FiberClass::Singular => 1,
            FiberClass::Inconclusive => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pullback {
    pub b_field: GridField,
    pub horizon: f64,
    pub cauchy_gap: f64,
    pub converged: bool,
}

impl Pullback {
    pub fn b_norm(&self) -> f64 {
        self.b_field.sup_norm()
    }
}

fn resolve_r_start(prob: &ProblemSpec, cfg: &PullbackConfig) -> Result<f64> {
    match (cfg.r_start, prob.default_r_start()) {
        (Some(r), _) => Ok(r),
        (None, Some(r)) => Ok(r),
        (None, None) => Err(Error::Config("a pullback needs a nonlinearity (section g)".into())),
    }
}

/// `u(T, p.(-T), level z+)` for the doubling horizons of `cfg`, stopping once
/// successive iterates agree within `cauchy_tol`. Positive `level` gives the
/// upper boundary, negative the lower one.
pub fn pullback_from(disc: &Discretization, p: &BasePoint, prob: &ProblemSpec, cfg: &PullbackConfig, level: f64) -> Result<Pullback> {
    cfg.validate()?;
    let stepper = Stepper::new(disc, prob, cfg.dt)?;
    let z0 = GridField::constant(&disc.grid, level);
    let tol = cfg.monotone_tol * level.abs().max(1.0);
    let mut prev: Option<GridField> = None;
    let mut gap = f64::INFINITY;
    let mut last_t = 0.0;
    for t in cfg.horizons() {
        let b = stepper.evolve(&p.advance(-t), &z0, t)?;
        if let Some(pr) = &prev {
            let ordered = pr.values.iter().zip(&b.values).all(|(old, new)| {
                if level > 0.0 {
                    *new <= old + tol
                } else {
                    *new >= old - tol
                }
            });
            if !ordered {
                return Err(Error::SchemeViolation(format!(
                    "pullback iterates are not monotone in T at p = {:?} (horizon {t})",
                    p.theta
                )));
            }
            gap = b.distance(pr);
        }
        last_t = t;
        let done = gap < cfg.cauchy_tol;
        prev = Some(b);
        if done {
            break;
        }
    }
    Ok(Pullback { b_field: prev.expect("at least one horizon"), horizon: last_t, cauchy_gap: gap, converged: gap < cfg.cauchy_tol })
}

pub fn pullback_upper(disc: &Discretization, p: &BasePoint, prob: &ProblemSpec, cfg: &PullbackConfig) -> Result<Pullback> {
    let r = resolve_r_start(prob, cfg)?;
    pullback_from(disc, p, prob, cfg, r)
}

pub fn pullback_lower(disc: &Discretization, p: &BasePoint, prob: &ProblemSpec, cfg: &PullbackConfig) -> Result<Pullback> {
    let r = resolve_r_start(prob, cfg)?;
    pullback_from(disc, p, prob, cfg, -r)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberVerdict {
    pub class: FiberClass,
    pub backward_sup: f64,
    pub horizon: f64,
}

/// Fine if the backward sup of `ln c` over `t_max` stays below `m_bound` and
/// has saturated; Singular once it reaches `m_bound`.
pub fn classify_fiber(cocycle: &LinearCocycle<'_>, token: &ZeroExponent, p: &BasePoint) -> Result<FiberVerdict> {
    let cfg = cocycle.config();
    if cfg.m_bound.is_infinite() {
        return Ok(FiberVerdict { class: FiberClass::Fine, backward_sup: f64::NAN, horizon: 0.0 });
    }
    let (sup, near, horizon) = cocycle.backward_sup_escalating(token, p, cfg.t_max, cfg.m_bound)?;
    let class = if sup >= cfg.m_bound {
        FiberClass::Singular
    } else if sup - near < cfg.drift_fraction * cfg.m_bound {
        FiberClass::Fine
    } else {
        FiberClass::Inconclusive
    };
    Ok(FiberVerdict { class, backward_sup: sup, horizon })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttractorSample {
    pub base: BasePoint,
    pub b_field: GridField,
    pub b_norm: f64,
    pub min_b: f64,
    pub fiber_class: FiberClass,
    pub backward_sup: f64,
    pub pullback_horizon: f64,
    pub cauchy_gap: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ScanSummary {
    pub samples: usize,
    pub converged: usize,
    pub pinch_fraction: f64,
    pub fine: usize,
    pub singular: usize,
    pub inconclusive: usize,
    /// Rows: fine, singular, inconclusive. Columns: `b_norm < zero_tol`,
    /// between the thresholds, `b_norm >= positive_tol`.
    pub crosstab: [[usize; 3]; 3],
    /// Converged samples violating `Fine => b_norm >= positive_tol`.
    pub fine_band_violations: usize,
    /// Converged samples violating `Singular => b_norm < zero_tol`.
    pub singular_band_violations: usize,
    /// Converged samples violating `Fine => min b > 0` or
    /// `Singular => b_norm < zero_tol`.
    pub structure_violations: usize,
    /// Among converged samples, fraction where the fiber class matches the
    /// pullback verdict (`b_norm < zero_tol` singular, otherwise fine).
    pub agreement: f64,
}

impl ScanSummary {
    pub fn from_samples(samples: &[AttractorSample], th: &Thresholds) -> Self {
        let mut s = ScanSummary { samples: samples.len(), ..Default::default() };
        let mut pinched = 0;
        let mut agree = 0;
        for a in samples {
            let band = if a.b_norm < th.zero_tol {
                0
            } else if a.b_norm < th.positive_tol {
                1
            } else {
                2
            };
            if band == 0 {
                pinched += 1;
            }
            s.crosstab[a.fiber_class.index()][band] += 1;
            match a.fiber_class {
                FiberClass::Fine => s.fine += 1,
                FiberClass::Singular => s.singular += 1,
                FiberClass::Inconclusive => s.inconclusive += 1,
            }
            if !a.converged {
                continue;
            }
            s.converged += 1;
            let direct = if a.b_norm < th.zero_tol { FiberClass::Singular } else { FiberClass::Fine };
            if direct == a.fiber_class {
                agree += 1;
            }
            match a.fiber_class {
                FiberClass::Fine => {
                    if a.b_norm < th.positive_tol {
                        s.fine_band_violations += 1;
                    }
                    if a.min_b <= 0.0 {
                        s.structure_violations += 1;
                    }
                }
                FiberClass::Singular => {
                    if a.b_norm >= th.zero_tol {
                        s.singular_band_violations += 1;
                        s.structure_violations += 1;
                    }
                }
                FiberClass::Inconclusive => {}
            }
        }
        let n = samples.len().max(1) as f64;
        s.pinch_fraction = pinched as f64 / n;
        s.agreement = if s.converged > 0 { agree as f64 / s.converged as f64 } else { f64::NAN };
        s
    }
}

impl std::fmt::Display for ScanSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "samples={}", self.samples)?;
        writeln!(f, "converged={}", self.converged)?;
        writeln!(f, "pinch_fraction={}", self.pinch_fraction)?;
        writeln!(f, "fine={}", self.fine)?;
        writeln!(f, "singular={}", self.singular)?;
        writeln!(f, "inconclusive={}", self.inconclusive)?;
        for (name, row) in ["fine", "singular", "inconclusive"].iter().zip(&self.crosstab) {
            writeln!(f, "crosstab.{name}={},{},{}", row[0], row[1], row[2])?;
        }
        writeln!(f, "fine_band_violations={}", self.fine_band_violations)?;
        writeln!(f, "singular_band_violations={}", self.singular_band_violations)?;
        writeln!(f, "structure_violations={}", self.structure_violations)?;
        write!(f, "agreement={}", self.agreement)
    }
}

/// Everything a scan needs besides the sample list.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ScanConfig {
    pub pullback: PullbackConfig,
    pub cocycle: CocycleConfig,
    pub thresholds: Thresholds,
    /// Base point and horizon of the zero-exponent check; the horizon
    /// defaults to `cocycle.t_max`.
    pub certify_at: Option<(BasePoint, f64)>,
    pub jobs: usize,
}

pub(crate) fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Pullback of the full problem and fiber class of the zero-exponent
/// coefficient `h` for every sample.
pub fn scan_sections(
    disc: &Discretization,
    samples: &[BasePoint],
    prob: &ProblemSpec,
    cfg: &ScanConfig,
) -> Result<(Vec<AttractorSample>, ScanSummary)> {
    let cocycle = LinearCocycle::new(disc, &prob.h, cfg.cocycle.clone())?;
    let token = match (&cfg.certify_at, samples.first()) {
        (Some((q, t)), _) => Some(cocycle.certify_zero_exponent(q, *t)?),
        (None, Some(q)) => Some(cocycle.certify_zero_exponent(q, cfg.cocycle.t_max)?),
        (None, None) => None,
    };
    let Some(token) = token else {
        return Ok((Vec::new(), ScanSummary::from_samples(&[], &cfg.thresholds)));
    };
    let records: Vec<Result<AttractorSample>> = with_pool(cfg.jobs, || {
        samples
            .par_iter()
            .map(|p| {
                let pb = pullback_upper(disc, p, prob, &cfg.pullback)?;
                let verdict = classify_fiber(&cocycle, &token, p)?;
                Ok(AttractorSample {
                    base: *p,
                    b_norm: pb.b_norm(),
                    min_b: pb.b_field.min(),
                    b_field: pb.b_field,
                    fiber_class: verdict.class,
                    backward_sup: verdict.backward_sup,
                    pullback_horizon: pb.horizon,
                    cauchy_gap: pb.cauchy_gap,
                    converged: pb.converged,
                })
            })
            .collect()
    })?;
    let records = records.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = ScanSummary::from_samples(&records, &cfg.thresholds);
    Ok((records, summary))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    /// `|| b/||b|| - e/||e|| ||` in sup-norm, `e` the scaled principal
    /// direction `exp(K(p)) e(p)`.
    pub residual: f64,
    /// `| ||b|| - r_* max_x e(p) |`
    pub norm_defect: f64,
    pub r_star: f64,
    pub b_norm: f64,
    pub pullback: Pullback,
}

/// Compare `b(p)` with the segment endpoint `r_* e(p)` of a coboundary
/// problem at `gamma = 0`.
pub fn section_alignment(
    disc: &Discretization,
    p: &BasePoint,
    prob: &ProblemSpec,
    pull: &PullbackConfig,
    coc: &CocycleConfig,
    th: &Thresholds,
) -> Result<Alignment> {
    let Some(potential) = prob.h.potential() else {
        return Err(Error::Precondition("section alignment needs a coefficient built as a coboundary".into()));
    };
    if prob.gamma != 0.0 {
        return Err(Error::Precondition(format!("section alignment needs gamma = 0, got {}", prob.gamma)));
    }
    let Some(g) = &prob.g else {
        return Err(Error::Config("section alignment needs a nonlinearity".into()));
    };
    let pb = pullback_upper(disc, p, prob, pull)?;
    let b_norm = pb.b_norm();
    if b_norm < th.zero_tol {
        return Err(Error::Degenerate(format!("b(p) has norm {b_norm} below zero_tol {}", th.zero_tol)));
    }
    let cocycle = LinearCocycle::new(disc, &prob.h, coc.clone())?;
    let e = cocycle.principal_direction(p)?;
    let k_max = potential.max_on_torus();
    // e(q) has sup-norm one, so max_x of exp(K(q)) e(q) is exp(K(q))
    let r_star = g.dead_zone * (-k_max).exp();
    let scaled = e.scaled(potential.eval(&p.theta).exp());
    let residual = pb.b_field.scaled(1.0 / b_norm).distance(&e.scaled(1.0 / e.sup_norm()));
    let norm_defect = (b_norm - r_star * scaled.max()).abs();
    Ok(Alignment { residual, norm_defect, r_star, b_norm, pullback: pb })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearZone {
    /// `None` when no sample is Fine.
    pub fraction: Option<f64>,
    pub fine_count: usize,
}

/// Fraction of Fine samples whose boundary stays in the dead zone,
/// `b(p) <= r0 + tol` at every node.
pub fn linear_zone_fraction(samples: &[AttractorSample], prob: &ProblemSpec, tol: f64) -> Result<LinearZone> {
    if prob.gamma != 0.0 {
        return Err(Error::Precondition(format!("linear zone test needs gamma = 0, got {}", prob.gamma)));
    }
    let Some(g) = &prob.g else {
        return Err(Error::Config("linear zone test needs a nonlinearity".into()));
    };
    let fine: Vec<_> = samples.iter().filter(|s| s.fiber_class == FiberClass::Fine).collect();
    let inside = fine.iter().filter(|s| s.b_field.max() <= g.dead_zone + tol).count();
    Ok(LinearZone {
        fraction: (!fine.is_empty()).then(|| inside as f64 / fine.len() as f64),
        fine_count: fine.len(),
    })
}
