//! The scalar cocycle `c(t, p)` along the principal direction, the upper
//! Lyapunov exponent, backward suprema and the bounded/unbounded test.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::base_flow::BasePoint;
use crate::coefficients::LinearCoefficientSpec;
use crate::error::{Error, Result};
use crate::solver::{Discretization, GridField, Stepper};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CocycleConfig {
    /// Solver step.
    pub dt: f64,
    /// Record and renormalization interval, a multiple of `dt`.
    pub dt_rec: f64,
    /// Spin-up horizon of the principal direction.
    pub t_spin: f64,
    /// Largest exponent accepted as zero.
    pub exponent_tol: f64,
    pub t_max: f64,
    pub m_bound: f64,
    /// Largest growth of the backward sup over the second half of the
    /// horizon for which the sup counts as saturated, relative to `m_bound`.
    pub drift_fraction: f64,
}

impl Default for CocycleConfig {
    fn default() -> Self {
        Self { dt: 1e-3, dt_rec: 0.1, t_spin: 10.0, exponent_tol: 5e-3, t_max: 1e4, m_bound: 3.0, drift_fraction: 0.1 }
    }
}

impl CocycleConfig {
    pub fn record_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt_rec > 0.0) {
            return Err(Error::Config(format!("cocycle.dt and cocycle.dt_rec must be positive (dt = {}, dt_rec = {})", self.dt, self.dt_rec)));
        }
        let k = (self.dt_rec / self.dt).round();
        if k < 1.0 || (k * self.dt - self.dt_rec).abs() > 1e-9 * self.dt_rec {
            return Err(Error::Config(format!(
                "cocycle.dt_rec = {} must be a whole multiple of dt = {}",
                self.dt_rec, self.dt
            )));
        }
        Ok(k as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.record_steps()?;
        for (name, v) in [("cocycle.t_spin", self.t_spin), ("cocycle.t_max", self.t_max), ("cocycle.exponent_tol", self.exponent_tol)] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.m_bound > 0.0) {
            return Err(Error::Config(format!("cocycle.m_bound must be positive, got {}", self.m_bound)));
        }
        Ok(())
    }
}

/// `ln c(t, p)` at the record times `k dt_rec`.
#[derive(Clone, Debug, PartialEq)]
pub struct CocycleTrace {
    pub base: BasePoint,
    pub times: Vec<f64>,
    pub log_c: Vec<f64>,
    pub spin_up: f64,
    pub dt_rec: f64,
}

impl CocycleTrace {
    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn last(&self) -> f64 {
        *self.log_c.last().unwrap_or(&0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    pub value: f64,
    pub horizon: f64,
    /// `|estimate(T) - estimate(T/2)|`
    pub convergence_gap: f64,
}

impl std::fmt::Display for ExponentEstimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "value={}\nhorizon={}\ngap={}", self.value, self.horizon, self.convergence_gap)
    }
}

/// Evidence that the exponent of one coefficient vanishes, required by the
/// analyses that only make sense at zero exponent.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroExponent {
    pub estimate: ExponentEstimate,
    fingerprint: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundedness {
    Bounded,
    Unbounded,
    Inconclusive,
}

fn fingerprint(h: &LinearCoefficientSpec, disc: &Discretization) -> u64 {
    let mut s = DefaultHasher::new();
    format!("{h:?}|{:?}|{}", disc.bc, disc.grid.n_cells).hash(&mut s);
    s.finish()
}

/// The linear problem for one `h`, ready to produce cocycle data.
pub struct LinearCocycle<'a> {
    stepper: Stepper<'a>,
    cfg: CocycleConfig,
    rec_steps: usize,
    fingerprint: u64,
}

impl<'a> LinearCocycle<'a> {
    pub fn new(disc: &'a Discretization, h: &LinearCoefficientSpec, cfg: CocycleConfig) -> Result<Self> {
        cfg.validate()?;
        let rec_steps = cfg.record_steps()?;
        Ok(Self { stepper: Stepper::linear(disc, h, cfg.dt)?, cfg, rec_steps, fingerprint: fingerprint(h, disc) })
    }

    pub fn config(&self) -> &CocycleConfig {
        &self.cfg
    }

    pub fn coefficient(&self) -> &LinearCoefficientSpec {
        &self.stepper.problem().h
    }

    /// Propagate `z` over `n_rec` record intervals from `origin`,
    /// renormalizing in sup-norm. Returns the accumulated logarithms.
    fn propagate(&self, origin: &BasePoint, z: &mut Vec<f64>, n_rec: usize, mut record: impl FnMut(f64)) -> Result<()> {
        let mut acc = 0.0;
        let mut states = [std::mem::take(z)];
        self.stepper.run(origin, 0.0, n_rec * self.rec_steps, &mut states, self.rec_steps, |_, time, st| {
            let n = crate::solver::sup_norm(&st[0]);
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::BlowUp { time });
            }
            acc += n.ln();
            st[0].iter_mut().for_each(|v| *v /= n);
            record(acc);
            Ok(true)
        })?;
        let [s] = states;
        *z = s;
        Ok(())
    }

    fn records(&self, horizon: f64) -> Result<usize> {
        if !(horizon > 0.0) {
            return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
        }
        Ok(((horizon / self.cfg.dt_rec) - 1e-9).ceil().max(1.0) as usize)
    }

    /// Principal direction over `p` from a positive field pushed forward
    /// from `p.(-t_spin)`, sup-norm one.
    pub fn principal_direction_with(&self, p: &BasePoint, t_spin: f64) -> Result<GridField> {
        if !(t_spin > 0.0) {
            return Err(Error::Config(format!("t_spin must be positive, got {t_spin}")));
        }
        let n_rec = self.records(t_spin)?;
        let start = p.advance(-(n_rec as f64) * self.cfg.dt_rec);
        let mut z = vec![1.0; self.stepper.n_nodes()];
        self.propagate(&start, &mut z, n_rec, |_| {})?;
        if z.iter().any(|&v| v <= 0.0) {
            return Err(Error::NoConvergence("principal direction lost positivity during spin-up".into()));
        }
        Ok(GridField::new(z))
    }

    pub fn principal_direction(&self, p: &BasePoint) -> Result<GridField> {
        self.principal_direction_with(p, self.cfg.t_spin)
    }

    pub fn trace(&self, p: &BasePoint, horizon: f64) -> Result<CocycleTrace> {
        let n_rec = self.records(horizon)?;
        let mut z = self.principal_direction(p)?.values;
        let mut log_c = Vec::with_capacity(n_rec + 1);
        log_c.push(0.0);
        self.propagate(p, &mut z, n_rec, |acc| log_c.push(acc))?;
        let times = (0..=n_rec).map(|k| k as f64 * self.cfg.dt_rec).collect();
        Ok(CocycleTrace { base: *p, times, log_c, spin_up: self.cfg.t_spin, dt_rec: self.cfg.dt_rec })
    }

    /// `ln c(T, p) / T` together with the half-horizon gap.
    pub fn lyapunov_exponent(&self, p: &BasePoint, horizon: f64) -> Result<ExponentEstimate> {
        let tr = self.trace(p, horizon)?;
        Ok(exponent_from_trace(&tr))
    }

    /// Measure the exponent and refuse if it is not within `exponent_tol`
    /// of zero.
    pub fn certify_zero_exponent(&self, p: &BasePoint, horizon: f64) -> Result<ZeroExponent> {
        let estimate = self.lyapunov_exponent(p, horizon)?;
        if estimate.value.abs() >= self.cfg.exponent_tol {
            return Err(Error::Precondition(format!(
                "upper Lyapunov exponent {} is not within {} of zero (horizon {})",
                estimate.value, self.cfg.exponent_tol, horizon
            )));
        }
        Ok(ZeroExponent { estimate, fingerprint: self.fingerprint })
    }

    fn check_token(&self, token: &ZeroExponent) -> Result<()> {
        if token.fingerprint != self.fingerprint {
            return Err(Error::Precondition("zero-exponent certificate was issued for a different coefficient".into()));
        }
        Ok(())
    }

    /// `sup_{-T <= t <= 0} ln c(t, p)`, read off a forward trace from
    /// `p.(-T)`: with `L(s) = ln c(s, p.(-T))`, `ln c(-tau, p) = L(T - tau) - L(T)`.
    pub fn backward_sup(&self, token: &ZeroExponent, p: &BasePoint, horizon: f64) -> Result<f64> {
        self.check_token(token)?;
        Ok(self.backward_sup_unchecked(p, horizon)?.0)
    }

    /// Backward sup together with the sup over the nearer half `[-T/2, 0]`.
    fn backward_sup_unchecked(&self, p: &BasePoint, horizon: f64) -> Result<(f64, f64)> {
        let n_rec = self.records(horizon)?;
        let start = p.advance(-(n_rec as f64) * self.cfg.dt_rec);
        let tr = self.trace(&start, n_rec as f64 * self.cfg.dt_rec)?;
        let end = tr.last();
        let half = n_rec / 2;
        let mut full = f64::NEG_INFINITY;
        let mut near = f64::NEG_INFINITY;
        for (k, l) in tr.log_c.iter().enumerate() {
            let v = l - end;
            full = full.max(v);
            if k >= n_rec - half {
                near = near.max(v);
            }
        }
        Ok((full, near))
    }

    /// Backward sup over escalating horizons up to `t_max`. Stops as soon as
    /// the sup exceeds `m_bound`. Returns the last sup, the sup over half its
    /// horizon and the horizon reached.
    pub fn backward_sup_escalating(&self, token: &ZeroExponent, p: &BasePoint, t_max: f64, m_bound: f64) -> Result<(f64, f64, f64)> {
        self.check_token(token)?;
        let mut horizon = (t_max / 64.0).max(self.cfg.dt_rec);
        loop {
            let (full, near) = self.backward_sup_unchecked(p, horizon)?;
            if full >= m_bound || horizon >= t_max {
                return Ok((full, near, horizon));
            }
            horizon = (4.0 * horizon).min(t_max);
        }
    }

    /// Bounded if `sup_{|t| <= T} |ln c(t, p)| < M` and the sup has saturated
    /// over the second half of the horizon; Unbounded if `ln c` crosses both
    /// `+M` and `-M`; Inconclusive otherwise.
    pub fn classify_boundedness(&self, token: &ZeroExponent, p: &BasePoint, t_max: f64, m_bound: f64) -> Result<Boundedness> {
        self.check_token(token)?;
        let n_rec = self.records(t_max)?;
        let start = p.advance(-(n_rec as f64) * self.cfg.dt_rec);
        let tr = self.trace(&start, 2.0 * n_rec as f64 * self.cfg.dt_rec)?;
        let mid = tr.log_c[n_rec];
        let quarter = n_rec / 2;
        let (mut hi, mut lo, mut inner) = (f64::NEG_INFINITY, f64::INFINITY, 0.0f64);
        for (k, l) in tr.log_c.iter().enumerate() {
            let v = l - mid;
            hi = hi.max(v);
            lo = lo.min(v);
            if k.abs_diff(n_rec) <= quarter {
                inner = inner.max(v.abs());
            }
        }
        let sup = hi.max(-lo);
        Ok(if hi >= m_bound && lo <= -m_bound {
            Boundedness::Unbounded
        } else if sup < m_bound && sup - inner < self.cfg.drift_fraction * m_bound {
            Boundedness::Bounded
        } else {
            Boundedness::Inconclusive
        })
    }
}

pub fn exponent_from_trace(tr: &CocycleTrace) -> ExponentEstimate {
    let n = tr.log_c.len() - 1;
    let horizon = tr.times[n];
    let value = tr.log_c[n] / horizon;
    let h = n / 2;
    let gap = if h > 0 { (value - tr.log_c[h] / tr.times[h]).abs() } else { f64::INFINITY };
    ExponentEstimate { value, horizon, convergence_gap: gap }
}

/// Record times with `|ln c| < eps`.
pub fn recurrence_times(trace: &CocycleTrace, eps: f64) -> Vec<f64> {
    trace.times.iter().zip(&trace.log_c).filter(|(_, l)| l.abs() < eps).map(|(t, _)| *t).collect()
}

pub fn estimate_principal_direction(
    disc: &Discretization,
    p: &BasePoint,
    h: &LinearCoefficientSpec,
    cfg: &CocycleConfig,
) -> Result<GridField> {
    LinearCocycle::new(disc, h, cfg.clone())?.principal_direction(p)
}

pub fn cocycle_trace(
    disc: &Discretization,
    p: &BasePoint,
    h: &LinearCoefficientSpec,
    horizon: f64,
    cfg: &CocycleConfig,
) -> Result<CocycleTrace> {
    LinearCocycle::new(disc, h, cfg.clone())?.trace(p, horizon)
}

pub fn lyapunov_exponent(
    disc: &Discretization,
    p: &BasePoint,
    h: &LinearCoefficientSpec,
    horizon: f64,
    cfg: &CocycleConfig,
) -> Result<ExponentEstimate> {
    LinearCocycle::new(disc, h, cfg.clone())?.lyapunov_exponent(p, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_flow::{sample_base, GOLDEN};
    use crate::coefficients::{build_coboundary_h, build_unbounded_surrogate_h, TorusMode, TorusPolynomial};
    use crate::solver::{BoundaryCondition, Grid};

    fn disc(n: usize, bc: BoundaryCondition) -> Discretization {
        Discretization::new(Grid::new(n).unwrap(), &bc).unwrap()
    }

    fn coarse() -> CocycleConfig {
        CocycleConfig { dt: 1e-2, ..Default::default() }
    }

    #[test]
    fn record_interval_must_divide() {
        let bad = CocycleConfig { dt: 0.03, dt_rec: 0.1, ..Default::default() };
        assert!(bad.record_steps().is_err());
        assert_eq!(CocycleConfig::default().record_steps().unwrap(), 100);
    }

    #[test]
    fn principal_direction_examples() {
        let d = disc(16, BoundaryCondition::neumann());
        let k = TorusPolynomial::new(vec![TorusMode::new([0, 1], 0.0, 1.0)]);
        let h = build_coboundary_h(k, GOLDEN, &d.bc, &d.ground).unwrap();
        let p = BasePoint::new([0.2, 0.3], GOLDEN);
        let e = estimate_principal_direction(&d, &p, &h, &coarse()).unwrap();
        assert!(e.values.iter().all(|v| (v - 1.0).abs() < 1e-12));

        let d = disc(32, BoundaryCondition::robin(1.0));
        let lc = LinearCocycle::new(&d, &LinearCoefficientSpec::constant(0.0), coarse()).unwrap();
        let e10 = lc.principal_direction_with(&p, 10.0).unwrap();
        assert!(e10.distance(&d.ground.e0) < 1e-3);
        let e5 = lc.principal_direction_with(&p, 5.0).unwrap();
        assert!(e5.distance(&e10) < 1e-6);
    }

    #[test]
    fn trace_examples() {
        let d = disc(16, BoundaryCondition::robin(1.0));
        let p = BasePoint::new([0.6, 0.1], GOLDEN);
        let g0 = LinearCoefficientSpec::constant(d.gamma0());
        let tr = cocycle_trace(&d, &p, &g0, 50.0, &coarse()).unwrap();
        assert_eq!(tr.log_c[0], 0.0);
        assert!(tr.log_c.iter().all(|l| l.abs() < 1e-6));

        let g1 = LinearCoefficientSpec::constant(d.gamma0() + 1.0);
        let tr = cocycle_trace(&d, &p, &g1, 50.0, &coarse()).unwrap();
        for (t, l) in tr.times.iter().zip(&tr.log_c) {
            assert!((l - t).abs() <= 1e-3 * t.max(1e-9), "{t} {l}");
        }
    }

    #[test]
    fn exponent_examples() {
        let p = BasePoint::new([0.5, 0.5], GOLDEN);
        let n = disc(16, BoundaryCondition::neumann());
        let e = lyapunov_exponent(&n, &p, &LinearCoefficientSpec::constant(0.0), 100.0, &coarse()).unwrap();
        assert!(e.value.abs() < 1e-3);
        let r = disc(32, BoundaryCondition::robin(1.0));
        let e = lyapunov_exponent(&r, &p, &LinearCoefficientSpec::constant(0.0), 100.0, &coarse()).unwrap();
        assert!((e.value + r.gamma0()).abs() < 1e-3, "{e:?}");
        let e = lyapunov_exponent(&r, &p, &LinearCoefficientSpec::constant(0.75), 100.0, &coarse()).unwrap();
        assert!((e.value - (0.75 - r.gamma0())).abs() < 1e-3, "{e:?}");
    }

    #[test]
    fn cocycle_identity() {
        let d = disc(16, BoundaryCondition::robin(0.5));
        let h = LinearCoefficientSpec {
            base_part: TorusPolynomial::new(vec![TorusMode::new([1, 0], 0.5, 0.2), TorusMode::new([1, -2], 0.0, 0.7)]),
            constant_shift: 0.1,
            ..Default::default()
        };
        let lc = LinearCocycle::new(&d, &h, coarse()).unwrap();
        for p in sample_base(3, 4, GOLDEN) {
            let (s, t) = (3.0, 4.5);
            let a = lc.trace(&p, s + t).unwrap();
            let ks = (s / 0.1f64).round() as usize;
            let b = lc.trace(&p.advance(s), t).unwrap();
            let defect = a.last() - a.log_c[ks] - b.last();
            assert!(defect.abs() < 1e-6, "{defect}");
        }
    }

    #[test]
    fn zero_exponent_guard() {
        let d = disc(16, BoundaryCondition::neumann());
        let p = BasePoint::new([0.1, 0.1], GOLDEN);
        let pos = LinearCocycle::new(&d, &LinearCoefficientSpec::constant(1.0), coarse()).unwrap();
        assert!(matches!(pos.certify_zero_exponent(&p, 50.0), Err(Error::Precondition(_))));

        let zero = LinearCocycle::new(&d, &LinearCoefficientSpec::constant(0.0), coarse()).unwrap();
        let token = zero.certify_zero_exponent(&p, 50.0).unwrap();
        let other = LinearCocycle::new(&d, &LinearCoefficientSpec::constant(1e-4), coarse()).unwrap();
        assert!(matches!(other.backward_sup(&token, &p, 10.0), Err(Error::Precondition(_))));
        assert!(zero.backward_sup(&token, &p, 10.0).unwrap().abs() < 1e-9);
    }

    #[test]
    fn coboundary_backward_sup_and_classification() {
        let d = disc(16, BoundaryCondition::neumann());
        let k = TorusPolynomial::new(vec![TorusMode::new([0, 1], 0.0, 1.0)]);
        let h = build_coboundary_h(k.clone(), GOLDEN, &d.bc, &d.ground).unwrap();
        let lc = LinearCocycle::new(&d, &h, coarse()).unwrap();
        let p = BasePoint::new([0.3, 0.9], GOLDEN);
        let token = lc.certify_zero_exponent(&p, 200.0).unwrap();
        for horizon in [50.0, 400.0] {
            let s = lc.backward_sup(&token, &p, horizon).unwrap();
            assert!(s <= 2.0 + 1e-3);
            // exact value: max over the backward orbit of K(p.t) - K(p)
            let exact = (0..=(horizon * 10.0) as usize)
                .map(|i| k.eval(&p.advance(-(i as f64) * 0.1).theta) - k.eval(&p.theta))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((s - exact).abs() < 1e-3, "{s} {exact}");
        }
        let b = lc.classify_boundedness(&token, &p, 400.0, 3.0).unwrap();
        assert_eq!(b, Boundedness::Bounded);
    }

    #[test]
    fn surrogate_short_horizon_is_inconclusive() {
        let d = disc(8, BoundaryCondition::neumann());
        let h = build_unbounded_surrogate_h(GOLDEN, 6, &d.bc, &d.ground).unwrap();
        let lc = LinearCocycle::new(&d, &h, coarse()).unwrap();
        let p = BasePoint::new([0.37, 0.52], GOLDEN);
        let token = lc.certify_zero_exponent(&p, 5000.0).unwrap();
        assert_eq!(lc.classify_boundedness(&token, &p, 1.0, 3.0).unwrap(), Boundedness::Inconclusive);
    }

    #[test]
    fn recurrence_examples() {
        let d = disc(16, BoundaryCondition::neumann());
        let k = TorusPolynomial::new(vec![TorusMode::new([1, 0], 0.0, 1.0), TorusMode::new([0, 1], 0.5, 0.0)]);
        let h = build_coboundary_h(k, GOLDEN, &d.bc, &d.ground).unwrap();
        let lc = LinearCocycle::new(&d, &h, coarse()).unwrap();
        let p = BasePoint::new([0.25, 0.75], GOLDEN);
        let short = recurrence_times(&lc.trace(&p, 100.0).unwrap(), 0.05);
        let long = lc.trace(&p, 400.0).unwrap();
        let hits = recurrence_times(&long, 0.05);
        assert_eq!(hits[0], 0.0);
        assert!(hits.len() > short.len());
        assert!(hits.last().unwrap() > short.last().unwrap());
        assert_eq!(recurrence_times(&long, 1e3).len(), long.times.len());
    }
}
