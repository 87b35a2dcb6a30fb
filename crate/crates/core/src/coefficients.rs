//! Coefficients of the equation: the linear term `h(p, x)`, the stiffness
//! `k(p, x)` and the dead-zone cubic `g(p, x, y)`.
//!
//! Base dependence is always a finite trigonometric polynomial on the torus,
//! spatial dependence a finite sum of cosine/sine profiles on `[0, 1]`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::base_flow::{BasePoint, FrequencyPreset};
use crate::cocycle::{CocycleConfig, ExponentEstimate, LinearCocycle};
use crate::error::{Error, Result};
use crate::solver::{BoundaryCondition, Discretization, Eigenpair};

/// One Fourier mode `cos * cos(2 pi m.theta) + sin * sin(2 pi m.theta)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusMode {
    pub m: [i64; 2],
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

impl TorusMode {
    pub fn new(m: [i64; 2], cos: f64, sin: f64) -> Self {
        Self { m, cos, sin }
    }

    #[inline]
    fn phase(&self, theta: &[f64; 2]) -> f64 {
        2.0 * PI * (self.m[0] as f64 * theta[0] + self.m[1] as f64 * theta[1])
    }

    /// `m . omega`, the rotation speed of the mode along the flow.
    #[inline]
    pub fn divisor(&self, omega: &[f64; 2]) -> f64 {
        self.m[0] as f64 * omega[0] + self.m[1] as f64 * omega[1]
    }

    #[inline]
    pub fn eval(&self, theta: &[f64; 2]) -> f64 {
        let (s, c) = self.phase(theta).sin_cos();
        self.cos * c + self.sin * s
    }

    pub fn amplitude(&self) -> f64 {
        self.cos.hypot(self.sin)
    }
}

/// Finite trigonometric polynomial on the torus.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TorusPolynomial {
    pub modes: Vec<TorusMode>,
}

impl TorusPolynomial {
    pub fn new(modes: Vec<TorusMode>) -> Self {
        Self { modes }
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    #[inline]
    pub fn eval(&self, theta: &[f64; 2]) -> f64 {
        self.modes.iter().map(|m| m.eval(theta)).sum()
    }

    /// Derivative along the flow, `omega . grad P`.
    pub fn flow_derivative(&self, omega: &[f64; 2]) -> TorusPolynomial {
        let modes = self
            .modes
            .iter()
            .map(|md| {
                let w = 2.0 * PI * md.divisor(omega);
                TorusMode::new(md.m, w * md.sin, -w * md.cos)
            })
            .collect();
        TorusPolynomial { modes }
    }

    pub fn sup_bound(&self) -> f64 {
        self.modes.iter().map(TorusMode::amplitude).sum()
    }

    /// Torus average; only the zero mode contributes.
    pub fn mean(&self) -> f64 {
        self.modes.iter().filter(|m| m.m == [0, 0]).map(|m| m.cos).sum()
    }

    fn value_and_derivatives(&self, theta: &[f64; 2]) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let mut v = 0.0;
        let mut g = [0.0; 2];
        let mut hs = [[0.0; 2]; 2];
        for md in &self.modes {
            let (s, c) = md.phase(theta).sin_cos();
            let val = md.cos * c + md.sin * s;
            let der = -md.cos * s + md.sin * c;
            let k = [2.0 * PI * md.m[0] as f64, 2.0 * PI * md.m[1] as f64];
            v += val;
            for i in 0..2 {
                g[i] += k[i] * der;
                for j in 0..2 {
                    hs[i][j] -= k[i] * k[j] * val;
                }
            }
        }
        (v, g, hs)
    }

    /// Global maximum on the torus: grid search followed by Newton polishing
    /// of the best candidates.
    pub fn max_on_torus(&self) -> f64 {
        if self.modes.is_empty() {
            return 0.0;
        }
        let n = 256;
        let mut cands: Vec<(f64, [f64; 2])> = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let th = [i as f64 / n as f64, j as f64 / n as f64];
                cands.push((self.eval(&th), th));
            }
        }
        cands.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut best = cands[0].0;
        for &(_, start) in cands.iter().take(16) {
            let mut th = start;
            for _ in 0..50 {
                let (_, g, h) = self.value_and_derivatives(&th);
                let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
                let step = if h[0][0] < 0.0 && det > 0.0 {
                    [(h[1][1] * g[0] - h[0][1] * g[1]) / det, (-h[1][0] * g[0] + h[0][0] * g[1]) / det]
                } else {
                    [-1e-4 * g[0], -1e-4 * g[1]]
                };
                let step = [step[0].clamp(-0.01, 0.01), step[1].clamp(-0.01, 0.01)];
                let next = [th[0] - step[0], th[1] - step[1]];
                if self.eval(&next) < self.eval(&th) {
                    break;
                }
                th = next;
                if step[0].abs().max(step[1].abs()) < 1e-14 {
                    break;
                }
            }
            best = best.max(self.eval(&th));
        }
        best
    }

    pub fn min_on_torus(&self) -> f64 {
        let neg = TorusPolynomial {
            modes: self.modes.iter().map(|m| TorusMode::new(m.m, -m.cos, -m.sin)).collect(),
        };
        -neg.max_on_torus()
    }
}

/// Spatial profiles on `[0, 1]`, all bounded by one in absolute value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SpatialProfile {
    One,
    /// `cos(k pi x)`
    Cos(u32),
    /// `sin(k pi x)`
    Sin(u32),
}

impl SpatialProfile {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SpatialProfile::One => 1.0,
            SpatialProfile::Cos(k) => (k as f64 * PI * x).cos(),
            SpatialProfile::Sin(k) => (k as f64 * PI * x).sin(),
        }
    }
}

impl TryFrom<String> for SpatialProfile {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        let parse = |rest: &str| rest.parse::<u32>().map_err(|_| format!("bad spatial profile \"{s}\""));
        if s == "one" {
            Ok(SpatialProfile::One)
        } else if let Some(r) = s.strip_prefix("cos") {
            parse(r).map(SpatialProfile::Cos)
        } else if let Some(r) = s.strip_prefix("sin") {
            parse(r).map(SpatialProfile::Sin)
        } else {
            Err(format!("unknown spatial profile \"{s}\" (expected one, cosK or sinK)"))
        }
    }
}

impl From<SpatialProfile> for String {
    fn from(p: SpatialProfile) -> String {
        match p {
            SpatialProfile::One => "one".into(),
            SpatialProfile::Cos(k) => format!("cos{k}"),
            SpatialProfile::Sin(k) => format!("sin{k}"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    #[default]
    Cos,
    Sin,
}

/// `amplitude * trig(2 pi m.theta) * profile(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacePart {
    pub m: [i64; 2],
    #[serde(default)]
    pub phase: Phase,
    pub profile: SpatialProfile,
    pub amplitude: f64,
}

impl SpacePart {
    #[inline]
    pub fn torus_factor(&self, theta: &[f64; 2]) -> f64 {
        let arg = 2.0 * PI * (self.m[0] as f64 * theta[0] + self.m[1] as f64 * theta[1]);
        self.amplitude
            * match self.phase {
                Phase::Cos => arg.cos(),
                Phase::Sin => arg.sin(),
            }
    }
}

fn space_sum(parts: &[SpacePart], theta: &[f64; 2], x: f64) -> f64 {
    parts.iter().map(|s| s.torus_factor(theta) * s.profile.eval(x)).sum()
}

/// How a linear coefficient was built. Coboundary specs carry their potential
/// so the exact cocycle `ln c(t, p) = K(p.t) - K(p)` is available.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientClass {
    #[default]
    Generic,
    Coboundary {
        potential: TorusPolynomial,
        omega: [f64; 2],
    },
    UnboundedSurrogate {
        level: usize,
        primitive: TorusPolynomial,
    },
}

/// `h(p, x) = constant_shift + base_part(p) + sum of space parts`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearCoefficientSpec {
    pub base_part: TorusPolynomial,
    pub space_part: Vec<SpacePart>,
    pub constant_shift: f64,
    #[serde(default)]
    pub class: CoefficientClass,
}

impl LinearCoefficientSpec {
    pub fn constant(c: f64) -> Self {
        Self { constant_shift: c, ..Default::default() }
    }

    /// The base-only part `constant_shift + base_part(p)`.
    #[inline]
    pub fn torus_part(&self, theta: &[f64; 2]) -> f64 {
        self.constant_shift + self.base_part.eval(theta)
    }

    pub fn is_space_independent(&self) -> bool {
        self.space_part.iter().all(|s| s.profile == SpatialProfile::One || s.amplitude == 0.0)
    }

    pub fn sup_bound(&self) -> f64 {
        self.constant_shift + self.base_part.sup_bound() + self.space_part.iter().map(|s| s.amplitude.abs()).sum::<f64>()
    }

    pub fn sup_abs_bound(&self) -> f64 {
        self.constant_shift.abs() + self.base_part.sup_bound() + self.space_part.iter().map(|s| s.amplitude.abs()).sum::<f64>()
    }

    pub fn is_coboundary(&self) -> bool {
        matches!(self.class, CoefficientClass::Coboundary { .. })
    }

    pub fn potential(&self) -> Option<&TorusPolynomial> {
        match &self.class {
            CoefficientClass::Coboundary { potential, .. } => Some(potential),
            _ => None,
        }
    }

    /// Same coefficient plus a constant. The build class survives only a
    /// shift of exactly zero.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.constant_shift += c;
        if c != 0.0 {
            out.class = CoefficientClass::Generic;
        }
        out
    }

    /// `r h1 + (1 - r) h2`
    pub fn mix(r: f64, a: &Self, b: &Self) -> Self {
        let scale_modes = |p: &TorusPolynomial, s: f64| -> Vec<TorusMode> {
            p.modes.iter().map(|m| TorusMode::new(m.m, s * m.cos, s * m.sin)).collect()
        };
        let scale_space = |v: &[SpacePart], s: f64| {
            v.iter()
                .map(|sp| SpacePart { amplitude: s * sp.amplitude, ..sp.clone() })
                .collect::<Vec<_>>()
        };
        let mut modes = scale_modes(&a.base_part, r);
        modes.extend(scale_modes(&b.base_part, 1.0 - r));
        let mut space = scale_space(&a.space_part, r);
        space.extend(scale_space(&b.space_part, 1.0 - r));
        Self {
            base_part: TorusPolynomial::new(modes),
            space_part: space,
            constant_shift: r * a.constant_shift + (1.0 - r) * b.constant_shift,
            class: CoefficientClass::Generic,
        }
    }

    /// Largest central-difference mismatch between `base_part` and the flow
    /// derivative of the stored potential, over `n` random base points.
    pub fn coboundary_defect(&self, n: usize, seed: u64) -> Option<f64> {
        let CoefficientClass::Coboundary { potential, omega } = &self.class else {
            return None;
        };
        let eps = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..n {
            let p = BasePoint::new([rng.random(), rng.random()], *omega);
            let fd = (potential.eval(&p.advance(eps).theta) - potential.eval(&p.advance(-eps).theta)) / (2.0 * eps);
            worst = worst.max((fd - self.base_part.eval(&p.theta)).abs());
        }
        Some(worst)
    }
}

pub fn eval_h(spec: &LinearCoefficientSpec, p: &BasePoint, x: f64) -> f64 {
    spec.torus_part(&p.theta) + space_sum(&spec.space_part, &p.theta, x)
}

/// Positive stiffness `k(p, x)` of the cubic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StiffnessSpec {
    pub constant: f64,
    #[serde(default)]
    pub base_part: TorusPolynomial,
    #[serde(default)]
    pub space_part: Vec<SpacePart>,
}

impl StiffnessSpec {
    pub fn constant(k: f64) -> Self {
        Self { constant: k, base_part: TorusPolynomial::default(), space_part: Vec::new() }
    }

    #[inline]
    pub fn eval(&self, theta: &[f64; 2], x: f64) -> f64 {
        self.constant + self.base_part.eval(theta) + space_sum(&self.space_part, theta, x)
    }

    pub fn is_space_independent(&self) -> bool {
        self.space_part.iter().all(|s| s.profile == SpatialProfile::One || s.amplitude == 0.0)
    }

    fn spread(&self) -> f64 {
        self.base_part.sup_bound() + self.space_part.iter().map(|s| s.amplitude.abs()).sum::<f64>()
    }

    pub fn lower_bound(&self) -> f64 {
        self.constant - self.spread()
    }

    pub fn upper_bound(&self) -> f64 {
        self.constant + self.spread()
    }
}

/// Dead-zone cubic: zero on `|y| <= r0`, `-k (y - r0)^3` above, odd below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub dead_zone: f64,
    pub stiffness: StiffnessSpec,
}

/// `g` for a given stiffness value.
#[inline]
pub fn cubic_g(k: f64, r0: f64, y: f64) -> f64 {
    let w = y.abs() - r0;
    if w <= 0.0 {
        0.0
    } else {
        -k * w * w * w * y.signum()
    }
}

/// Exact time-`dt` flow of the scalar ODE `y' = g(y)` with frozen stiffness:
/// outside the dead zone the excess `w = |y| - r0` obeys `w' = -k w^3`.
#[inline]
pub fn cubic_flow(k: f64, r0: f64, y: f64, dt: f64) -> f64 {
    let w = y.abs() - r0;
    if w <= 0.0 {
        y
    } else {
        let w1 = w / (1.0 + 2.0 * k * dt * w * w).sqrt();
        (r0 + w1).copysign(y)
    }
}

impl NonlinearitySpec {
    pub fn cubic(r0: f64, k: f64) -> Self {
        Self { dead_zone: r0, stiffness: StiffnessSpec::constant(k) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dead_zone > 0.0 && self.dead_zone.is_finite()) {
            return Err(Error::Config(format!("g.r0 must be positive, got {}", self.dead_zone)));
        }
        if !(self.stiffness.lower_bound() > 0.0) {
            return Err(Error::Config(format!(
                "g.stiffness must be positive everywhere; guaranteed lower bound is {}",
                self.stiffness.lower_bound()
            )));
        }
        Ok(())
    }

    /// Largest positive `y` with `growth * y + k_min * g_unit(y) = 0`, i.e. the
    /// homogeneous dissipativity bound for a linear rate bounded by `growth`.
    /// Equal to `r0` when the linear part is not expanding.
    pub fn absorbing_radius(&self, growth: f64) -> f64 {
        let r0 = self.dead_zone;
        if growth <= 0.0 {
            return r0;
        }
        let k = self.stiffness.lower_bound();
        let f = |y: f64| k * (y - r0).powi(3) - growth * y;
        let mut hi = r0 + 1.0;
        while f(hi) <= 0.0 {
            hi = r0 + 2.0 * (hi - r0);
        }
        let mut lo = r0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-15 * hi {
                break;
            }
        }
        hi
    }

    /// Lipschitz constant of `g` in `y` on `[-radius, radius]`.
    pub fn lipschitz(&self, radius: f64) -> f64 {
        let w = (radius - self.dead_zone).max(0.0);
        3.0 * self.stiffness.upper_bound() * w * w
    }
}

pub fn eval_g(spec: &NonlinearitySpec, p: &BasePoint, x: f64, y: f64) -> f64 {
    cubic_g(spec.stiffness.eval(&p.theta, x), spec.dead_zone, y)
}

/// Violation counts of the structural conditions on `g`, one entry per
/// condition (c1) to (c6), from random `(p, x, y)` samples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConditionReport {
    pub samples: usize,
    pub violations: [usize; 6],
}

impl ConditionReport {
    pub fn is_clean(&self) -> bool {
        self.violations.iter().all(|&v| v == 0)
    }
}

pub fn check_conditions(spec: &NonlinearitySpec, omega: [f64; 2], samples: usize, seed: u64) -> ConditionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r0 = spec.dead_zone;
    let mut v = [0usize; 6];
    for _ in 0..samples {
        let p = BasePoint::new([rng.random(), rng.random()], omega);
        let x: f64 = rng.random();
        let y: f64 = rng.random_range(-4.0 * r0 - 2.0..4.0 * r0 + 2.0);
        let g = |y: f64| eval_g(spec, &p, x, y);
        let e = 1e-6 * r0;
        if g(0.0) != 0.0 || (g(e) - g(-e)) / (2.0 * e) != 0.0 {
            v[0] += 1;
        }
        if y * g(y) > 0.0 {
            v[1] += 1;
        }
        if g(-y) != -g(y) {
            v[2] += 1;
        }
        if (g(y) == 0.0) != (y.abs() <= r0) {
            v[3] += 1;
        }
        let q2 = g(1e2) / 1e2;
        let q3 = g(1e3) / 1e3;
        if !(q3 < q2 && q2 < 0.0) || g(-1e3) / -1e3 != q3 {
            v[4] += 1;
        }
        let d = 1e-3 * (1.0 + y.abs());
        let second = g(y + d) - 2.0 * g(y) + g(y - d);
        let scale = 1e-9 * (g(y + d).abs() + g(y - d).abs() + 1e-300);
        if (y - d >= 0.0 && second > scale) || (y + d <= 0.0 && second < -scale) {
            v[5] += 1;
        }
    }
    ConditionReport { samples, violations: v }
}

/// `h = gamma0 + omega . grad K`: the principal direction is the first
/// eigenfunction for every `p` and `ln c(t, p) = K(p.t) - K(p)` exactly.
pub fn build_coboundary_h(
    potential: TorusPolynomial,
    omega: [f64; 2],
    bc: &BoundaryCondition,
    ground: &Eigenpair,
) -> Result<LinearCoefficientSpec> {
    if ground.bc != *bc {
        return Err(Error::Config(format!(
            "no first eigenvalue available for boundary condition {bc:?} (eigenpair was computed for {:?})",
            ground.bc
        )));
    }
    Ok(LinearCoefficientSpec {
        base_part: potential.flow_derivative(&omega),
        space_part: Vec::new(),
        constant_shift: ground.gamma0,
        class: CoefficientClass::Coboundary { potential, omega },
    })
}

/// Golden-mean convergents `p_j / q_j` of `(sqrt 5 - 1)/2`, starting at `0/1`.
pub fn golden_convergents(n: usize) -> Vec<(i64, i64)> {
    let mut out = Vec::with_capacity(n);
    let (mut a, mut b) = (0i64, 1i64);
    for _ in 0..n {
        out.push((a, b));
        (a, b) = (b, a + b);
    }
    out
}

/// Small-divisor coefficient `h = gamma0 + sum_j a_j sin(2 pi (q_j theta2 - p_j theta1))`
/// with `a_j = q_j |q_j omega2 - p_j omega1| j`. The primitive has amplitudes
/// `a_j / (2 pi |d_j|)` and is stored as the surrogate's `primitive`.
pub fn build_unbounded_surrogate_h(
    omega: [f64; 2],
    level: usize,
    bc: &BoundaryCondition,
    ground: &Eigenpair,
) -> Result<LinearCoefficientSpec> {
    if !FrequencyPreset::is_golden(omega) {
        return Err(Error::Unsupported(format!(
            "the unbounded surrogate needs the golden frequency preset, got omega = {omega:?}"
        )));
    }
    if ground.bc != *bc {
        return Err(Error::Config(format!("no first eigenvalue available for boundary condition {bc:?}")));
    }
    let mut modes = Vec::with_capacity(level);
    let mut prim = Vec::with_capacity(level);
    for (j, (p, q)) in golden_convergents(level).into_iter().enumerate() {
        let m = [-p, q];
        let d = q as f64 * omega[1] - p as f64 * omega[0];
        let a = q as f64 * d.abs() * (j + 1) as f64;
        modes.push(TorusMode::new(m, 0.0, a));
        prim.push(TorusMode::new(m, -a / (2.0 * PI * d), 0.0));
    }
    Ok(LinearCoefficientSpec {
        base_part: TorusPolynomial::new(modes),
        space_part: Vec::new(),
        constant_shift: ground.gamma0,
        class: CoefficientClass::UnboundedSurrogate { level, primitive: TorusPolynomial::new(prim) },
    })
}

#[derive(Clone, Debug)]
pub struct Calibration {
    pub spec: LinearCoefficientSpec,
    /// Measured exponent that was subtracted from the constant.
    pub shift: f64,
    pub measured: ExponentEstimate,
    pub remeasured: ExponentEstimate,
}

/// Shift `spec` by a constant so its upper Lyapunov exponent vanishes, using
/// `lambda(h + c) = lambda(h) + c`.
pub fn calibrate_zero_exponent(
    spec: &LinearCoefficientSpec,
    disc: &Discretization,
    cfg: &CocycleConfig,
    p: &BasePoint,
    horizon: f64,
) -> Result<Calibration> {
    let measured = LinearCocycle::new(disc, spec, cfg.clone())?.lyapunov_exponent(p, horizon)?;
    if measured.convergence_gap > cfg.exponent_tol {
        return Err(Error::Calibration(format!(
            "exponent estimate {} not converged: half-horizon gap {} > tolerance {} at T = {}",
            measured.value, measured.convergence_gap, cfg.exponent_tol, horizon
        )));
    }
    let mut out = spec.shifted(-measured.value);
    if measured.value.abs() <= cfg.exponent_tol {
        out.class = spec.class.clone();
    }
    let remeasured = LinearCocycle::new(disc, &out, cfg.clone())?.lyapunov_exponent(p, horizon)?;
    if remeasured.value.abs() > cfg.exponent_tol {
        return Err(Error::Calibration(format!(
            "shifted exponent {} still exceeds tolerance {}",
            remeasured.value, cfg.exponent_tol
        )));
    }
    Ok(Calibration { spec: out, shift: measured.value, measured, remeasured })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_flow::{ergodic_average, Observable, GOLDEN};
    use crate::solver::{first_eigenpair, Grid};

    #[test]
    fn eval_h_examples() {
        let p = BasePoint::new([0.3, 0.4], GOLDEN);
        let two = LinearCoefficientSpec::constant(2.0);
        for x in [0.0, 0.25, 1.0] {
            assert_eq!(eval_h(&two, &p, x), 2.0);
        }

        let k = TorusPolynomial::new(vec![TorusMode::new([1, 0], 0.0, 1.0)]);
        let deriv = k.flow_derivative(&[1.0, 0.5]);
        let at0 = BasePoint::new([0.0, 0.3], [1.0, 0.5]);
        assert!((deriv.eval(&at0.theta) - 2.0 * PI).abs() < 1e-12);

        let a = 0.7;
        let spec = LinearCoefficientSpec {
            space_part: vec![SpacePart { m: [1, 0], phase: Phase::Cos, profile: SpatialProfile::Sin(1), amplitude: a }],
            ..Default::default()
        };
        let x = 0.3;
        let want = a * (2.0 * PI * p.theta[0]).cos() * (PI * x).sin();
        assert!((eval_h(&spec, &p, x) - want).abs() < 1e-14);
    }

    #[test]
    fn eval_g_examples() {
        let spec = NonlinearitySpec::cubic(1.0, 1.0);
        let p = BasePoint::new([0.1, 0.2], GOLDEN);
        assert_eq!(eval_g(&spec, &p, 0.5, 0.0), 0.0);
        assert_eq!(eval_g(&spec, &p, 0.5, 2.0), -1.0);
        assert_eq!(eval_g(&spec, &p, 0.5, -2.0), 1.0);
        assert_eq!(eval_g(&spec, &p, 0.5, 0.999), 0.0);
    }

    #[test]
    fn cubic_satisfies_structural_conditions() {
        let mut spec = NonlinearitySpec::cubic(0.7, 2.0);
        spec.stiffness.base_part = TorusPolynomial::new(vec![TorusMode::new([1, -1], 0.5, 0.3)]);
        spec.stiffness.space_part =
            vec![SpacePart { m: [0, 1], phase: Phase::Sin, profile: SpatialProfile::Cos(2), amplitude: 0.4 }];
        spec.validate().unwrap();
        let report = check_conditions(&spec, GOLDEN, 10_000, 5);
        assert!(report.is_clean(), "{report:?}");
    }

    #[test]
    fn cubic_flow_solves_the_scalar_ode() {
        // RK4 with tiny steps on y' = -k (y - r0)^3
        let (k, r0, y0, t) = (3.0, 0.5, 2.0, 0.4);
        let f = |y: f64| cubic_g(k, r0, y);
        let n = 40_000;
        let h = t / n as f64;
        let mut y = y0;
        for _ in 0..n {
            let k1 = f(y);
            let k2 = f(y + 0.5 * h * k1);
            let k3 = f(y + 0.5 * h * k2);
            let k4 = f(y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!((cubic_flow(k, r0, y0, t) - y).abs() < 1e-12);
        assert!((cubic_flow(k, r0, -y0, t) + y).abs() < 1e-12);
        assert_eq!(cubic_flow(k, r0, 0.3, t), 0.3);
    }

    #[test]
    fn invalid_nonlinearity_rejected() {
        assert!(NonlinearitySpec::cubic(0.0, 1.0).validate().is_err());
        let mut s = NonlinearitySpec::cubic(1.0, 0.5);
        s.stiffness.base_part = TorusPolynomial::new(vec![TorusMode::new([1, 0], 1.0, 0.0)]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn absorbing_radius_is_root() {
        let g = NonlinearitySpec::cubic(1.0, 1.0);
        let y = g.absorbing_radius(1.0);
        assert!((y - (y - 1.0).powi(3)).abs() < 1e-10);
        assert_eq!(g.absorbing_radius(-0.5), 1.0);
    }

    #[test]
    fn coboundary_spec_carries_potential() {
        let grid = Grid::new(32).unwrap();
        let bc = BoundaryCondition::robin(1.0);
        let ground = first_eigenpair(&grid, &bc).unwrap();
        let k = TorusPolynomial::new(vec![TorusMode::new([0, 1], 0.0, 1.0), TorusMode::new([1, -2], 0.3, -0.2)]);
        let spec = build_coboundary_h(k.clone(), GOLDEN, &bc, &ground).unwrap();
        assert_eq!(spec.constant_shift, ground.gamma0);
        assert!(spec.coboundary_defect(200, 1).unwrap() < 1e-6);
        assert_eq!(spec.potential(), Some(&k));

        let zero = build_coboundary_h(TorusPolynomial::default(), GOLDEN, &BoundaryCondition::neumann(), &first_eigenpair(&grid, &BoundaryCondition::neumann()).unwrap()).unwrap();
        let p = BasePoint::new([0.4, 0.1], GOLDEN);
        assert!(eval_h(&zero, &p, 0.5).abs() < 1e-12);

        let err = build_coboundary_h(k, GOLDEN, &BoundaryCondition::neumann(), &ground);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn surrogate_construction() {
        let grid = Grid::new(16).unwrap();
        let bc = BoundaryCondition::neumann();
        let ground = first_eigenpair(&grid, &bc).unwrap();

        let empty = build_unbounded_surrogate_h(GOLDEN, 0, &bc, &ground).unwrap();
        assert!(empty.base_part.is_empty());
        assert!(empty.constant_shift.abs() < 1e-10);

        assert!(matches!(
            build_unbounded_surrogate_h(crate::base_flow::SQRT2, 6, &bc, &ground),
            Err(Error::Unsupported(_))
        ));

        let spec = build_unbounded_surrogate_h(GOLDEN, 6, &bc, &ground).unwrap();
        assert_eq!(golden_convergents(6), vec![(0, 1), (1, 1), (1, 2), (2, 3), (3, 5), (5, 8)]);
        let CoefficientClass::UnboundedSurrogate { primitive, .. } = &spec.class else { panic!() };
        // the stored primitive differentiates back to the coefficient
        let back = primitive.flow_derivative(&GOLDEN);
        let p = BasePoint::new([0.31, 0.77], GOLDEN);
        assert!((back.eval(&p.theta) - spec.base_part.eval(&p.theta)).abs() < 1e-10);

        let bp = spec.base_part.clone();
        let f = Observable::new(move |q| bp.eval(&q.theta));
        let avg = ergodic_average(&f, &p, 1e5, 0.05).unwrap();
        assert!(avg.abs() < 1e-3, "{avg}");
    }

    #[test]
    fn torus_extrema() {
        let k = TorusPolynomial::new(vec![TorusMode::new([0, 1], 0.0, 1.0)]);
        assert!((k.max_on_torus() - 1.0).abs() < 1e-12);
        assert!((k.min_on_torus() + 1.0).abs() < 1e-12);
        let two = TorusPolynomial::new(vec![TorusMode::new([1, 0], 1.0, 0.0), TorusMode::new([0, 3], 0.5, 0.0)]);
        assert!((two.max_on_torus() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn profile_names_round_trip() {
        for p in [SpatialProfile::One, SpatialProfile::Cos(3), SpatialProfile::Sin(1)] {
            assert_eq!(SpatialProfile::try_from(String::from(p)).unwrap(), p);
        }
        assert!(SpatialProfile::try_from("tan2".to_string()).is_err());
    }
}
