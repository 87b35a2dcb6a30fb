//! Irrational rotation of the 2-torus, the driving flow of every experiment.
//!
//! A [`BasePoint`] carries its torus coordinates together with the rotation
//! vector, so `p.advance(t)` is the flow `p.t` and all base-dependent
//! coefficients are functions of `p.theta`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(1, (sqrt 5 - 1) / 2)`
pub const GOLDEN: [f64; 2] = [1.0, 0.6180339887498949];
/// `(1, sqrt 2 - 1)`
pub const SQRT2: [f64; 2] = [1.0, 0.41421356237309515];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FrequencyPreset {
    Golden,
    Sqrt2,
    Custom([f64; 2]),
}

impl FrequencyPreset {
    pub fn omega(&self) -> [f64; 2] {
        match self {
            FrequencyPreset::Golden => GOLDEN,
            FrequencyPreset::Sqrt2 => SQRT2,
            FrequencyPreset::Custom(w) => *w,
        }
    }

    pub fn from_name(name: &str, custom: Option<[f64; 2]>) -> Result<Self> {
        match (name, custom) {
            ("golden", None) => Ok(Self::Golden),
            ("sqrt2", None) => Ok(Self::Sqrt2),
            ("custom", Some(w)) => Ok(Self::Custom(w)),
            ("custom", None) => Err(Error::Config("base.omega required for preset \"custom\"".into())),
            ("golden" | "sqrt2", Some(_)) => {
                Err(Error::Config(format!("base.omega must not be set for preset \"{name}\"")))
            }
            _ => Err(Error::Config(format!("unknown frequency preset \"{name}\""))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FrequencyPreset::Golden => "golden",
            FrequencyPreset::Sqrt2 => "sqrt2",
            FrequencyPreset::Custom(_) => "custom",
        }
    }

    /// True when `omega` is the golden rotation vector.
    pub fn is_golden(omega: [f64; 2]) -> bool {
        (omega[0] - GOLDEN[0]).abs() < 1e-12 && (omega[1] - GOLDEN[1]).abs() < 1e-12
    }
}

/// Reduce to `[0, 1)`. `rem_euclid` can round up to exactly 1 for tiny
/// negative inputs.
#[inline]
fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[inline]
fn circular(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(1.0);
    d.min(1.0 - d)
}

/// A point of the torus together with the rotation frequencies of the flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasePoint {
    pub theta: [f64; 2],
    pub omega: [f64; 2],
}

impl BasePoint {
    pub fn new(theta: [f64; 2], omega: [f64; 2]) -> Self {
        Self { theta: [wrap(theta[0]), wrap(theta[1])], omega }
    }

    /// The flow `p.t`.
    #[inline]
    pub fn advance(&self, t: f64) -> Self {
        Self {
            theta: [wrap(self.theta[0] + self.omega[0] * t), wrap(self.theta[1] + self.omega[1] * t)],
            omega: self.omega,
        }
    }

    /// Max of the per-coordinate circular distances.
    pub fn distance(&self, other: &BasePoint) -> f64 {
        circular(self.theta[0], other.theta[0]).max(circular(self.theta[1], other.theta[1]))
    }
}

pub fn advance(p: &BasePoint, t: f64) -> BasePoint {
    p.advance(t)
}

/// A bounded function on the torus.
pub struct Observable(Box<dyn Fn(&BasePoint) -> f64 + Send + Sync>);

impl Observable {
    pub fn new(f: impl Fn(&BasePoint) -> f64 + Send + Sync + 'static) -> Self {
        Self(Box::new(f))
    }

    #[inline]
    pub fn eval(&self, p: &BasePoint) -> f64 {
        (self.0)(p)
    }
}

impl std::fmt::Debug for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Observable(..)")
    }
}

/// Birkhoff average `(1/N) sum_{k<N} f(p.(k dt))` with `N = floor(T/dt)`.
pub fn ergodic_average(f: &Observable, p: &BasePoint, horizon: f64, dt: f64) -> Result<f64> {
    if !(horizon > 0.0 && dt > 0.0 && dt <= horizon) {
        return Err(Error::Config(format!(
            "ergodic average needs 0 < dt <= T, got dt = {dt}, T = {horizon}"
        )));
    }
    let n = (horizon / dt + 1e-9).floor() as usize;
    let mut sum = 0.0;
    for k in 0..n {
        let time = k as f64 * dt;
        let v = f.eval(&p.advance(time));
        if !v.is_finite() {
            return Err(Error::Evaluation { time, value: v });
        }
        sum += v;
    }
    Ok(sum / n as f64)
}

/// `n` base points uniform on the torus, reproducible for a fixed seed.
pub fn sample_base(n: usize, seed: u64, omega: [f64; 2]) -> Vec<BasePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a: f64 = rng.random();
            let b: f64 = rng.random();
            BasePoint::new([a, b], omega)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: [f64; 2], b: [f64; 2], tol: f64) -> bool {
        (a[0] - b[0]).abs() < tol && (a[1] - b[1]).abs() < tol
    }

    #[test]
    fn advance_examples() {
        let w = [1.0, 0.618034];
        let p = BasePoint::new([0.2, 0.5], w);
        assert_eq!(p.advance(0.0).theta, [0.2, 0.5]);
        assert!(close(p.advance(1.0).theta, [0.2, 0.118034], 1e-12));
        let o = BasePoint::new([0.0, 0.0], w);
        assert!(close(o.advance(2.0).theta, [0.0, 0.236068], 1e-12));
    }

    #[test]
    fn advance_backwards_stays_in_unit_square() {
        let p = BasePoint::new([0.0, 1e-17], GOLDEN);
        for t in [-1e-18, -1.0, -1234.5, -1e4] {
            let q = p.advance(t);
            assert!(q.theta.iter().all(|c| (0.0..1.0).contains(c)), "{q:?}");
        }
    }

    /// Tensor midpoint quadrature on the torus, independent of the flow.
    fn torus_mean(f: impl Fn(f64, f64) -> f64) -> f64 {
        let n = 400;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += f((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64);
            }
        }
        s / (n * n) as f64
    }

    #[test]
    fn ergodic_averages_match_torus_quadrature() {
        let p = BasePoint::new([0.3, 0.7], GOLDEN);
        let one = Observable::new(|_| 1.0);
        assert_eq!(ergodic_average(&one, &p, 100.0, 0.1).unwrap(), 1.0);

        let c1 = Observable::new(|q| (2.0 * PI * q.theta[0]).cos());
        let exact = torus_mean(|a, _| (2.0 * PI * a).cos());
        assert!(exact.abs() < 1e-12);
        let avg = ergodic_average(&c1, &p, 1e4, 0.1).unwrap();
        assert!((avg - exact).abs() < 5e-3, "{avg}");

        let c2 = Observable::new(|q| (2.0 * PI * q.theta[1]).cos().powi(2));
        let exact = torus_mean(|_, b| (2.0 * PI * b).cos().powi(2));
        assert!((exact - 0.5).abs() < 1e-12);
        let avg = ergodic_average(&c2, &p, 1e4, 0.1).unwrap();
        assert!((avg - exact).abs() < 5e-3, "{avg}");
    }

    #[test]
    fn ergodic_average_reports_offending_time() {
        let p = BasePoint::new([0.0, 0.0], GOLDEN);
        let bad = Observable::new(|q| if q.theta[0] > 0.45 { f64::NAN } else { 0.0 });
        match ergodic_average(&bad, &p, 10.0, 0.1) {
            Err(Error::Evaluation { time, .. }) => assert!((time - 0.5).abs() < 1e-9, "{time}"),
            other => panic!("{other:?}"),
        }
        assert!(ergodic_average(&bad, &p, 1.0, 2.0).is_err());
        assert!(ergodic_average(&bad, &p, 1.0, 0.0).is_err());
    }

    #[test]
    fn sampling_is_reproducible_and_uniform() {
        assert!(sample_base(0, 3, GOLDEN).is_empty());
        assert_eq!(sample_base(1, 0, GOLDEN), sample_base(1, 0, GOLDEN));
        let pts = sample_base(1000, 7, GOLDEN);
        for c in 0..2 {
            let mean = pts.iter().map(|p| p.theta[c]).sum::<f64>() / 1000.0;
            assert!((mean - 0.5).abs() < 0.05, "{mean}");
        }
    }

    #[test]
    fn golden_orbit_does_not_return_at_integer_times() {
        for p in sample_base(5, 11, GOLDEN) {
            let m = (1..=10_000).map(|t| p.advance(t as f64).distance(&p)).fold(f64::INFINITY, f64::min);
            assert!(m > 0.0);
        }
    }

    #[test]
    fn averages_from_different_starts_agree() {
        let f = Observable::new(|q| {
            let (a, b) = (2.0 * PI * q.theta[0], 2.0 * PI * q.theta[1]);
            1.0 + 0.5 * a.cos() + 0.3 * (a - 2.0 * b).sin() + 0.2 * (2.0 * b).cos()
        });
        let p = BasePoint::new([0.1, 0.9], GOLDEN);
        let q = BasePoint::new([0.77, 0.21], GOLDEN);
        let a = ergodic_average(&f, &p, 1e4, 0.1).unwrap();
        let b = ergodic_average(&f, &q, 1e4, 0.1).unwrap();
        assert!((a - b).abs() < 1e-2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]

            #[test]
            fn flow_group_law(a in 0.0..1.0f64, b in 0.0..1.0f64, s in -500.0..500.0f64, t in -500.0..500.0f64) {
                let p = BasePoint::new([a, b], GOLDEN);
                let lhs = p.advance(s).advance(t);
                let rhs = p.advance(s + t);
                prop_assert!(lhs.distance(&rhs) < 1e-12);
            }
        }
    }
}
