use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::stepping::step_count;
use super::*;
use crate::base_flow::{BasePoint, GOLDEN};
use crate::coefficients::{LinearCoefficientSpec, NonlinearitySpec, Phase, SpacePart, SpatialProfile, TorusMode, TorusPolynomial};
use crate::error::Error;

/// Root of `(k^2 - a^2) sin k - 2 a k cos k` on `(0, pi)`: the first Robin
/// eigenvalue of `u'' + k^2 u = 0` on `(0, 1)` is `k^2`.
fn robin_oracle(alpha: f64) -> f64 {
    let f = |k: f64| (k * k - alpha * alpha) * k.sin() - 2.0 * alpha * k * k.cos();
    let (mut lo, mut hi) = (1e-9, PI);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = 0.5 * (lo + hi);
    k * k
}

fn origin() -> BasePoint {
    BasePoint::new([0.13, 0.71], GOLDEN)
}

fn quasi_periodic_h() -> LinearCoefficientSpec {
    LinearCoefficientSpec {
        base_part: TorusPolynomial::new(vec![TorusMode::new([1, 0], 0.6, 0.0), TorusMode::new([0, 1], 0.0, -0.4)]),
        space_part: vec![SpacePart { m: [1, -1], phase: Phase::Sin, profile: SpatialProfile::Cos(1), amplitude: 0.5 }],
        constant_shift: 0.2,
        ..Default::default()
    }
}

#[test]
fn grid_rejects_tiny_sizes() {
    assert!(Grid::new(7).is_err());
    let g = Grid::new(8).unwrap();
    assert_eq!(g.n_nodes(), 9);
    assert!((g.spacing() * 8.0 - 1.0).abs() < 1e-15);
}

#[test]
fn operator_examples() {
    let g = Grid::new(64).unwrap();
    let a = build_operator(&g, &BoundaryCondition::neumann());
    assert!(a.apply(&vec![1.0; 65]).iter().all(|v| v.abs() < 1e-9));

    let z = GridField::from_fn(&g, |x| (PI * x).cos());
    let az = a.apply(&z.values);
    let err = az.iter().zip(&z.values).map(|(l, v)| (l + PI * PI * v).abs()).fold(0.0, f64::max);
    assert!(err < 0.02, "{err}");

    let alpha = 1.0;
    let r = build_operator(&g, &BoundaryCondition::robin(alpha));
    let az = r.apply(&vec![1.0; 65]);
    let h = g.spacing();
    assert!((az[0] + 2.0 * alpha / h).abs() < 1e-9);
    assert!((az[64] + 2.0 * alpha / h).abs() < 1e-9);
    assert!(az[1..64].iter().all(|v| v.abs() < 1e-9));
}

#[test]
fn neumann_ground_state() {
    let e = first_eigenpair(&Grid::new(64).unwrap(), &BoundaryCondition::neumann()).unwrap();
    assert!(e.gamma0.abs() < 1e-10);
    assert!(e.e0.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
}

#[test]
fn robin_ground_state_matches_transcendental_root() {
    let exact = robin_oracle(1.0);
    assert!((exact - 1.7071).abs() < 1e-3, "{exact}");
    let e = first_eigenpair(&Grid::new(128).unwrap(), &BoundaryCondition::robin(1.0)).unwrap();
    assert!((e.gamma0 - exact).abs() < 1e-3, "{} vs {exact}", e.gamma0);
    assert!(e.e0.min() > 0.0);
    assert!((e.e0.sup_norm() - 1.0).abs() < 1e-15);
}

#[test]
fn near_dirichlet_limit() {
    let e = first_eigenpair(&Grid::new(128).unwrap(), &BoundaryCondition::robin(1e6)).unwrap();
    assert!((e.gamma0 - PI * PI).abs() < 0.05 * PI * PI, "{}", e.gamma0);
    assert!(e.e0.min() > 0.0);
}

#[test]
fn eigenvalue_converges_at_second_order() {
    let exact = robin_oracle(1.0);
    let err = |n| (first_eigenpair(&Grid::new(n).unwrap(), &BoundaryCondition::robin(1.0)).unwrap().gamma0 - exact).abs();
    let (e1, e2, e3) = (err(16), err(32), err(64));
    for ratio in [e1 / e2, e2 / e3] {
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }
}

#[test]
fn eigenfield_is_a_fixed_direction() {
    let g = Grid::new(32).unwrap();
    let bc = BoundaryCondition::robin_lr(0.5, 3.0);
    let e = first_eigenpair(&g, &bc).unwrap();
    let a = build_operator(&g, &bc);
    let res = a.apply(&e.e0.values).iter().zip(&e.e0.values).map(|(l, v)| (l + e.gamma0 * v).abs()).fold(0.0, f64::max);
    assert!(res < 1e-8, "{res}");
}

#[test]
fn step_examples() {
    let g = Grid::new(16).unwrap();
    let disc = Discretization::new(g, &BoundaryCondition::neumann()).unwrap();
    let one = disc.ones();
    let p = origin();

    let zero_h = Stepper::linear(&disc, &LinearCoefficientSpec::constant(0.0), 0.01).unwrap();
    let next = zero_h.step(&one, &p).unwrap();
    assert!(next.values.iter().all(|v| (v - 1.0).abs() < 1e-14));

    let c = 0.7;
    let dt = 0.01;
    let const_h = Stepper::linear(&disc, &LinearCoefficientSpec::constant(c), dt).unwrap();
    let next = const_h.step(&one, &p).unwrap();
    assert!(next.values.iter().all(|v| (v - (c * dt).exp()).abs() < 1e-13));

    let prob = ProblemSpec::nonlinear(quasi_periodic_h(), NonlinearitySpec::cubic(1.0, 5.0), 0.3, disc.bc);
    let s = Stepper::new(&disc, &prob, 1e-3).unwrap();
    let z = GridField::constant(&g, 0.0);
    assert_eq!(s.step(&z, &p).unwrap(), z);
}

#[test]
fn oversized_step_is_rejected_with_bound() {
    let disc = Discretization::new(Grid::new(16).unwrap(), &BoundaryCondition::neumann()).unwrap();
    let prob = ProblemSpec::nonlinear(LinearCoefficientSpec::constant(1.0), NonlinearitySpec::cubic(1.0, 1e4), 0.0, disc.bc);
    let bound = dt_max(&prob);
    assert!(bound < 1.0);
    match Stepper::new(&disc, &prob, 1.0) {
        Err(Error::StepTooLarge { dt, dt_max }) => {
            assert_eq!(dt, 1.0);
            assert_eq!(dt_max, bound);
        }
        other => panic!("{:?}", other.err()),
    }
}

#[test]
fn mismatched_boundary_condition_is_a_config_error() {
    let disc = Discretization::new(Grid::new(16).unwrap(), &BoundaryCondition::neumann()).unwrap();
    let prob = ProblemSpec::linear(LinearCoefficientSpec::constant(0.0), BoundaryCondition::robin(1.0));
    assert!(matches!(Stepper::new(&disc, &prob, 0.01), Err(Error::Config(_))));
}

#[test]
fn evolve_examples() {
    let g = Grid::new(64).unwrap();
    let disc = Discretization::new(g, &BoundaryCondition::neumann()).unwrap();
    let p = origin();
    let z0 = GridField::from_fn(&g, |x| 1.0 + (PI * x).cos());
    let heat = ProblemSpec::linear(LinearCoefficientSpec::constant(0.0), disc.bc);

    assert_eq!(evolve(&disc, &p, &z0, 0.0, &heat, 1e-3).unwrap(), z0);

    let out = evolve(&disc, &p, &z0, 2.0, &heat, 1e-3).unwrap();
    assert!(out.distance(&GridField::constant(&g, 1.0)) < 1e-2);
}

#[test]
fn discrete_semicocycle() {
    let g = Grid::new(16).unwrap();
    let disc = Discretization::new(g, &BoundaryCondition::robin(0.5)).unwrap();
    let prob = ProblemSpec::nonlinear(quasi_periodic_h(), NonlinearitySpec::cubic(0.5, 2.0), 0.1, disc.bc);
    let dt = 1e-3;
    let s = Stepper::new(&disc, &prob, dt).unwrap();
    let p = origin();
    let z0 = GridField::from_fn(&g, |x| 2.0 + x * x);
    let whole = s.evolve(&p, &z0, 3.0).unwrap();
    let half = s.evolve(&p, &z0, 1.2).unwrap();
    let split = s.evolve(&p.advance(1.2), &half, 1.8).unwrap();
    assert!(whole.distance(&split) < 1e-12, "{}", whole.distance(&split));
}

#[test]
fn linear_evolution_examples() {
    let g = Grid::new(32).unwrap();
    let disc = Discretization::new(g, &BoundaryCondition::neumann()).unwrap();
    let p = origin();
    let zero = GridField::constant(&g, 0.0);
    let h = quasi_periodic_h();
    assert_eq!(evolve_linear(&disc, &p, &zero, 1.0, &h, 1e-3).unwrap(), zero);

    let c = 0.8;
    let out = evolve_linear(&disc, &p, &disc.ones(), 1.0, &LinearCoefficientSpec::constant(c), 1e-3).unwrap();
    assert!(out.values.iter().all(|v| (v / c.exp() - 1.0).abs() < 1e-2));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let z1 = GridField::new((0..33).map(|_| rng.random_range(-1.0..1.0)).collect());
    let z2 = GridField::new((0..33).map(|_| rng.random_range(-1.0..1.0)).collect());
    let (a, b) = (1.7, -0.6);
    let combo = GridField::new(z1.values.iter().zip(&z2.values).map(|(x, y)| a * x + b * y).collect());
    let st = Stepper::linear(&disc, &h, 1e-3).unwrap();
    let u1 = st.evolve(&p, &z1, 1.0).unwrap();
    let u2 = st.evolve(&p, &z2, 1.0).unwrap();
    let uc = st.evolve(&p, &combo, 1.0).unwrap();
    let res = uc.values.iter().zip(u1.values.iter().zip(&u2.values)).map(|(c, (x, y))| (c - a * x - b * y).abs()).fold(0.0, f64::max);
    assert!(res < 1e-10, "{res}");
}

#[test]
fn step_count_handles_rounding() {
    assert_eq!(step_count(1.0, 1e-3), 1000);
    assert_eq!(step_count(0.3, 0.1), 3);
    assert_eq!(step_count(0.0, 0.1), 0);
    assert_eq!(step_count(0.25, 0.1), 3);
}

#[test]
fn step_preserves_order_and_oddness() {
    let g = Grid::new(16).unwrap();
    let disc = Discretization::new(g, &BoundaryCondition::robin(1.0)).unwrap();
    let prob = ProblemSpec::nonlinear(quasi_periodic_h(), NonlinearitySpec::cubic(0.8, 50.0), 0.5, disc.bc);
    let s = Stepper::new(&disc, &prob, 1e-3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let p = BasePoint::new([rng.random(), rng.random()], GOLDEN);
        let lo: Vec<f64> = (0..17).map(|_| rng.random_range(-3.0..3.0)).collect();
        let hi: Vec<f64> = lo.iter().map(|v| v + rng.random_range(0.0..1.0)).collect();
        let a = s.step(&GridField::new(lo.clone()), &p).unwrap();
        let b = s.step(&GridField::new(hi), &p).unwrap();
        assert!(a.values.iter().zip(&b.values).all(|(x, y)| x <= y));
        let neg = s.step(&GridField::new(lo.iter().map(|v| -v).collect()), &p).unwrap();
        assert!(neg.values.iter().zip(&a.values).all(|(x, y)| (x + y).abs() < 1e-12));
    }
}
