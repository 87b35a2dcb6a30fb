use crate::base_flow::BasePoint;
use crate::coefficients::{cubic_flow, LinearCoefficientSpec, Phase, SpacePart, TorusPolynomial};
use crate::error::{Error, Result};

use super::operator::{Discretization, Factorization};
use super::{sup_norm, GridField, ProblemSpec};

/// Largest admissible time step. The scheme is order preserving for every
/// `dt`; the bound keeps the reaction terms resolved, `dt * L <= 1` with `L`
/// the sup of `|gamma + h|` plus the Lipschitz constant of `g` on the
/// absorbing interval.
pub fn dt_max(prob: &ProblemSpec) -> f64 {
    let mut l = prob.gamma.abs() + prob.h.sup_abs_bound();
    if let (Some(g), Some(y)) = (&prob.g, prob.absorbing_radius()) {
        l += g.lipschitz(y);
    }
    if l > 0.0 {
        1.0 / l
    } else {
        f64::INFINITY
    }
}

/// Number of steps covering `[0, horizon]`; horizons within rounding of a
/// whole number of steps are not rounded up.
pub fn step_count(horizon: f64, dt: f64) -> usize {
    ((horizon / dt) * (1.0 - 1e-12) - 1e-9).ceil().max(0.0) as usize
}

/// Torus phases `2 pi m.theta` of a set of modes, advanced by rotation.
struct Phases {
    modes: Vec<[i64; 2]>,
    cs: Vec<(f64, f64)>,
    rot: Vec<(f64, f64)>,
}

const RESYNC: usize = 256;

impl Phases {
    fn new(modes: Vec<[i64; 2]>) -> Self {
        let n = modes.len();
        Self { modes, cs: vec![(1.0, 0.0); n], rot: vec![(1.0, 0.0); n] }
    }

    fn set(&mut self, theta: &[f64; 2]) {
        for (m, cs) in self.modes.iter().zip(self.cs.iter_mut()) {
            let (s, c) = (2.0 * std::f64::consts::PI * (m[0] as f64 * theta[0] + m[1] as f64 * theta[1])).sin_cos();
            *cs = (c, s);
        }
    }

    fn set_rotation(&mut self, omega: &[f64; 2], dt: f64) {
        for (m, r) in self.modes.iter().zip(self.rot.iter_mut()) {
            let (s, c) = (2.0 * std::f64::consts::PI * (m[0] as f64 * omega[0] + m[1] as f64 * omega[1]) * dt).sin_cos();
            *r = (c, s);
        }
    }

    #[inline]
    fn rotate(&mut self) {
        for (z, r) in self.cs.iter_mut().zip(&self.rot) {
            *z = (z.0 * r.0 - z.1 * r.1, z.0 * r.1 + z.1 * r.0);
        }
    }
}

/// Coefficient evaluated from phases: `constant + sum_j (a_j cos + b_j sin)`
/// on the torus, plus node profiles weighted by their own phase terms.
#[derive(Clone, Debug, Default)]
struct Terms {
    constant: f64,
    base: Vec<(usize, f64, f64)>,
    space: Vec<(usize, f64, f64, Vec<f64>)>,
}

impl Terms {
    fn compile(
        constant: f64,
        base: &TorusPolynomial,
        space: &[SpacePart],
        nodes: &[f64],
        modes: &mut Vec<[i64; 2]>,
    ) -> Self {
        let mut t = Terms { constant, ..Default::default() };
        for md in &base.modes {
            if md.m == [0, 0] {
                t.constant += md.cos;
                continue;
            }
            modes.push(md.m);
            t.base.push((modes.len() - 1, md.cos, md.sin));
        }
        for sp in space {
            let (a, b) = match sp.phase {
                Phase::Cos => (sp.amplitude, 0.0),
                Phase::Sin => (0.0, sp.amplitude),
            };
            modes.push(sp.m);
            let idx = modes.len() - 1;
            let prof: Vec<f64> = nodes.iter().map(|&x| sp.profile.eval(x)).collect();
            if prof.iter().all(|&v| v == 1.0) {
                t.base.push((idx, a, b));
            } else {
                t.space.push((idx, a, b, prof));
            }
        }
        t
    }

    #[inline]
    fn torus(&self, cs: &[(f64, f64)]) -> f64 {
        self.base.iter().fold(self.constant, |acc, &(j, a, b)| acc + a * cs[j].0 + b * cs[j].1)
    }

    fn is_uniform(&self) -> bool {
        self.space.is_empty()
    }

    fn fill(&self, cs: &[(f64, f64)], out: &mut [f64]) {
        let t = self.torus(cs);
        out.iter_mut().for_each(|v| *v = t);
        for (j, a, b, prof) in &self.space {
            let f = a * cs[*j].0 + b * cs[*j].1;
            for (o, p) in out.iter_mut().zip(prof) {
                *o += f * p;
            }
        }
    }
}

struct Cubic {
    r0: f64,
    k: Terms,
}

/// Precomputed one-step map for a fixed problem and step size.
///
/// One step from time `t` is: backward Euler for `y_xx + gamma0 y` followed
/// by the factor `exp(-gamma0 dt)` (exact on the first eigenfield), then a
/// Strang split of the reaction: `exp(dt/2 (gamma + h))`, the exact flow of
/// `y' = g(y)` over `dt`, and `exp(dt/2 (gamma + h))` again. Coefficients are
/// frozen at the base point of the step midpoint.
pub struct Stepper<'a> {
    disc: &'a Discretization,
    prob: ProblemSpec,
    dt: f64,
    fac: Factorization,
    decay: f64,
    modes: Vec<[i64; 2]>,
    h: Terms,
    cubic: Option<Cubic>,
}

/// Per-run scratch space.
struct Work {
    phases: Phases,
    lin: Vec<f64>,
    stiff: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(disc: &'a Discretization, prob: &ProblemSpec, dt: f64) -> Result<Self> {
        prob.validate()?;
        if prob.bc != disc.bc {
            return Err(Error::Config(format!(
                "problem boundary condition {} does not match the discretization ({})",
                prob.bc, disc.bc
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        let bound = dt_max(prob);
        if dt > bound {
            return Err(Error::StepTooLarge { dt, dt_max: bound });
        }
        let gamma0 = disc.gamma0();
        let fac = disc.operator.affine(-dt, 1.0 - dt * gamma0).factor()?;
        let nodes = disc.grid.nodes();
        let mut modes = Vec::new();
        let h = Terms::compile(prob.gamma + prob.h.constant_shift, &prob.h.base_part, &prob.h.space_part, &nodes, &mut modes);
        let cubic = prob.g.as_ref().map(|g| Cubic {
            r0: g.dead_zone,
            k: Terms::compile(g.stiffness.constant, &g.stiffness.base_part, &g.stiffness.space_part, &nodes, &mut modes),
        });
        Ok(Self { disc, prob: prob.clone(), dt, fac, decay: (-dt * gamma0).exp(), modes, h, cubic })
    }

    /// Linear stepper for `h` on the discretization's boundary condition.
    pub fn linear(disc: &'a Discretization, h: &LinearCoefficientSpec, dt: f64) -> Result<Self> {
        Self::new(disc, &ProblemSpec::linear(h.clone(), disc.bc), dt)
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.prob
    }

    pub fn discretization(&self) -> &Discretization {
        self.disc
    }

    pub fn n_nodes(&self) -> usize {
        self.disc.n_nodes()
    }

    fn work(&self) -> Work {
        let n = self.n_nodes();
        Work { phases: Phases::new(self.modes.clone()), lin: vec![0.0; n], stiff: vec![0.0; n] }
    }

    /// Advance every state by one step; the phases must hold the midpoint.
    fn advance(&self, w: &mut Work, states: &mut [Vec<f64>]) {
        let cs = &w.phases.cs;
        let lin_dt = if self.cubic.is_some() { 0.5 * self.dt } else { self.dt };
        let uniform_h = self.h.is_uniform();
        let (first, second) = if uniform_h {
            let m = (lin_dt * self.h.torus(cs)).exp();
            (m * self.decay, m)
        } else {
            self.h.fill(cs, &mut w.lin);
            w.lin.iter_mut().for_each(|v| *v = (lin_dt * *v).exp());
            (self.decay, 1.0)
        };
        let k_uniform = match &self.cubic {
            Some(c) if c.k.is_uniform() => Some(c.k.torus(cs)),
            Some(c) => {
                c.k.fill(cs, &mut w.stiff);
                None
            }
            None => None,
        };
        for z in states.iter_mut() {
            self.fac.solve(z);
            if uniform_h {
                z.iter_mut().for_each(|v| *v *= first);
            } else {
                for (v, m) in z.iter_mut().zip(&w.lin) {
                    *v *= m * first;
                }
            }
            if let Some(c) = &self.cubic {
                match k_uniform {
                    Some(k) => z.iter_mut().for_each(|v| *v = cubic_flow(k, c.r0, *v, self.dt)),
                    None => {
                        for (v, k) in z.iter_mut().zip(&w.stiff) {
                            *v = cubic_flow(*k, c.r0, *v, self.dt);
                        }
                    }
                }
                if uniform_h {
                    z.iter_mut().for_each(|v| *v *= second);
                } else {
                    for (v, m) in z.iter_mut().zip(&w.lin) {
                        *v *= m;
                    }
                }
            }
        }
    }

    /// One step from the fiber over `p`.
    pub fn step(&self, state: &GridField, p: &BasePoint) -> Result<GridField> {
        self.check_len(state)?;
        let mut w = self.work();
        w.phases.set(&p.advance(0.5 * self.dt).theta);
        let mut states = [state.values.clone()];
        self.advance(&mut w, &mut states);
        let [z] = states;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { time: self.dt });
        }
        Ok(GridField::new(z))
    }

    fn check_len(&self, z: &GridField) -> Result<()> {
        if z.len() != self.n_nodes() {
            return Err(Error::Config(format!("field has {} nodes, grid has {}", z.len(), self.n_nodes())));
        }
        Ok(())
    }

    /// Run `n_steps` steps on a batch of states sharing the base orbit. Step
    /// `j` covers `[t0 + j dt, t0 + (j+1) dt]` along `origin.advance(t)`.
    /// After every `every` steps `hook(steps_done, time, states)` is called;
    /// returning `false` stops the run.
    pub fn run<F>(
        &self,
        origin: &BasePoint,
        t0: f64,
        n_steps: usize,
        states: &mut [Vec<f64>],
        every: usize,
        mut hook: F,
    ) -> Result<()>
    where
        F: FnMut(usize, f64, &mut [Vec<f64>]) -> Result<bool>,
    {
        let every = every.max(1);
        let mut w = self.work();
        w.phases.set_rotation(&origin.omega, self.dt);
        for j in 0..n_steps {
            if j % RESYNC == 0 {
                let mid = t0 + (j as f64 + 0.5) * self.dt;
                w.phases.set(&origin.advance(mid).theta);
            }
            self.advance(&mut w, states);
            w.phases.rotate();
            let done = j + 1;
            let time = t0 + done as f64 * self.dt;
            let at_hook = done % every == 0;
            if (at_hook || done % 1024 == 0 || done == n_steps) && states.iter().any(|z| !sup_norm(z).is_finite()) {
                return Err(Error::BlowUp { time });
            }
            if at_hook && !hook(done, time, states)? {
                break;
            }
        }
        Ok(())
    }

    /// State at time `horizon` of the trajectory starting from `z0` on the
    /// fiber over `p`.
    pub fn evolve(&self, p: &BasePoint, z0: &GridField, horizon: f64) -> Result<GridField> {
        if !(horizon >= 0.0) {
            return Err(Error::Config(format!("horizon must be nonnegative, got {horizon}")));
        }
        self.check_len(z0)?;
        let mut states = [z0.values.clone()];
        self.run(p, 0.0, step_count(horizon, self.dt), &mut states, usize::MAX, |_, _, _| Ok(true))?;
        let [z] = states;
        Ok(GridField::new(z))
    }
}

pub fn evolve(
    disc: &Discretization,
    p: &BasePoint,
    z0: &GridField,
    horizon: f64,
    prob: &ProblemSpec,
    dt: f64,
) -> Result<GridField> {
    Stepper::new(disc, prob, dt)?.evolve(p, z0, horizon)
}

pub fn evolve_linear(
    disc: &Discretization,
    p: &BasePoint,
    z0: &GridField,
    horizon: f64,
    h: &LinearCoefficientSpec,
    dt: f64,
) -> Result<GridField> {
    Stepper::linear(disc, h, dt)?.evolve(p, z0, horizon)
}
