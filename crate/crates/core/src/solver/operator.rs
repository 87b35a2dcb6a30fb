use crate::error::{Error, Result};

use super::{BoundaryCondition, Grid, GridField};

/// Tridiagonal matrix stored by diagonals. `lower[0]` and `upper[n-1]` are
/// unused.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(z.len(), n, "field length does not match operator");
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * z[i];
                if i > 0 {
                    v += self.lower[i] * z[i - 1];
                }
                if i + 1 < n {
                    v += self.upper[i] * z[i + 1];
                }
                v
            })
            .collect()
    }

    /// `s * self + shift * I`
    pub fn affine(&self, s: f64, shift: f64) -> Self {
        Self {
            lower: self.lower.iter().map(|v| s * v).collect(),
            diag: self.diag.iter().map(|v| s * v + shift).collect(),
            upper: self.upper.iter().map(|v| s * v).collect(),
        }
    }

    pub fn factor(&self) -> Result<Factorization> {
        Factorization::new(self)
    }
}

/// Thomas-algorithm factorization of a tridiagonal matrix.
#[derive(Clone, Debug)]
pub struct Factorization {
    lower: Vec<f64>,
    upper_mod: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl Factorization {
    fn new(m: &Tridiagonal) -> Result<Self> {
        let n = m.len();
        let mut upper_mod = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev = 0.0;
        for i in 0..n {
            let lo = if i > 0 { m.lower[i] } else { 0.0 };
            let piv = m.diag[i] - lo * prev;
            if !(piv.abs() > 0.0 && piv.is_finite()) {
                return Err(Error::NoConvergence(format!("singular tridiagonal pivot at row {i}")));
            }
            inv_pivot[i] = 1.0 / piv;
            prev = if i + 1 < n { m.upper[i] * inv_pivot[i] } else { 0.0 };
            upper_mod[i] = prev;
        }
        Ok(Self { lower: m.lower.clone(), upper_mod, inv_pivot })
    }

    /// Solve in place.
    #[inline]
    pub fn solve(&self, d: &mut [f64]) {
        let n = d.len();
        d[0] *= self.inv_pivot[0];
        for i in 1..n {
            d[i] = (d[i] - self.lower[i] * d[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            d[i] -= self.upper_mod[i] * d[i + 1];
        }
    }
}

/// Discrete Laplacian with ghost-point boundary rows: at `x = 0` the ghost
/// value is `y_{-1} = y_1 - 2 h alpha_left y_0`, symmetrically at `x = 1`.
pub fn build_operator(grid: &Grid, bc: &BoundaryCondition) -> Tridiagonal {
    let n = grid.n_nodes();
    let h = grid.spacing();
    let s = 1.0 / (h * h);
    let mut lower = vec![s; n];
    let mut diag = vec![-2.0 * s; n];
    let mut upper = vec![s; n];
    lower[0] = 0.0;
    upper[n - 1] = 0.0;
    upper[0] = 2.0 * s;
    lower[n - 1] = 2.0 * s;
    diag[0] = -(2.0 + 2.0 * h * bc.alpha_left) * s;
    diag[n - 1] = -(2.0 + 2.0 * h * bc.alpha_right) * s;
    Tridiagonal { lower, diag, upper }
}

/// Trapezoidal weights; the operator is self-adjoint in the inner product
/// they define.
fn weights(n: usize) -> Vec<f64> {
    let mut w = vec![1.0; n];
    w[0] = 0.5;
    w[n - 1] = 0.5;
    w
}

/// Smallest eigenvalue `gamma0` of minus the operator with its positive
/// eigenfield, normalized to sup-norm one.
#[derive(Clone, Debug, PartialEq)]
pub struct Eigenpair {
    pub gamma0: f64,
    pub e0: GridField,
    pub bc: BoundaryCondition,
    pub iterations: usize,
}

pub const EIGEN_MAX_ITER: usize = 100_000;

pub fn first_eigenpair(grid: &Grid, bc: &BoundaryCondition) -> Result<Eigenpair> {
    bc.validate()?;
    let op = build_operator(grid, bc);
    let n = op.len();
    let w = weights(n);
    // inverse iteration on -A + I, which is a nonsingular M-matrix
    let fac = op.affine(-1.0, 1.0).factor()?;
    let mut v = vec![1.0; n];
    let rayleigh = |v: &[f64]| {
        let av = op.apply(v);
        let num: f64 = (0..n).map(|i| -w[i] * v[i] * av[i]).sum();
        let den: f64 = (0..n).map(|i| w[i] * v[i] * v[i]).sum();
        num / den
    };
    for it in 1..=EIGEN_MAX_ITER {
        let prev = v.clone();
        fac.solve(&mut v);
        let norm = super::sup_norm(&v);
        v.iter_mut().for_each(|x| *x /= norm);
        let change = v.iter().zip(&prev).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if change <= 1e-13 {
            let lambda = rayleigh(&v);
            if v.iter().any(|&x| x <= 0.0) {
                return Err(Error::NoConvergence("first eigenfield is not strictly positive".into()));
            }
            let gamma0 = if lambda.abs() < 1e-13 { 0.0 } else { lambda };
            return Ok(Eigenpair { gamma0, e0: GridField::new(v), bc: *bc, iterations: it });
        }
    }
    Err(Error::NoConvergence(format!("inverse iteration did not converge in {EIGEN_MAX_ITER} iterations")))
}

/// Grid, boundary condition, operator and first eigenpair of one experiment.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub grid: Grid,
    pub bc: BoundaryCondition,
    pub operator: Tridiagonal,
    pub ground: Eigenpair,
}

impl Discretization {
    pub fn new(grid: Grid, bc: &BoundaryCondition) -> Result<Self> {
        let ground = first_eigenpair(&grid, bc)?;
        Ok(Self { grid, bc: *bc, operator: build_operator(&grid, bc), ground })
    }

    #[inline]
    pub fn gamma0(&self) -> f64 {
        self.ground.gamma0
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.grid.n_nodes()
    }

    pub fn ones(&self) -> GridField {
        GridField::constant(&self.grid, 1.0)
    }
}
