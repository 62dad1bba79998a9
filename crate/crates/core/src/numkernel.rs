//! Dense linear algebra and vector-field calculus shared by the geometric modules.

use nalgebra::{DMatrix, DVector, Dyn, FullPivLU};

use crate::error::{Error, Result};
use crate::expr::BoundExpr;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Default numerical-rank threshold, relative to the largest singular value.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Finite-difference step scale `cbrt(eps)` used for outer derivatives.
pub fn fd_step(x: &[f64], dir: &[f64]) -> f64 {
    let scale = x.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let dnorm = dir.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    f64::EPSILON.cbrt() * scale / dnorm.max(f64::MIN_POSITIVE)
}

fn shifted(x: &[f64], dir: &[f64], h: f64) -> Vec<f64> {
    x.iter().zip(dir).map(|(a, d)| a + h * d).collect()
}

/// A scalar function on a chart's coordinate space.
pub trait ScalarField: Sync {
    fn value(&self, x: &[f64]) -> Result<f64>;

    /// Derivative along `dir`; central differences unless overridden.
    fn directional(&self, x: &[f64], dir: &[f64]) -> Result<f64> {
        if dir.iter().all(|d| *d == 0.0) {
            return Ok(0.0);
        }
        let h = fd_step(x, dir);
        let fp = self.value(&shifted(x, dir, h))?;
        let fm = self.value(&shifted(x, dir, -h))?;
        Ok((fp - fm) / (2.0 * h))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vector> {
        let n = x.len();
        let mut g = Vector::zeros(n);
        let mut e = vec![0.0; n];
        for i in 0..n {
            e[i] = 1.0;
            g[i] = self.directional(x, &e)?;
            e[i] = 0.0;
        }
        Ok(g)
    }
}

impl ScalarField for BoundExpr {
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.eval(x)
    }

    fn directional(&self, x: &[f64], dir: &[f64]) -> Result<f64> {
        Ok(self.eval_dual(x, dir)?.1)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vector> {
        Ok(Vector::from_vec(BoundExpr::gradient(self, x)?))
    }
}

/// Wraps a closure as a [`ScalarField`] differentiated by central differences.
pub struct FnScalar<F>(pub F);

impl<F> ScalarField for FnScalar<F>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    fn value(&self, x: &[f64]) -> Result<f64> {
        (self.0)(x)
    }
}

/// A vector field on a chart's coordinate space.
pub trait VectorField: Sync {
    fn eval(&self, x: &[f64]) -> Result<Vector>;

    /// Jacobian-vector product `DX(x)·v`; central differences unless overridden.
    fn jvp(&self, x: &[f64], v: &[f64]) -> Result<Vector> {
        if v.iter().all(|d| *d == 0.0) {
            return Ok(Vector::zeros(x.len()));
        }
        let h = fd_step(x, v);
        let fp = self.eval(&shifted(x, v, h))?;
        let fm = self.eval(&shifted(x, v, -h))?;
        Ok((fp - fm) / (2.0 * h))
    }
}

/// Vector field whose components are expressions; JVPs are exact.
pub struct ExprVectorField {
    components: Vec<BoundExpr>,
}

impl ExprVectorField {
    pub fn new(components: Vec<BoundExpr>) -> Self {
        Self { components }
    }
}

impl VectorField for ExprVectorField {
    fn eval(&self, x: &[f64]) -> Result<Vector> {
        let vals = self.components.iter().map(|c| c.eval(x)).collect::<Result<Vec<_>>>()?;
        Ok(Vector::from_vec(vals))
    }

    fn jvp(&self, x: &[f64], v: &[f64]) -> Result<Vector> {
        let vals = self
            .components
            .iter()
            .map(|c| c.eval_dual(x, v).map(|r| r.1))
            .collect::<Result<Vec<_>>>()?;
        Ok(Vector::from_vec(vals))
    }
}

/// Wraps a closure as a [`VectorField`] differentiated by central differences.
pub struct FnVector<F>(pub F);

impl<F> VectorField for FnVector<F>
where
    F: Fn(&[f64]) -> Result<Vector> + Sync,
{
    fn eval(&self, x: &[f64]) -> Result<Vector> {
        (self.0)(x)
    }
}

pub fn grad(field: &dyn ScalarField, x: &[f64]) -> Result<Vector> {
    field.gradient(x)
}

/// Result of [`solve`].
#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vector,
    /// `‖A·x − b‖₂`.
    pub residual: f64,
    pub rank: usize,
}

/// Least-squares solution of `A·x = b`, exact when consistent.
///
/// Fails with [`Error::SingularSystem`] when the numerical column rank is
/// deficient at relative tolerance `tol`.
pub fn solve(a: &Matrix, b: &Vector, tol: f64) -> Result<Solution> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: b.len(),
        });
    }
    let cols = a.ncols();
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cut = tol * smax;
    let rank = svd.singular_values.iter().filter(|s| **s > cut).count();
    if rank < cols || smax == 0.0 {
        return Err(Error::SingularSystem { rank, needed: cols });
    }
    let x = svd
        .solve(b, cut)
        .map_err(|_| Error::SingularSystem { rank, needed: cols })?;
    let residual = (a * &x - b).norm();
    Ok(Solution { x, residual, rank })
}

/// Full-pivot LU factorization of a square matrix, reusable across right-hand sides.
///
/// Elimination only combines entries that are actually present, so exact zeros
/// in structured systems survive into the solution.
#[derive(Debug, Clone)]
pub struct SquareSolver {
    lu: FullPivLU<f64, Dyn, Dyn>,
}

impl SquareSolver {
    /// Fails with [`Error::SingularSystem`] when a pivot falls below `tol` times the largest one.
    pub fn new(a: Matrix, tol: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.ncols(),
            });
        }
        let lu = a.full_piv_lu();
        let pivots = lu.u().diagonal();
        let pmax = pivots.amax();
        let rank = pivots.iter().filter(|p| p.abs() > tol * pmax).count();
        if rank < n || pmax == 0.0 || !pmax.is_finite() {
            return Err(Error::SingularSystem { rank, needed: n });
        }
        Ok(Self { lu })
    }

    pub fn solve(&self, b: &Vector) -> Result<Vector> {
        let n = b.len();
        self.lu.solve(b).ok_or(Error::SingularSystem { rank: 0, needed: n })
    }
}

/// Number of singular values above `tol · σ_max`.
pub fn numerical_rank(a: &Matrix, tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().singular_values();
    let smax = sv.max();
    if smax == 0.0 || !smax.is_finite() {
        return 0;
    }
    sv.iter().filter(|s| **s > tol * smax).count()
}

/// Matrix whose rows are the given vectors.
pub fn rows_matrix(rows: &[Vector], ncols: usize) -> Matrix {
    Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

/// `[X, Y](x) = DY·X − DX·Y`.
pub fn lie_bracket(x_field: &dyn VectorField, y_field: &dyn VectorField, x: &[f64]) -> Result<Vector> {
    let xv = x_field.eval(x)?;
    let yv = y_field.eval(x)?;
    let dy_x = y_field.jvp(x, xv.as_slice())?;
    let dx_y = x_field.jvp(x, yv.as_slice())?;
    Ok(dy_x - dx_y)
}
