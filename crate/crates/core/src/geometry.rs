//! Charts carrying a local contact form `α = Σ a_j dx_j`, and the pointwise
//! contact calculus on them: `dα`, the Reeb field, the musical maps and the
//! canonical splittings of vectors and covectors.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::expr::{BoundExpr, Expression};
use crate::numkernel::{numerical_rank, Matrix, SquareSolver, Vector};

/// Tangent vectors and covectors are plain component vectors in chart coordinates.
pub type TangentVector = Vector;
pub type CoVector = Vector;

/// Tolerance used for the `η(Z) = 0` precondition of [`Chart::sharp`].
pub const Z0_TOL: f64 = 1e-9;

/// Smallest accepted pivot ratio of the bordered contact system.
const PIVOT_TOL: f64 = 1e-13;

/// Open interval of a non-periodic coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    pub const PERIOD: Interval = Interval { lo: 0.0, hi: TAU };

    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        v > self.lo && v < self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(v: f64) -> f64 {
    let w = v.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Signed shortest arc from `a` to `b` on the circle, in `(−π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (b - a).rem_euclid(TAU);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

/// A coordinate chart with a local contact form.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    id: String,
    names: Vec<String>,
    periodic: Vec<bool>,
    alpha: Vec<BoundExpr>,
    domain: Vec<Interval>,
    sample_box: Vec<Interval>,
    guard: Option<BoundExpr>,
}

impl Chart {
    /// Builds a chart on the full coordinate space (periodic axes use `[0, 2π)`).
    pub fn new<S: AsRef<str>>(id: &str, names: &[S], periodic: &[bool], alpha: &[Expression]) -> Result<Self> {
        let dim = names.len();
        if dim < 3 || dim.is_multiple_of(2) {
            return Err(Error::Schema {
                path: format!("chart `{id}`"),
                message: format!("dimension must be odd and >= 3, got {dim}"),
            });
        }
        for (what, len) in [("periodic flags", periodic.len()), ("alpha coefficients", alpha.len())] {
            if len != dim {
                return Err(Error::Schema {
                    path: format!("chart `{id}`"),
                    message: format!("expected {dim} {what}, got {len}"),
                });
            }
        }
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        let alpha = alpha.iter().map(|a| a.bind(&names)).collect::<Result<Vec<_>>>()?;
        let domain: Vec<Interval> = periodic
            .iter()
            .map(|&p| if p { Interval::PERIOD } else { Interval::REAL_LINE })
            .collect();
        let sample_box = default_sample_box(&domain, periodic);
        Ok(Self {
            id: id.to_string(),
            names,
            periodic: periodic.to_vec(),
            alpha,
            domain,
            sample_box,
            guard: None,
        })
    }

    /// Restricts non-periodic coordinates to open intervals.
    pub fn with_domain(mut self, domain: Vec<Interval>) -> Result<Self> {
        self.check_len("domain", domain.len())?;
        self.domain = domain
            .into_iter()
            .zip(&self.periodic)
            .map(|(iv, &p)| if p { Interval::PERIOD } else { iv })
            .collect();
        self.sample_box = default_sample_box(&self.domain, &self.periodic);
        Ok(self)
    }

    /// Box that random and quasi-random probes are drawn from.
    pub fn with_sample_box(mut self, sample_box: Vec<Interval>) -> Result<Self> {
        self.check_len("sample box", sample_box.len())?;
        self.sample_box = sample_box
            .into_iter()
            .zip(&self.periodic)
            .map(|(iv, &p)| if p { Interval::PERIOD } else { iv })
            .collect();
        Ok(self)
    }

    /// Positive quantity that degrades towards the chart's edge; the flow
    /// switches charts when it drops below the switch tolerance.
    pub fn with_guard(mut self, guard: &Expression) -> Result<Self> {
        self.guard = Some(guard.bind(&self.names)?);
        Ok(self)
    }

    fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::Schema {
                path: format!("chart `{}`", self.id),
                message: format!("expected {} {what} entries, got {len}", self.dim()),
            });
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// `n` in `dim = 2n + 1`.
    pub fn half_dim(&self) -> usize {
        (self.dim() - 1) / 2
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn domain(&self) -> &[Interval] {
        &self.domain
    }

    pub fn sample_box(&self) -> &[Interval] {
        &self.sample_box
    }

    pub fn alpha_exprs(&self) -> impl Iterator<Item = &Expression> {
        self.alpha.iter().map(|a| a.expression())
    }

    pub fn guard_expr(&self) -> Option<&Expression> {
        self.guard.as_ref().map(|g| g.expression())
    }

    /// Binds an expression against this chart's coordinates.
    pub fn bind(&self, e: &Expression) -> Result<BoundExpr> {
        e.bind(&self.names)
    }

    /// Periodic coordinates wrapped into `[0, 2π)`.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.periodic)
            .map(|(&v, &p)| if p { wrap_angle(v) } else { v })
            .collect()
    }

    /// Index of the first coordinate outside the domain, if any.
    pub fn out_of_domain(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.dim() {
            return Some(x.len().min(self.dim()));
        }
        x.iter()
            .zip(&self.domain)
            .zip(&self.periodic)
            .position(|((&v, iv), &p)| !v.is_finite() || (!p && !iv.contains(v)))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.out_of_domain(x).is_none()
    }

    pub fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        match self.out_of_domain(x) {
            Some(coordinate) => Err(Error::OutOfDomain {
                chart: self.id.clone(),
                coordinate,
            }),
            None => Ok(()),
        }
    }

    /// Smallest distance to a bounded domain edge, as a fraction of the interval width.
    pub fn boundary_margin(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.domain)
            .zip(&self.periodic)
            .filter(|(_, &p)| !p)
            .filter(|((_, iv), _)| iv.is_bounded())
            .map(|((&v, iv), _)| ((v - iv.lo).min(iv.hi - v) / (iv.hi - iv.lo)).max(0.0))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn guard_value(&self, x: &[f64]) -> Option<f64> {
        self.guard.as_ref().map(|g| g.eval(x).map(f64::abs).unwrap_or(0.0))
    }

    pub fn alpha_at(&self, x: &[f64]) -> Result<CoVector> {
        self.check_domain(x)?;
        self.alpha_unchecked(x)
    }

    fn alpha_unchecked(&self, x: &[f64]) -> Result<CoVector> {
        let v = self.alpha.iter().map(|a| a.eval(x)).collect::<Result<Vec<_>>>()?;
        Ok(Vector::from_vec(v))
    }

    /// Matrix `Ω` of `dα` with `Ω_jk = ∂_j a_k − ∂_k a_j`, so `dα(u, v) = uᵀΩv`
    /// and `−i_X dα = Ω·X`.
    pub fn dalpha_at(&self, x: &[f64]) -> Result<Matrix> {
        self.check_domain(x)?;
        self.dalpha_unchecked(x)
    }

    fn dalpha_unchecked(&self, x: &[f64]) -> Result<Matrix> {
        let d = self.dim();
        // jac[k][j] = ∂_j a_k
        let jac = self.alpha.iter().map(|a| a.gradient(x)).collect::<Result<Vec<_>>>()?;
        Ok(Matrix::from_fn(d, d, |j, k| jac[k][j] - jac[j][k]))
    }

    /// Evaluates α, dα and the Reeb field at `x` once.
    pub fn frame(&self, x: &[f64]) -> Result<ContactFrame> {
        self.check_domain(x)?;
        let alpha = self.alpha_unchecked(x)?;
        let dalpha = self.dalpha_unchecked(x)?;
        let d = self.dim();
        // bordered system [Ω α; αᵀ 0]·(X, λ) = (η, c)
        let system = Matrix::from_fn(d + 1, d + 1, |i, j| match (i < d, j < d) {
            (true, true) => dalpha[(i, j)],
            (true, false) => alpha[i],
            (false, true) => alpha[j],
            (false, false) => 0.0,
        });
        let system = SquareSolver::new(system, PIVOT_TOL)?;
        let mut rhs = Vector::zeros(d + 1);
        rhs[d] = 1.0;
        let reeb = system.solve(&rhs)?.rows(0, d).into_owned();
        Ok(ContactFrame {
            alpha,
            dalpha,
            reeb,
            system,
        })
    }

    pub fn reeb_at(&self, x: &[f64]) -> Result<TangentVector> {
        Ok(self.frame(x)?.reeb)
    }

    pub fn sharp(&self, x: &[f64], eta: &CoVector) -> Result<TangentVector> {
        self.frame(x)?.sharp(eta)
    }

    pub fn decompose_vector(&self, x: &[f64], v: &TangentVector) -> Result<(f64, TangentVector)> {
        Ok(self.frame(x)?.decompose_vector(v))
    }

    pub fn decompose_covector(&self, x: &[f64], eta: &CoVector) -> Result<(f64, CoVector)> {
        Ok(self.frame(x)?.decompose_covector(eta))
    }

    /// Nondegeneracy test of `α ∧ (dα)ⁿ` at `x`: the restriction of `dα` to
    /// `ker α` must have full rank `2n`.
    pub fn contact_check(&self, x: &[f64], tol: f64) -> ContactReport {
        let (alpha, dalpha) = match self
            .check_domain(x)
            .and_then(|_| Ok((self.alpha_unchecked(x)?, self.dalpha_unchecked(x)?)))
        {
            Ok(v) => v,
            Err(e) => {
                return ContactReport {
                    ok: false,
                    det: 0.0,
                    rank: 0,
                    error: Some(e.to_string()),
                }
            }
        };
        let basis = kernel_basis(&alpha);
        if basis.ncols() != 2 * self.half_dim() {
            return ContactReport {
                ok: false,
                det: 0.0,
                rank: 0,
                error: Some("alpha vanishes".into()),
            };
        }
        let restricted = basis.transpose() * &dalpha * &basis;
        let rank = numerical_rank(&restricted, tol);
        ContactReport {
            ok: rank == restricted.nrows(),
            det: restricted.determinant().abs(),
            rank,
            error: None,
        }
    }
}

fn default_sample_box(domain: &[Interval], periodic: &[bool]) -> Vec<Interval> {
    domain
        .iter()
        .zip(periodic)
        .map(|(iv, &p)| {
            if p {
                Interval::PERIOD
            } else {
                Interval::new(iv.lo.max(-2.0), iv.hi.min(2.0))
            }
        })
        .collect()
}

/// Basis of `ker α`: `e_j − (a_j / a_piv)·e_piv` for `j ≠ piv`, where `piv` is
/// the first coordinate whose coefficient is at least `1e-3·max|a|`.
///
/// Returns an empty matrix when α vanishes.
pub fn kernel_basis(alpha: &CoVector) -> Matrix {
    let d = alpha.len();
    let amax = alpha.amax();
    if amax == 0.0 || !amax.is_finite() {
        return Matrix::zeros(d, 0);
    }
    let piv = alpha.iter().position(|a| a.abs() >= 1e-3 * amax).unwrap();
    let mut basis = Matrix::zeros(d, d - 1);
    for (col, j) in (0..d).filter(|&j| j != piv).enumerate() {
        basis[(j, col)] = 1.0;
        basis[(piv, col)] = -alpha[j] / alpha[piv];
    }
    basis
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactReport {
    pub ok: bool,
    /// `|det|` of `dα` restricted to the kernel basis of [`kernel_basis`].
    pub det: f64,
    pub rank: usize,
    pub error: Option<String>,
}

/// α, dα and the Reeb field evaluated at one point.
#[derive(Debug, Clone)]
pub struct ContactFrame {
    pub alpha: CoVector,
    pub dalpha: Matrix,
    pub reeb: TangentVector,
    system: SquareSolver,
}

impl ContactFrame {
    /// `α♭(X) = −i_X dα`.
    pub fn flat(&self, v: &TangentVector) -> CoVector {
        &self.dalpha * v
    }

    /// The unique `X` with `α(X) = 0` and `−i_X dα = η`, for `η(Z) = 0`.
    pub fn sharp(&self, eta: &CoVector) -> Result<TangentVector> {
        let r = eta.dot(&self.reeb);
        if r.abs() > Z0_TOL * (1.0 + eta.amax()) {
            return Err(Error::NotInZ0 { residual: r.abs() });
        }
        let d = self.alpha.len();
        let mut rhs = Vector::zeros(d + 1);
        rhs.rows_mut(0, d).copy_from(eta);
        Ok(self.system.solve(&rhs)?.rows(0, d).into_owned())
    }

    /// `X = α(X)·Z + X̂` with `α(X̂) = 0`.
    pub fn decompose_vector(&self, v: &TangentVector) -> (f64, TangentVector) {
        let a = self.alpha.dot(v);
        (a, v - &self.reeb * a)
    }

    /// `η = η(Z)·α + η̂` with `η̂(Z) = 0`.
    pub fn decompose_covector(&self, eta: &CoVector) -> (f64, CoVector) {
        let c = eta.dot(&self.reeb);
        (c, eta - &self.alpha * c)
    }

    /// `Z(f)` for a function with gradient `df`.
    pub fn reeb_derivative(&self, df: &CoVector) -> f64 {
        df.dot(&self.reeb)
    }

    /// `X_f = f·Z + α♯(df − df(Z)·α)`.
    pub fn hamiltonian(&self, f: f64, df: &CoVector) -> Result<TangentVector> {
        let (_, hat) = self.decompose_covector(df);
        Ok(&self.reeb * f + self.sharp(&hat)?)
    }
}
