//! Contact Hamiltonian vector fields and the Jacobi bracket on a cooriented chart.

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::geometry::{Chart, TangentVector};
use crate::numkernel::{lie_bracket, numerical_rank, rows_matrix, ScalarField, Vector, VectorField};

/// `X_f = f·Z + α♯(df − df(Z)·α)` at `x`.
pub fn ham_field(chart: &Chart, f: &dyn ScalarField, x: &[f64]) -> Result<TangentVector> {
    let frame = chart.frame(x)?;
    frame.hamiltonian(f.value(x)?, &f.gradient(x)?)
}

/// `X_f` as a vector field; its Jacobian is taken by central differences.
pub struct HamiltonianField<'a> {
    pub chart: &'a Chart,
    pub f: &'a dyn ScalarField,
}

impl VectorField for HamiltonianField<'_> {
    fn eval(&self, x: &[f64]) -> Result<Vector> {
        ham_field(self.chart, self.f, x)
    }
}

/// `[f, g]_α = X_f(g) − g·Z(f)`.
pub fn bracket(chart: &Chart, f: &dyn ScalarField, g: &dyn ScalarField, x: &[f64]) -> Result<f64> {
    let frame = chart.frame(x)?;
    let df = f.gradient(x)?;
    let xf = frame.hamiltonian(f.value(x)?, &df)?;
    let dg = g.gradient(x)?;
    Ok(dg.dot(&xf) - g.value(x)? * frame.reeb_derivative(&df))
}

/// The function `[f, g]_α`, evaluated pointwise; its derivatives come from central differences.
pub struct BracketFn<'a> {
    pub chart: &'a Chart,
    pub f: &'a dyn ScalarField,
    pub g: &'a dyn ScalarField,
}

impl ScalarField for BracketFn<'_> {
    fn value(&self, x: &[f64]) -> Result<f64> {
        bracket(self.chart, self.f, self.g, x)
    }
}

/// `‖X_{[f,g]} − [X_f, X_g]‖` at `x`.
pub fn iso_residual(chart: &Chart, f: &dyn ScalarField, g: &dyn ScalarField, x: &[f64]) -> Result<f64> {
    let fg = BracketFn { chart, f, g };
    let lhs = ham_field(chart, &fg, x)?;
    let xf = HamiltonianField { chart, f };
    let xg = HamiltonianField { chart, f: g };
    let rhs = lie_bracket(&xf, &xg, x)?;
    Ok((lhs - rhs).norm())
}

/// Ranks certifying functional independence of a family of functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Independence {
    /// Rank of the stack `(α, df_1, …, df_r)`; `r + 1` iff `α ∧ df_1 ∧ … ∧ df_r ≠ 0`.
    pub rank_wedge: usize,
    /// Rank of `(Z, X_{f_1}, …, X_{f_r})`.
    pub dim_span_with_reeb: usize,
    /// Rank of `(X_{f_1}, …, X_{f_r})`.
    pub dim_span_without: usize,
}

pub fn independence(chart: &Chart, x: &[f64], fs: &[&dyn ScalarField], tol: f64) -> Result<Independence> {
    let frame = chart.frame(x)?;
    let d = chart.dim();
    let mut forms = vec![frame.alpha.clone()];
    let mut fields = Vec::with_capacity(fs.len());
    for f in fs {
        let df = f.gradient(x)?;
        fields.push(frame.hamiltonian(f.value(x)?, &df)?);
        forms.push(df);
    }
    let mut with_reeb = vec![frame.reeb.clone()];
    with_reeb.extend(fields.iter().cloned());
    Ok(Independence {
        rank_wedge: numerical_rank(&rows_matrix(&forms, d), tol),
        dim_span_with_reeb: numerical_rank(&rows_matrix(&with_reeb, d), tol),
        dim_span_without: numerical_rank(&rows_matrix(&fields, d), tol),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryReport {
    /// `max |[h, f·s]|` over the sample points.
    pub max_residual: f64,
    pub worst_point: Vec<f64>,
}

/// Builds the symmetry `f·s` of `h` from a symmetry `s` (`[h, s] = 0`) and an
/// integral `f` (`X_h(f) = 0`), verifying both hypotheses and the result on `samples`.
pub fn make_symmetry(
    chart: &Chart,
    h: &Expression,
    s: &Expression,
    f: &Expression,
    samples: &[Vec<f64>],
    tol: f64,
) -> Result<(Expression, SymmetryReport)> {
    let hb = chart.bind(h)?;
    let sb = chart.bind(s)?;
    let fb = chart.bind(f)?;
    let product = f.mul(s);
    let pb = chart.bind(&product)?;
    let mut report = SymmetryReport {
        max_residual: 0.0,
        worst_point: Vec::new(),
    };
    for x in samples {
        let hs = bracket(chart, &hb, &sb, x)?;
        if hs.abs() > tol {
            return Err(Error::PreconditionFailed {
                what: "[h, s] = 0".into(),
                point: x.clone(),
                residual: hs.abs(),
            });
        }
        let xh = ham_field(chart, &hb, x)?;
        let xhf = fb.gradient(x)?.iter().zip(xh.iter()).map(|(a, b)| a * b).sum::<f64>();
        if xhf.abs() > tol {
            return Err(Error::PreconditionFailed {
                what: "X_h(f) = 0".into(),
                point: x.clone(),
                residual: xhf.abs(),
            });
        }
        let r = bracket(chart, &hb, &pb, x)?.abs();
        if r >= report.max_residual {
            report.max_residual = r;
            report.worst_point = x.clone();
        }
    }
    Ok((product, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::BoundExpr;
    use crate::numkernel::DEFAULT_RANK_TOL;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ex(s: &str) -> Expression {
        Expression::parse(s).unwrap()
    }

    fn canonical(n: usize) -> Chart {
        let mut names = vec!["q0".to_string()];
        names.extend((1..=n).map(|i| format!("q{i}")));
        names.extend((1..=n).map(|i| format!("p{i}")));
        let mut alpha = vec![ex("1")];
        alpha.extend((1..=n).map(|i| ex(&format!("p{i}"))));
        alpha.extend((0..n).map(|_| ex("0")));
        Chart::new("U", &names, &vec![false; 2 * n + 1], &alpha).unwrap()
    }

    fn b(chart: &Chart, s: &str) -> BoundExpr {
        chart.bind(&ex(s)).unwrap()
    }

    fn point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn unit_hamiltonian_is_reeb() {
        let c = canonical(2);
        let x = [0.1, 0.2, -0.3, 0.4, 1.1];
        let z = ham_field(&c, &b(&c, "1"), &x).unwrap();
        assert!((z - c.reeb_at(&x).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn dissipative_equations() {
        let c = canonical(2);
        let f = b(&c, "q0*p1^2 + sin(q1)*p2 - q2*q0 + p1*p2*q1");
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let x = point(&mut rng, 5);
            let v = ham_field(&c, &f, &x).unwrap();
            let g = f.gradient(&x).unwrap();
            let fv = f.eval(&x).unwrap();
            let (p1, p2) = (x[3], x[4]);
            let q0dot = fv - p1 * g[3] - p2 * g[4];
            assert!((v[0] - q0dot).abs() < 1e-12);
            assert!((v[1] - g[3]).abs() < 1e-12);
            assert!((v[2] - g[4]).abs() < 1e-12);
            assert!((v[3] - (-g[1] + p1 * g[0])).abs() < 1e-12);
            assert!((v[4] - (-g[2] + p2 * g[0])).abs() < 1e-12);
        }
        // f = p1 generates ∂/∂q1
        let v = ham_field(&c, &b(&c, "p1"), &[0.3, 0.1, 0.2, 0.9, -0.4]).unwrap();
        assert!((v - Vector::from_vec(vec![0.0, 1.0, 0.0, 0.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn bracket_examples() {
        let c = canonical(1);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = b(&c, "q0*q1 + p1^2");
        for _ in 0..20 {
            let x = point(&mut rng, 3);
            assert!(bracket(&c, &f, &f, &x).unwrap().abs() < 1e-14);
            let one_f = bracket(&c, &b(&c, "1"), &f, &x).unwrap();
            assert!((one_f - x[1]).abs() < 1e-14);
            let pq = bracket(&c, &b(&c, "p1"), &b(&c, "q1"), &x).unwrap();
            assert!((pq - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn explicit_canonical_bracket_formula() {
        let c = canonical(2);
        let f = b(&c, "q0^2*p1 + q1*p2 - p1*p2");
        let g = b(&c, "q2*q0 + p1^3 - q1*q2*p2");
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let x = point(&mut rng, 5);
            let df = f.gradient(&x).unwrap();
            let dg = g.gradient(&x).unwrap();
            let (fv, gv) = (f.eval(&x).unwrap(), g.eval(&x).unwrap());
            let p = [x[3], x[4]];
            let mut expected = 0.0;
            for i in 0..2 {
                expected += df[3 + i] * dg[1 + i] - dg[3 + i] * df[1 + i];
            }
            expected += dg[0] * (fv - p[0] * df[3] - p[1] * df[4]);
            expected -= df[0] * (gv - p[0] * dg[3] - p[1] * dg[4]);
            assert!((bracket(&c, &f, &g, &x).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn iso_residual_examples() {
        let c = canonical(1);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let f = b(&c, "q0*p1 - q1^2");
        let g = b(&c, "p1*q1 + q0^2 - p1^3");
        let one = b(&c, "1");
        for _ in 0..10 {
            let x = point(&mut rng, 3);
            assert!(iso_residual(&c, &f, &f, &x).unwrap() < 1e-8);
            assert!(iso_residual(&c, &one, &g, &x).unwrap() < 1e-6);
            assert!(iso_residual(&c, &f, &g, &x).unwrap() < 1e-6);
        }
    }

    #[test]
    fn non_leibniz_witness_found_by_search() {
        let c = canonical(1);
        let monomials = ["1", "q0", "q1", "p1", "q0*q1", "q0*p1", "q1*p1", "q0^2"];
        let x = [0.5, -0.7, 0.3];
        let mut witness = None;
        'search: for f in monomials {
            for g in monomials {
                for h in monomials {
                    let (fb, gb, hb) = (b(&c, f), b(&c, g), b(&c, h));
                    let gh = c.bind(&ex(g).mul(&ex(h))).unwrap();
                    let lhs = bracket(&c, &fb, &gh, &x).unwrap();
                    let rhs = gb.eval(&x).unwrap() * bracket(&c, &fb, &hb, &x).unwrap()
                        + hb.eval(&x).unwrap() * bracket(&c, &fb, &gb, &x).unwrap();
                    if (lhs - rhs).abs() > 0.1 {
                        witness = Some((f, g, h, (lhs - rhs).abs()));
                        break 'search;
                    }
                }
            }
        }
        let (f, g, h, gap) = witness.expect("no witness");
        assert_eq!((f, g, h), ("q0", "1", "1"));
        assert!((gap - 1.0).abs() < 1e-14);
    }

    #[test]
    fn independence_examples() {
        let c = canonical(3);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (p1, p2) = (b(&c, "p1"), b(&c, "p2"));
        for _ in 0..20 {
            let x = point(&mut rng, 7);
            let r = independence(&c, &x, &[&p1, &p2], DEFAULT_RANK_TOL).unwrap();
            assert_eq!(r.dim_span_with_reeb, 3);
            assert_eq!(r.dim_span_without, 2);
            assert_eq!(r.rank_wedge, 3);
            let k = b(&c, "3");
            let r = independence(&c, &x, &[&p1, &k], DEFAULT_RANK_TOL).unwrap();
            assert_eq!(r.rank_wedge, 2);
        }
        let q0 = b(&c, "q0");
        let x = [0.4, 0.2, -0.5, 0.9, 0.0, 0.0, 0.0];
        let r = independence(&c, &x, &[&q0], DEFAULT_RANK_TOL).unwrap();
        assert_eq!(r.rank_wedge, 1);
    }

    #[test]
    fn symmetry_products() {
        let c = canonical(2);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let samples: Vec<Vec<f64>> = (0..20)
            .map(|_| {
                let mut x = point(&mut rng, 5);
                x[3] = rng.gen_range(0.5..1.5);
                x
            })
            .collect();
        let (e, r) = make_symmetry(&c, &ex("p1"), &ex("p2"), &ex("1"), &samples, 1e-8).unwrap();
        assert_eq!(e.eval(&[("p2".to_string(), 3.0)].into_iter().collect()).unwrap(), 3.0);
        assert!(r.max_residual < 1e-12);

        let (_, r) = make_symmetry(&c, &ex("p1"), &ex("p1"), &ex("p2/p1"), &samples, 1e-8).unwrap();
        assert!(r.max_residual < 1e-8);

        let err = make_symmetry(&c, &ex("p1"), &ex("p2"), &ex("q1"), &samples, 1e-8).unwrap_err();
        assert!(matches!(err, Error::PreconditionFailed { ref what, .. } if what == "X_h(f) = 0"));
        let err = make_symmetry(&c, &ex("p1"), &ex("q1"), &ex("1"), &samples, 1e-8).unwrap_err();
        assert!(matches!(err, Error::PreconditionFailed { ref what, .. } if what == "[h, s] = 0"));
    }
}
