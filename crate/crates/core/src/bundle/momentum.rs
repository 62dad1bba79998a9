use serde::Serialize;

use crate::error::{Error, Result};
use crate::numkernel::{numerical_rank, rows_matrix, Vector, DEFAULT_RANK_TOL};
use crate::par::{self, Execution};

use super::{section_field, Atlas, Point, Section};

/// A point of `RP^p` in homogeneous coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentumValue {
    /// Unit Euclidean norm; the first component above tolerance is positive.
    pub coords: Vec<f64>,
    /// Index of the largest `|s_i|`, i.e. the affine chart `s_i ≠ 0` used for ranks.
    pub affine_index: usize,
}

impl MomentumValue {
    /// Largest componentwise difference, the natural drift measure.
    pub fn distance(&self, other: &MomentumValue) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrataTolerances {
    /// Absolute threshold below which a section value counts as zero.
    pub strata: f64,
    /// Relative singular-value threshold for numerical ranks.
    pub rank: f64,
}

impl Default for StrataTolerances {
    fn default() -> Self {
        Self {
            strata: 1e-8,
            rank: DEFAULT_RANK_TOL,
        }
    }
}

fn values(atlas: &Atlas, ys: &[Section], x: &Point) -> Result<(Point, Vec<f64>)> {
    let p = atlas.locate(x)?;
    let v = ys.iter().map(|s| s.value(&p)).collect::<Result<Vec<_>>>()?;
    Ok((p, v))
}

fn argmax_abs(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    best
}

/// `π(x) = [s₀(x) : … : s_p(x)]`.
pub fn momentum(atlas: &Atlas, ys: &[Section], x: &Point, tol: f64) -> Result<MomentumValue> {
    let (_, v) = values(atlas, ys, x)?;
    if v.iter().all(|s| s.abs() <= tol) {
        return Err(Error::ZeroLocus);
    }
    let norm = v.iter().map(|s| s * s).sum::<f64>().sqrt();
    let mut coords: Vec<f64> = v.iter().map(|s| s / norm).collect();
    let lead = coords.iter().position(|c| c.abs() > tol).unwrap_or(0);
    if coords[lead] < 0.0 {
        coords.iter_mut().for_each(|c| *c = -*c);
    }
    Ok(MomentumValue {
        coords,
        affine_index: argmax_abs(&v),
    })
}

/// Rank of the differential of the affine chart `(s_j/s_i)_{j≠i}` of `π`, `i` the largest component.
pub fn momentum_rank(atlas: &Atlas, ys: &[Section], x: &Point, tol: f64, rank_tol: f64) -> Result<usize> {
    let (p, v) = values(atlas, ys, x)?;
    if v.iter().all(|s| s.abs() <= tol) {
        return Err(Error::ZeroLocus);
    }
    let i = argmax_abs(&v);
    let gi = ys[i].local(p.chart).gradient(&p.coords)?;
    let mut rows: Vec<Vector> = Vec::with_capacity(ys.len() - 1);
    for (j, s) in ys.iter().enumerate() {
        if j == i {
            continue;
        }
        let gj = s.local(p.chart).gradient(&p.coords)?;
        let row: Vec<f64> = gj
            .iter()
            .zip(&gi)
            .map(|(a, b)| (v[i] * a - v[j] * b) / (v[i] * v[i]))
            .collect();
        rows.push(Vector::from_vec(row));
    }
    Ok(numerical_rank(&rows_matrix(&rows, p.coords.len()), rank_tol))
}

/// Rows of the stratification table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Stratum {
    /// `M_reg ∖ Σ`: `dim E = p + 1`, `F` transverse to `H`.
    RegularTransverse,
    /// `Σ`: `dim E = p`, `F ⊂ H`.
    Sigma,
    /// `M₀`: all sections vanish.
    ZeroLocus,
    /// Rank conditions inconsistent with every row at the given tolerances.
    Unclassified,
}

impl Stratum {
    pub const ALL: [Stratum; 4] = [
        Stratum::RegularTransverse,
        Stratum::Sigma,
        Stratum::ZeroLocus,
        Stratum::Unclassified,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stratum::RegularTransverse => "RegularTransverse",
            Stratum::Sigma => "Sigma",
            Stratum::ZeroLocus => "ZeroLocus",
            Stratum::Unclassified => "Unclassified",
        }
    }
}

impl std::fmt::Display for Stratum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub stratum: Stratum,
    pub dim_e: usize,
    pub dim_f: usize,
    /// `F_x ⊄ H_x`, i.e. some commuting section is nonzero.
    pub f_transverse_to_h: bool,
    /// Rank of `dπ`; `None` on the zero locus.
    pub momentum_rank: Option<usize>,
}

/// Places `x` in the stratification induced by `ys`, whose first `r + 1`
/// sections form the commuting family.
pub fn classify(atlas: &Atlas, ys: &[Section], r: usize, x: &Point, tols: StrataTolerances) -> Result<Classification> {
    assert!(r < ys.len(), "commuting family larger than the section list");
    let (p, v) = values(atlas, ys, x)?;
    let fields = ys
        .iter()
        .map(|s| section_field(atlas, s, &p))
        .collect::<Result<Vec<_>>>()?;
    let d = p.coords.len();
    let dim_e = numerical_rank(&rows_matrix(&fields, d), tols.rank);
    let dim_f = numerical_rank(&rows_matrix(&fields[..=r], d), tols.rank);
    let f_transverse_to_h = v[..=r].iter().any(|s| s.abs() > tols.strata);
    let pdim = ys.len() - 1;
    let mut out = Classification {
        stratum: Stratum::Unclassified,
        dim_e,
        dim_f,
        f_transverse_to_h,
        momentum_rank: None,
    };
    if v.iter().all(|s| s.abs() <= tols.strata) {
        out.stratum = Stratum::ZeroLocus;
        return Ok(out);
    }
    let mr = momentum_rank(atlas, ys, &p, tols.strata, tols.rank)?;
    out.momentum_rank = Some(mr);
    if mr < pdim {
        return Ok(out);
    }
    out.stratum = if !f_transverse_to_h {
        if (dim_e, dim_f) == (pdim, r + 1) {
            Stratum::Sigma
        } else {
            Stratum::Unclassified
        }
    } else if (dim_e, dim_f) == (pdim + 1, r + 1) {
        Stratum::RegularTransverse
    } else {
        Stratum::Unclassified
    };
    Ok(out)
}

/// [`classify`] over a batch of points, order preserved.
pub fn classify_many(
    atlas: &Atlas,
    ys: &[Section],
    r: usize,
    points: &[Point],
    tols: StrataTolerances,
    exec: Execution,
) -> Vec<Result<Classification>> {
    par::map(points, exec, |x| classify(atlas, ys, r, x, tols))
}

#[cfg(test)]
mod tests {
    use super::super::tests::two_chart_atlas;
    use super::*;
    use crate::expr::Expression;

    fn ex(s: &str) -> Expression {
        Expression::parse(s).unwrap()
    }

    /// `RP¹` bundle over T²: sections s0, s1 and `f·s1` with `f = 2 + sin(phi1)`.
    fn family() -> (Atlas, Vec<Section>) {
        let a = two_chart_atlas();
        let s0 = Section::new(&a, "s0", &[("V0", ex("1")), ("V1", ex("J0"))]).unwrap();
        let s1 = Section::new(&a, "s1", &[("V0", ex("J1")), ("V1", ex("1"))]).unwrap();
        let fs = s1.scaled_by(&a, &ex("2 + sin(phi1)"), "fs1").unwrap();
        (a, vec![s0, s1, fs])
    }

    #[test]
    fn momentum_is_chart_invariant() {
        let (a, ys) = family();
        let x = [0.4, 1.3, -0.6];
        let y = a.map_point(0, 1, &x).unwrap().unwrap();
        let m0 = momentum(&a, &ys, &Point::new(0, x.to_vec()), 1e-12).unwrap();
        let m1 = momentum(&a, &ys, &Point::new(1, y), 1e-12).unwrap();
        assert!(m0.distance(&m1) < 1e-10);
        let n: f64 = m0.coords.iter().map(|c| c * c).sum();
        assert!((n - 1.0).abs() < 1e-14);
        assert!(m0.coords[0] > 0.0);
        assert_eq!(m0.affine_index, 2);
    }

    #[test]
    fn zero_locus_error() {
        let a = two_chart_atlas();
        let s = Section::new(&a, "s1", &[("V0", ex("J1")), ("V1", ex("1"))]).unwrap();
        let x = Point::new(0, vec![0.0, 0.0, 0.0]);
        assert_eq!(
            momentum(&a, std::slice::from_ref(&s), &x, 1e-12).unwrap_err(),
            Error::ZeroLocus
        );
        assert_eq!(momentum_rank(&a, &[s], &x, 1e-12, 1e-9).unwrap_err(), Error::ZeroLocus);
    }

    #[test]
    fn ranks() {
        let (a, ys) = family();
        let x = Point::new(0, vec![0.4, 1.3, -0.6]);
        assert_eq!(momentum_rank(&a, &ys, &x, 1e-12, 1e-9).unwrap(), 2);
        let consts = vec![
            Section::uniform(&a, "c", &ex("1")).unwrap(),
            Section::uniform(&a, "d", &ex("2")).unwrap(),
        ];
        assert_eq!(momentum_rank(&a, &consts, &x, 1e-12, 1e-9).unwrap(), 0);
    }

    #[test]
    fn strata_on_small_family() {
        let (a, ys) = family();
        let tols = StrataTolerances::default();
        // commuting family {s0}; Σ = {s0 = 0} lives in V1 at J0 = 0
        let c = classify(&a, &ys, 0, &Point::new(1, vec![0.4, 1.3, 0.0]), tols).unwrap();
        assert_eq!((c.stratum, c.dim_e, c.dim_f), (Stratum::Sigma, 2, 1));
        let c = classify(&a, &ys, 0, &Point::new(1, vec![0.4, 1.3, 0.7]), tols).unwrap();
        assert_eq!((c.stratum, c.dim_e, c.dim_f), (Stratum::RegularTransverse, 3, 1));
        let pts: Vec<Point> = (0..8).map(|i| Point::new(0, vec![0.1 * i as f64, 1.0, 0.5])).collect();
        let seq = classify_many(&a, &ys, 0, &pts, tols, Execution::Sequential);
        let parl = classify_many(&a, &ys, 0, &pts, tols, Execution::Parallel);
        assert_eq!(seq, parl);
    }
}
