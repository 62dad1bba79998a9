use std::f64::consts::{PI, SQRT_2};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::bundle::{classify, momentum, momentum_rank, section_field, StrataTolerances, Stratum};
use crate::jacobi::ham_field;

#[test]
fn canonical_reeb_and_validation() {
    let m = canonical(2).unwrap();
    let c = m.atlas().chart(0);
    let z = c.reeb_at(&[0.3, -1.0, 2.0, 0.5, 0.7]).unwrap();
    for (i, v) in z.iter().enumerate() {
        assert!((v - if i == 0 { 1.0 } else { 0.0 }).abs() < 1e-14);
    }
    let r = m.validate(50, 1e-10).unwrap();
    assert!(r.ok, "{:?}", r.first_failure());
    assert_eq!(m.p(), 0);
}

#[test]
fn primer_validates_and_shares_atlas() {
    let atlas = Arc::new(primer_atlas(2).unwrap());
    let a = primer_on(atlas.clone(), 2, &[1.0, SQRT_2], "2 + sin(phi)", 2).unwrap();
    let b = primer2_on(atlas.clone(), 2, &[1.0, SQRT_2], "sin(phi2)").unwrap();
    assert!(Arc::ptr_eq(a.atlas_arc(), b.atlas_arc()));
    for m in [a, b] {
        let r = m.validate(40, 1e-10).unwrap();
        assert!(r.ok, "{}: {:?}", m.name, r.first_failure());
        assert_eq!(r.atlas.triples.len(), 1);
    }
}

#[test]
fn primer_section_fields_are_translations() {
    let m = primer(2, &[1.0, SQRT_2], "2 + sin(phi2)", 0).unwrap();
    for i in 0..3 {
        let x = Point::new(i, vec![0.1, 0.2, 0.3, 0.7, -1.2]);
        for j in 0..3 {
            let v = section_field(m.atlas(), &m.sections()[j], &x).unwrap();
            for c in 0..5 {
                let want = if c == j { 1.0 } else { 0.0 };
                assert!((v[c] - want).abs() < 1e-12, "chart {i} section {j}: {v}");
            }
        }
        let xh = section_field(m.atlas(), m.hamiltonian(), &x).unwrap();
        assert!((xh[0] - 1.0).abs() < 1e-12 && (xh[1] - SQRT_2).abs() < 1e-12);
        assert!(xh.iter().skip(2).all(|v| v.abs() < 1e-12));
    }
}

#[test]
fn primer_momentum_on_last_chart() {
    let m = primer(2, &[1.0, SQRT_2], "2 + sin(phi2)", 1).unwrap();
    let (j0, j1, phi2) = (0.4, -0.8, 1.1);
    let x = Point::new(2, vec![0.5, 0.6, phi2, j0, j1]);
    let mv = momentum(m.atlas(), m.sections(), &x, 1e-12).unwrap();
    let raw = [j0, j1, 1.0, (2.0 + f64::sin(phi2)) * j1];
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    for (a, b) in mv.coords.iter().zip(raw) {
        assert!((a - b / norm).abs() < 1e-14);
    }
    assert_eq!(momentum_rank(m.atlas(), m.sections(), &x, 1e-12, 1e-9).unwrap(), 3);
}

#[test]
fn primer_sigma_and_regular() {
    let m = primer(2, &[1.0, SQRT_2], "2 + sin(phi2)", 2).unwrap();
    let tols = StrataTolerances::default();
    let sigma = classify(
        m.atlas(),
        m.sections(),
        m.r(),
        &Point::new(2, vec![0.5, 0.6, 1.1, 0.0, 0.0]),
        tols,
    )
    .unwrap();
    assert_eq!((sigma.stratum, sigma.dim_e, sigma.dim_f), (Stratum::Sigma, 3, 2));
    let reg = classify(
        m.atlas(),
        m.sections(),
        m.r(),
        &Point::new(2, vec![0.5, 0.6, 1.1, 0.3, 0.0]),
        tols,
    )
    .unwrap();
    assert_eq!((reg.stratum, reg.dim_e, reg.dim_f), (Stratum::RegularTransverse, 4, 2));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for p in m.stratum_seeds(10, &mut rng).unwrap() {
        let c = classify(m.atlas(), m.sections(), m.r(), &p, tols).unwrap();
        assert_eq!(c.stratum, Stratum::Sigma);
    }
}

#[test]
fn primer_rejects_nonpositive_f() {
    let e = primer(2, &[1.0, 1.0], "sin(phi2)", 0).unwrap_err();
    assert!(matches!(e, Error::PositivityViolation { .. }));
    assert!(primer(2, &[1.0, 1.0], "2 + phi0", 0).is_err());
    assert!(primer(2, &[1.0], "2", 0).is_err());
}

#[test]
fn primer2_zero_locus() {
    let m = primer2(2, &[1.0, SQRT_2], "sin(phi2)").unwrap();
    let tols = StrataTolerances::default();
    let x = Point::new(2, vec![0.5, 0.6, PI, 0.0, 0.0]);
    let c = classify(m.atlas(), m.sections(), m.r(), &x, tols).unwrap();
    assert_eq!((c.stratum, c.dim_f), (Stratum::ZeroLocus, 2));
    assert_eq!(
        momentum(m.atlas(), m.sections(), &x, 1e-8).unwrap_err(),
        Error::ZeroLocus
    );
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let seeds = m.stratum_seeds(20, &mut rng).unwrap();
    assert_eq!(seeds.len(), 20);
    for p in seeds {
        let phi = p.coords[2];
        assert!(phi.sin().abs() < 1e-11 && (phi.abs() < 1e-9 || (phi - PI).abs() < 1e-9));
        let c = classify(m.atlas(), m.sections(), m.r(), &p, tols).unwrap();
        assert_eq!(c.stratum, Stratum::ZeroLocus);
    }
    let positive = primer2(2, &[1.0, SQRT_2], "2 + cos(phi)").unwrap();
    assert!(positive.stratum_seeds(5, &mut rng).unwrap().is_empty());
}

#[test]
fn primer2_rank_drop() {
    // f = sin(phi2)^2 has f = f' = 0 at phi2 = 0; with p1 = 0 the ratios lose rank
    let m = primer2(2, &[1.0, SQRT_2], "sin(phi2)^2").unwrap();
    let x = Point::new(2, vec![0.5, 0.6, 0.0, 0.7, 0.0]);
    let rk = momentum_rank(m.atlas(), m.sections(), &x, 1e-12, 1e-9).unwrap();
    assert!(rk < m.p(), "rank {rk}");
    let generic = Point::new(2, vec![0.5, 0.6, 1.0, 0.7, 0.3]);
    assert_eq!(
        momentum_rank(m.atlas(), m.sections(), &generic, 1e-12, 1e-9).unwrap(),
        m.p()
    );
}

#[test]
fn primer2_reduced_equations() {
    let omegas = [1.0, SQRT_2];
    let m = primer2_reduced(2, &omegas, "2 + sin(phi2)").unwrap();
    let c = m.atlas().chart(0);
    let (phi2, p0, p1) = (0.9, 0.4, -1.3);
    let x = [0.2, 0.3, phi2, p0, p1];
    let v = ham_field(c, m.hamiltonian().local(0), &x).unwrap();
    let (f, df) = (2.0 + phi2.sin(), phi2.cos());
    let want = [omegas[0], omegas[1], f, df * p0, df * p1];
    for (a, b) in v.iter().zip(want) {
        assert!((a - b).abs() < 1e-12, "{v}");
    }
}

#[test]
fn reduced_chart_matches_last_primer_chart() {
    let full = primer2(2, &[1.0, SQRT_2], "2 + sin(phi2)").unwrap();
    let red = primer2_reduced(2, &[1.0, SQRT_2], "2 + sin(phi2)").unwrap();
    let x = [0.2, 0.3, 0.9, 0.4, -1.3];
    let a = section_field(full.atlas(), full.hamiltonian(), &Point::new(2, x.to_vec())).unwrap();
    let b = section_field(red.atlas(), red.hamiltonian(), &Point::new(0, x.to_vec())).unwrap();
    assert!((a - b).norm() < 1e-12);
}

#[test]
fn config_roundtrip_canonical() {
    let m = canonical(1).unwrap();
    let text = toml::to_string(&m.to_config()).unwrap();
    let back = from_config(&text).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let f = Expression::parse("q0*p1 + sin(q1)").unwrap();
    let fa = m.atlas().chart(0).bind(&f).unwrap();
    let fb = back.atlas().chart(0).bind(&f).unwrap();
    for _ in 0..100 {
        let x = crate::sampling::uniform_in(m.atlas().chart(0), &mut rng);
        let va = ham_field(m.atlas().chart(0), &fa, &x).unwrap();
        let vb = ham_field(back.atlas().chart(0), &fb, &x).unwrap();
        assert_eq!(va, vb);
    }
}

#[test]
fn config_primer_loads() {
    let m = primer(2, &[1.0, SQRT_2], "2", 0).unwrap();
    let text = toml::to_string(&m.to_config()).unwrap();
    let back = from_config(&text).unwrap();
    assert_eq!(back.atlas().charts().len(), 3);
    assert_eq!(back.r(), 1);
    assert_eq!(back.sections().len(), 4);
}

#[test]
fn config_negative_controls() {
    let m = primer(2, &[1.0, SQRT_2], "2", 0).unwrap();
    let mut cfg = m.to_config();
    let ov = cfg
        .overlaps
        .iter_mut()
        .find(|o| o.from == "V1" && o.to == "V2")
        .unwrap();
    ov.transition = format!("1.5*({})", ov.transition);
    let err = cfg.build().unwrap().checked(50, 1e-8).unwrap_err();
    match err {
        Error::Validation { check, location, .. } => {
            assert!(check == "form compatibility" || check == "cocycle", "{check}");
            assert!(location.contains("V1") && location.contains("V2"), "{location}");
        }
        e => panic!("unexpected {e:?}"),
    }

    let text = r#"
name = "bad"
r = 0
hamiltonian = "h"
[[charts]]
id = "U"
coords = ["q0", "q1", "p1"]
alpha = ["1", "p1", "0"
"#;
    assert!(matches!(from_config(text), Err(Error::Schema { .. })));

    let noncommuting = r#"
name = "noncommuting"
r = 1
hamiltonian = "a"
[[charts]]
id = "U"
coords = ["q0", "q1", "p1"]
alpha = ["1", "p1", "0"]
[[sections]]
name = "a"
expr = "p1"
[[sections]]
name = "b"
expr = "q1"
"#;
    match from_config(noncommuting).unwrap_err() {
        Error::Validation { check, .. } => assert!(check.starts_with("commutation"), "{check}"),
        e => panic!("unexpected {e:?}"),
    }

    let degenerate = r#"
name = "degenerate"
r = 0
hamiltonian = "one"
[[charts]]
id = "U"
coords = ["q0", "q1", "p1"]
alpha = ["1", "0", "0"]
[[sections]]
name = "one"
expr = "1"
"#;
    match from_config(degenerate).unwrap_err() {
        Error::Validation { check, .. } => assert_eq!(check, "contact condition"),
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn zeros_found_by_bisection() {
    let f = Expression::parse("sin(x)").unwrap().bind(&["x"]).unwrap();
    let z = zeros_on_circle(&f, 1000, 1e-12).unwrap();
    assert_eq!(z.len(), 2);
    assert!(z[0].abs() < 1e-12 && (z[1] - PI).abs() < 1e-11);
}
