//! Flows of contact Hamiltonian fields across charts, invariant monitors,
//! torus frequencies and action integrals.

mod analysis;
mod dopri;
mod flow;
mod quadrature;

pub use analysis::{
    drift, frequencies, momentum_drift, section_ratio, Drift, Frequencies, Quantity, MIN_FREQUENCY_SAMPLES,
};
pub use flow::{flow, ChartSwitch, FlowOptions, Output, StepStats, Trajectory};
pub use quadrature::{
    gauss_legendre, loop_integral, CoordinateCircle, Cycle, ExprCycle, LoopIntegral, QuadratureOptions,
};

#[cfg(test)]
mod tests {
    use std::f64::consts::SQRT_2;

    use super::*;
    use crate::bundle::{Point, Section};
    use crate::expr::Expression;
    use crate::geometry::angle_diff;
    use crate::models::{canonical, primer, primer2_reduced, primer_atlas};

    #[test]
    fn primer_translations() {
        let m = primer(2, &[1.0, SQRT_2], "2 + sin(phi2)", 0).unwrap();
        let x0 = Point::new(0, vec![0.1, 0.2, 0.3, 0.5, -0.7]);
        let opts = FlowOptions {
            output: Output::Uniform(50),
            ..FlowOptions::default()
        };
        let tr = flow(m.atlas(), m.hamiltonian(), &x0, 10.0, &opts).unwrap();
        assert_eq!(tr.len(), 51);
        let end = tr.last().unwrap();
        assert_eq!(end.chart, 0);
        let want = [0.1 + 10.0, 0.2 + 10.0 * SQRT_2, 0.3];
        for (i, w) in want.iter().enumerate() {
            assert!(angle_diff(end.coords[i], *w).abs() < 1e-9);
        }
        assert!((end.coords[3] - 0.5).abs() < 1e-12 && (end.coords[4] + 0.7).abs() < 1e-12);
        let f = frequencies(m.atlas(), &tr, &[0, 1, 2]).unwrap();
        assert!((f.omegas[0] - 1.0).abs() < 1e-9 && (f.omegas[1] - SQRT_2).abs() < 1e-9);
        assert!(f.omegas[2].abs() < 1e-12 && f.max_residual() < 1e-8);
    }

    #[test]
    fn zero_hamiltonian_is_stationary() {
        let m = canonical(1).unwrap();
        let zero = Section::uniform(m.atlas(), "0", &Expression::constant(0.0)).unwrap();
        let x0 = Point::new(0, vec![0.3, -0.2, 1.5]);
        let tr = flow(m.atlas(), &zero, &x0, 5.0, &FlowOptions::default()).unwrap();
        assert!(tr.points.iter().all(|p| p.coords == x0.coords));
        let q = |p: &Point| Ok(p.coords[0]);
        assert_eq!(drift(&tr, &[&q]).unwrap()[0].max, 0.0);
    }

    #[test]
    fn reduced_primer2_closed_form() {
        // f = 2 constant: φ_n = φ_n(0) + 2t, p constant, φ_i linear
        let m = primer2_reduced(1, &[0.5], "2").unwrap();
        let x0 = Point::new(0, vec![0.1, 0.2, 0.7]);
        let tr = flow(m.atlas(), m.hamiltonian(), &x0, 3.0, &FlowOptions::default()).unwrap();
        let end = tr.last().unwrap();
        assert!(angle_diff(end.coords[0], 0.1 + 1.5).abs() < 1e-9);
        assert!(angle_diff(end.coords[1], 0.2 + 6.0).abs() < 1e-9);
        assert!((end.coords[2] - 0.7).abs() < 1e-12);
        // p_i' = f'(φ_n)·p_i and φ_n' = f, so p0/p1 and p_i/f are conserved
        let m = primer2_reduced(2, &[1.0, SQRT_2], "2 + sin(phi2)").unwrap();
        let x0 = Point::new(0, vec![0.1, 0.2, 0.3, 0.5, -0.7]);
        let tr = flow(m.atlas(), m.hamiltonian(), &x0, 20.0, &FlowOptions::default()).unwrap();
        let ratio = |p: &Point| Ok(p.coords[3] / p.coords[4]);
        let energy = |p: &Point| Ok(p.coords[3] / (2.0 + p.coords[2].sin()));
        let d = drift(&tr, &[&ratio, &energy]).unwrap();
        assert!(d[0].max < 1e-8 && d[1].max < 1e-8, "{d:?}");
    }

    #[test]
    fn time_reversal() {
        let m = primer2_reduced(2, &[1.0, SQRT_2], "2 + sin(phi2)").unwrap();
        let x0 = Point::new(0, vec![0.1, 0.2, 0.3, 0.5, -0.7]);
        let fw = flow(m.atlas(), m.hamiltonian(), &x0, 10.0, &FlowOptions::default()).unwrap();
        let back = flow(
            m.atlas(),
            m.hamiltonian(),
            fw.last().unwrap(),
            -10.0,
            &FlowOptions::default(),
        )
        .unwrap();
        assert!(back.times.windows(2).all(|w| w[1] < w[0]));
        let end = back.last().unwrap();
        for i in 0..5 {
            let d = if i < 3 {
                angle_diff(end.coords[i], x0.coords[i])
            } else {
                end.coords[i] - x0.coords[i]
            };
            assert!(d.abs() < 1e-6, "{i}: {d}");
        }
    }

    #[test]
    fn flow_crosses_charts() {
        // s = y1·cos(phi0) on RP^1: J0 = y0/y1 moves linearly in V1 and crosses 0,
        // so J1 = 1/J0 blows up in V0 and the flow has to switch
        let atlas = primer_atlas(1).unwrap();
        let s1 = Section::new(
            &atlas,
            "s1",
            &[
                ("V0", Expression::parse("J1").unwrap()),
                ("V1", Expression::parse("1").unwrap()),
            ],
        )
        .unwrap();
        let h = s1
            .scaled_by(&atlas, &Expression::parse("cos(phi0)").unwrap(), "h")
            .unwrap();
        let rate = crate::bundle::section_field(&atlas, &h, &Point::new(1, vec![1.0, 0.0, 0.5])).unwrap()[2];
        assert!(rate.abs() > 0.5);
        // start at J0 = ∓0.5 so that J0 passes through 0
        let x0 = Point::new(0, vec![1.0, 0.0, -2.0 * rate.signum()]);
        let tr = flow(&atlas, &h, &x0, 3.0, &FlowOptions::default()).unwrap();
        assert!(!tr.chart_switches.is_empty());
        assert_eq!(tr.last().unwrap().chart, 1);
        // in V1 the affine coordinate is linear in time; check against the start
        let start_v1 = atlas.map_point(0, 1, &x0.coords).unwrap().unwrap();
        let end = tr.last().unwrap();
        assert!((end.coords[2] - (start_v1[2] + 3.0 * rate)).abs() < 1e-8);
        let mid = tr.points.iter().zip(&tr.times).find(|(p, _)| p.chart == 1).unwrap();
        let predicted = start_v1[2] + rate * mid.1;
        assert!((mid.0.coords[2] - predicted).abs() < 1e-8);
    }
}
