use std::f64::consts::SQRT_2;

use contactkit::bundle::{classify_many, Point, StrataTolerances};
use contactkit::dynamics::{flow, FlowOptions};
use contactkit::models::{primer, primer2_reduced};
use contactkit::par::{map, Execution};
use contactkit::sampling::uniform_in;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn classification(c: &mut Criterion) {
    let m = primer(2, &[1.0, SQRT_2], "2 + sin(phi2)", 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let points: Vec<Point> = (0..2000)
        .map(|_| {
            let i = rng.gen_range(0..3);
            Point::new(i, uniform_in(m.atlas().chart(i), &mut rng))
        })
        .collect();
    let mut g = c.benchmark_group("classify_2000");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                classify_many(
                    m.atlas(),
                    m.sections(),
                    m.r(),
                    &points,
                    StrataTolerances::default(),
                    exec,
                )
            })
        });
    }
    g.finish();
}

fn trajectories(c: &mut Criterion) {
    let m = primer2_reduced(2, &[1.0, SQRT_2], "2 + sin(phi2)").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let starts: Vec<Point> = (0..32)
        .map(|_| {
            let mut x: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..6.0)).collect();
            x.extend((0..2).map(|_| rng.gen_range(-1.0..1.0)));
            Point::new(0, x)
        })
        .collect();
    let opts = FlowOptions::default();
    let mut g = c.benchmark_group("flow_32x10");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                map(&starts, exec, |x0| {
                    flow(m.atlas(), m.hamiltonian(), x0, 10.0, &opts).unwrap().len()
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, classification, trajectories);
criterion_main!(benches);
