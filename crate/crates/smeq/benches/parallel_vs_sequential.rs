use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use smeq::condexp::{basic_construction, trace_expectation, verify_expectation};
use smeq::exec::set_parallel;
use smeq::fdalg::{commutant, MatrixAlgebra};
use smeq::numlin::DEFAULT_TOL;
use smeq::pipeline::run_scenario;
use smeq::scenario::Scenario;

const MODES: [(&str, bool); 2] = [("parallel", true), ("sequential", false)];

fn kernels(c: &mut Criterion) {
    let m3 = MatrixAlgebra::full(3);
    let e = trace_expectation(&m3, &MatrixAlgebra::scalars(3), DEFAULT_TOL).unwrap().with_quasi_basis(0).unwrap();
    let bc = basic_construction(&e, 1).unwrap();
    let mut g = c.benchmark_group("kernels");
    g.sample_size(10).measurement_time(Duration::from_secs(5));
    for (mode, on) in MODES {
        set_parallel(on);
        g.bench_function(BenchmarkId::new("basic_construction_m3", mode), |b| b.iter(|| basic_construction(&e, 1).unwrap()));
        g.bench_function(BenchmarkId::new("verify_expectation_m3", mode), |b| b.iter(|| verify_expectation(&e, 20, 0)));
        g.bench_function(BenchmarkId::new("relative_commutant_c1", mode), |b| {
            b.iter(|| commutant(&bc.c1, &MatrixAlgebra::full(bc.c1.d), DEFAULT_TOL).unwrap())
        });
    }
    g.finish();
}

fn pipeline(c: &mut Criterion) {
    let s2 = Scenario::load("s2_pinching_d2").unwrap();
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10).measurement_time(Duration::from_secs(10));
    for (mode, on) in MODES {
        set_parallel(on);
        g.bench_function(BenchmarkId::new("s2_full", mode), |b| b.iter(|| run_scenario(&s2, None)));
    }
    g.finish();
    set_parallel(true);
}

criterion_group!(benches, kernels, pipeline);
criterion_main!(benches);
