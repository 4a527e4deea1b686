//! Ensemble simulation throughput: rayon path versus sequential fallback.
//!
//! Run with `cargo bench -p stochbisim`. Both paths produce bit-identical
//! ensembles; the comparison shows what the data-parallel trajectory loop
//! buys on the current machine.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use nalgebra::{DMatrix, DVector};
use std::hint::black_box;
use stochbisim::montecarlo::{simulate_sequential, SimulationConfig};
use stochbisim::sysmodel::{InputSequence, StochasticLinearSystem};

fn bench_system() -> StochasticLinearSystem {
    StochasticLinearSystem::new(
        DMatrix::from_row_slice(4, 4, &[
            0.9, 0.1, 0.0, 0.0, //
            0.0, 0.8, 0.2, 0.0, //
            0.0, 0.0, 0.7, 0.1, //
            0.1, 0.0, 0.0, 0.6,
        ]),
        DMatrix::from_row_slice(4, 1, &[1.0, 0.0, 0.0, 0.5]),
        DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]),
        DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.5, 0.0, 0.0, 0.0]),
        DVector::from_column_slice(&[0.1, -0.1]),
        DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.0, 0.2]),
    )
    .unwrap()
}

fn bench_simulate(c: &mut Criterion) {
    let sys = bench_system();
    let x0 = DVector::from_column_slice(&[1.0, 0.0, -1.0, 0.5]);
    let horizon = 50;
    let u = InputSequence::zero(1, horizon);

    let mut group = c.benchmark_group("simulate");
    for &n in &[1_000usize, 10_000] {
        let cfg = SimulationConfig::new(7, n, horizon).unwrap();
        group.throughput(Throughput::Elements((n * horizon) as u64));
        group.bench_with_input(BenchmarkId::new("sequential", n), &cfg, |b, &cfg| {
            b.iter(|| simulate_sequential(black_box(&sys), black_box(&x0), &u, cfg).unwrap())
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", n), &cfg, |b, &cfg| {
            b.iter(|| {
                stochbisim::montecarlo::simulate_parallel(
                    black_box(&sys),
                    black_box(&x0),
                    &u,
                    cfg,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_simulate);
criterion_main!(benches);
