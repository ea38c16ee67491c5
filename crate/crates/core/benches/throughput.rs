//! Sequential against parallel execution on the data-parallel kernels.

use std::collections::BTreeMap;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use saddle_imf::eigen::dense_hessian;
use saddle_imf::harness::{doa_scan, presets, run_experiment, GridSpec};
use saddle_imf::potentials::MorseIsland;
use saddle_imf::{make_builtin, Builtin, Execution, Vector};

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn morse(c: &mut Criterion) {
    let model = make_builtin(Builtin::MorseIsland, &BTreeMap::new()).unwrap();
    let island = model.downcast::<MorseIsland>().unwrap();
    let x: Vector = island.initial_free_coordinates();
    let mut g = c.benchmark_group("morse");
    g.sample_size(10);
    for exec in MODES {
        let p = island.clone().with_execution(exec).into_model();
        g.bench_with_input(BenchmarkId::new("gradient", format!("{exec:?}")), &exec, |b, _| {
            b.iter(|| p.gradient(&x).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("dense_hessian", format!("{exec:?}")), &exec, |b, &e| {
            b.iter(|| dense_hessian(&p, &x, e).unwrap())
        });
    }
    g.finish();
}

fn doa(c: &mut Criterion) {
    let cfg = presets::fig2();
    let p = cfg.problem.build().unwrap();
    let grid = GridSpec { n: 16, ..cfg.grid };
    let mut g = c.benchmark_group("doa_16x16");
    g.sample_size(10);
    for exec in MODES {
        for m in &cfg.methods {
            g.bench_with_input(BenchmarkId::new(m.label(), format!("{exec:?}")), &exec, |b, &e| {
                b.iter(|| doa_scan(&p, m, &grid, e).unwrap())
            });
        }
    }
    g.finish();
}

fn experiments(c: &mut Criterion) {
    let mut g = c.benchmark_group("table1");
    g.sample_size(10);
    for exec in MODES {
        let mut cfg = presets::table1();
        cfg.execution = exec;
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, _| {
            b.iter(|| run_experiment(&cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, morse, doa, experiments);
criterion_main!(benches);
