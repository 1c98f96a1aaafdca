use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use fcspdc::dispersion::{Crystal, CrystalDispersion};
use fcspdc::exec::Execution;
use fcspdc::optimizer::{linspace, sweep, OptimizationConstraints, SearchOptions, SweepSettings};
use fcspdc::phasematch::ConfigId;
use fcspdc::source::{GridOptions, SourceModel};
use fcspdc::spectra::{BandwidthSet, PmfKind};

fn settings(exec: Execution) -> SweepSettings {
    SweepSettings {
        pmf: PmfKind::Gaussian,
        constraints: OptimizationConstraints::default(),
        search: SearchOptions { starts: 2, polish_evals: 20, polish_configs: 1, ..Default::default() },
        conventional: false,
        exec,
    }
}

fn bench_sweep(c: &mut Criterion) {
    let disp = CrystalDispersion::builtin(Crystal::Ktp);
    let lambdas = linspace(700.0, 1400.0, 4);
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_with_input(BenchmarkId::new(name, lambdas.len()), &exec, |b, &exec| {
            let s = settings(exec);
            b.iter(|| sweep(disp, &lambdas, &s))
        });
    }
    group.finish();
}

fn bench_amplitudes(c: &mut Criterion) {
    let disp = CrystalDispersion::builtin(Crystal::Ktp);
    let src = SourceModel::new(disp, ConfigId::II, 780.0).unwrap();
    let bw = BandwidthSet::new(0.004, 0.002, 0.004, 0.002).unwrap();
    let mut group = c.benchmark_group("amplitudes");
    group.sample_size(10);
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        let opts = GridOptions { exec, ..GridOptions::default() };
        group.bench_function(name, |b| b.iter(|| src.amplitudes(&bw, PmfKind::Sinc, &opts).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_sweep, bench_amplitudes);
criterion_main!(benches);
