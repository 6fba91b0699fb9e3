use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use wavekin_core::census::{Budget, PairCensus};
use wavekin_core::diagrams::{truncated_moment, DiagramConfig};
use wavekin_core::evolver::nonlinear_term;
use wavekin_core::fields::{sample_field, spectrum_on_modes, NoiseLaw, SpectrumFamily};
use wavekin_core::kinetic::{collision, KineticGrid};
use wavekin_core::lattice::{BoxSpec, ModeSet, WaveVector};

fn kernels(c: &mut Criterion) {
    let f = SpectrumFamily::gaussian(1.0, 0.5);

    let grid = KineticGrid::new(2, 1.0 / 8.0, vec![1.0, 1.0], 1.0).unwrap();
    let n = grid.values_of(&f).unwrap();
    let b = grid.default_broadening();
    c.bench_function("collision h=1/8", |bench| bench.iter(|| collision(&grid, black_box(&n), &b).unwrap()));

    let spec = BoxSpec::square(2, 16.0, 1.0, 0.75).unwrap();
    let field = sample_field(&spec, &f, NoiseLaw::Gaussian, 1).unwrap();
    c.bench_function("nonlinear_term L=16", |bench| bench.iter(|| nonlinear_term(&spec, black_box(&field)).unwrap()));

    let modes = ModeSet::build(&spec).unwrap();
    c.bench_function("pair census L=16", |bench| {
        bench.iter(|| PairCensus::collect(&spec, &modes, black_box(WaveVector::ZERO), &Budget::default()).unwrap().exact())
    });

    let small = BoxSpec::square(1, 4.0, 1.0, 0.0).unwrap();
    let n_small = spectrum_on_modes(&small, &ModeSet::build(&small).unwrap(), &f).unwrap();
    let cfg = DiagramConfig::default();
    c.bench_function("truncated moment N=2 d=1 L=4", |bench| {
        bench.iter(|| truncated_moment(&small, black_box(&n_small), 0.2, 2, &cfg).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = kernels
}
criterion_main!(benches);
