use criterion::{criterion_group, criterion_main, Criterion};
use topopeps_bench::double_torus;
use topopeps_core::anyon::braid_flux_charge;
use topopeps_core::group::{FiniteGroup, Representation};
use topopeps_core::la;
use topopeps_core::mps::{self, MpsTensor};
use topopeps_core::peps::ground::GroundSpace2d;
use topopeps_core::peps::lattice::{Insertions, Region};
use topopeps_core::topo::entanglement_spectrum;

fn groups(c: &mut Criterion) {
    c.bench_function("character_table D4", |b| {
        b.iter(|| FiniteGroup::builtin("D4").unwrap().character_table().unwrap())
    });
    let s3 = FiniteGroup::builtin("S3").unwrap();
    c.bench_function("pair classes S3", |b| b.iter(|| s3.commuting_pair_classes().count()));
    let table = s3.character_table().unwrap();
    let k = s3.parse_element("(123)").unwrap();
    c.bench_function("flux-charge braid S3", |b| {
        b.iter(|| braid_flux_charge(&s3, &table, 2, s3.identity(), k).unwrap())
    });
}

fn contraction(c: &mut Criterion) {
    let (_, _, torus) = double_torus("Z2", 3);
    let none = Insertions::new();
    let region = Region::from_sites(&[(1, 1), (1, 2)], 3).unwrap();
    c.bench_function("environment Z2 L=3 1x2", |b| {
        b.iter(|| torus.environment(&region, &none, &none).unwrap())
    });
    c.bench_function("entanglement spectrum Z2 L=3 1-site", |b| {
        b.iter(|| entanglement_spectrum(&torus, &[(1, 1)], &none).unwrap())
    });
}

fn ground_spaces(c: &mut Criterion) {
    let mut group = c.benchmark_group("ground space");
    group.sample_size(10);
    let (_, rep, torus) = double_torus("Z2", 2);
    group.bench_function("2D Z2 L=2", |b| b.iter(|| GroundSpace2d::solve(&torus, &rep).unwrap()));
    let g = FiniteGroup::builtin("Z3").unwrap();
    let rep3 = Representation::regular(&g);
    let a = MpsTensor::random_twirled(&rep3, mps::commutant_dim(&rep3) + 1, &mut la::rng(1));
    let terms = mps::parent_hamiltonian_1d(&a, 5).unwrap();
    let dims = vec![a.phys_dim(); 5];
    group.bench_function("1D Z3 L=5", |b| {
        b.iter(|| mps::ground_space(&terms, &dims, mps::RANK_TOL, mps::DEFAULT_STATE_CAP).unwrap())
    });
    group.finish();
}

criterion_group!(benches, groups, contraction, ground_spaces);
criterion_main!(benches);
