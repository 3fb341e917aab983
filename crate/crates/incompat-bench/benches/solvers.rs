use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use incompat::linalg::{haar_unitary_seeded, HermitianMatrix};
use incompat::noise::NoiseModelKind;
use incompat::povm::{mub_pair, Povm};
use incompat::robustness::{solve_robustness, SolveOptions};
use incompat::search::{sample_set, Restriction, SearchConfig};

fn bench_eigh(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigh");
    for d in [4usize, 8, 16] {
        let u = haar_unitary_seeded(d, 1);
        let h = HermitianMatrix::symmetrize(&u + u.adjoint());
        group.bench_with_input(BenchmarkId::from_parameter(d), &h, |b, h| {
            b.iter(|| h.spectrum().eigenvalues[0])
        });
    }
    group.finish();
}

fn bench_robustness(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_robustness");
    group.sample_size(20);
    let opts = SolveOptions::default();
    for d in [2usize, 3, 4] {
        let s = mub_pair(d).unwrap();
        for kind in NoiseModelKind::ALL {
            group.bench_function(format!("mub_d{d}_{kind}"), |b| {
                b.iter(|| solve_robustness(&s, kind, &opts).unwrap().eta)
            });
        }
    }
    group.finish();
}

fn bench_search_sampling(c: &mut Criterion) {
    let mut cfg = SearchConfig::new(3, vec![3, 3], vec![NoiseModelKind::Depolarising]);
    cfg.restriction = Restriction::RankOneProjective;
    c.bench_function("sample_rank_one_projective_d3", |b| {
        let mut i = 0u64;
        b.iter(|| {
            i += 1;
            sample_set(&cfg, i).unwrap()
        })
    });
    let q = Povm::computational(3);
    c.bench_function("povm_validate_d3", |b| b.iter(|| q.validate()));
}

criterion_group!(benches, bench_eigh, bench_robustness, bench_search_sampling);
criterion_main!(benches);
