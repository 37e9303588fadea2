use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ris_hbf::baselines::RateEvaluator;
use ris_hbf::channel::synthesize_channel;
use ris_hbf::codebook::whiten;
use ris_hbf::par::{map_indices, map_indices_seq};
use ris_hbf::{build_geometry, CMatrix, DistanceMode, PhaseIndexMatrix, SystemConfig};

fn setup(n_r: usize) -> (SystemConfig, Vec<CMatrix>) {
    let cfg = SystemConfig::desk(5, 5, n_r, 2, 1);
    let geom = build_geometry(&cfg, DistanceMode::Exact).unwrap();
    let ch = synthesize_channel(&cfg, &geom, 1);
    let ht = whiten(&ch.element_matrices(&cfg.phi_k), &[1.0; 5]);
    (cfg, ht)
}

fn pair_grams(c: &mut Criterion) {
    let mut group = c.benchmark_group("pair_grams");
    for n_r in [6, 10] {
        let (_, ht) = setup(n_r);
        let n = ht.len();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .collect();
        let gram = |i: usize| {
            let (p, q) = pairs[i];
            &ht[p] * ht[q].adjoint()
        };
        group.bench_with_input(BenchmarkId::new("parallel", n_r), &n_r, |b, _| {
            b.iter(|| map_indices(pairs.len(), gram))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n_r), &n_r, |b, _| {
            b.iter(|| map_indices_seq(pairs.len(), gram))
        });
    }
    group.finish();
}

fn random_configurations(c: &mut Criterion) {
    let mut group = c.benchmark_group("score_configurations");
    let (cfg, _) = setup(6);
    let geom = build_geometry(&cfg, DistanceMode::Exact).unwrap();
    let eval = RateEvaluator::new(&cfg, &synthesize_channel(&cfg, &geom, 1));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let configs: Vec<PhaseIndexMatrix> = (0..2000)
        .map(|_| PhaseIndexMatrix::random(6, 2, &mut rng))
        .collect();
    group.bench_function("parallel", |b| {
        b.iter(|| map_indices(configs.len(), |i| eval.rate(&configs[i])))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| map_indices_seq(configs.len(), |i| eval.rate(&configs[i])))
    });
    group.finish();
}

criterion_group!(benches, pair_grams, random_configurations);
criterion_main!(benches);
