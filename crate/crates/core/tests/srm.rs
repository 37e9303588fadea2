use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ris_hbf::channel::synthesize_channel;
use ris_hbf::srm::{SrmTrace, StopReason, MONOTONE_TOL};
use ris_hbf::{
    build_geometry, run_srm, ChannelTensor, DistanceMode, PhaseIndexMatrix, SrmOptions,
    SystemConfig,
};

fn instance(k: usize, b: u32, seed: u64) -> (SystemConfig, ChannelTensor) {
    let cfg = SystemConfig::desk(k, k, 2, b, seed);
    let geom = build_geometry(&cfg, DistanceMode::Exact).unwrap();
    let ch = synthesize_channel(&cfg, &geom, seed);
    (cfg, ch)
}

fn without_timing(trace: &SrmTrace) -> Vec<(f64, Vec<u32>, usize, usize)> {
    trace
        .records
        .iter()
        .map(|r| (r.sum_rate, r.phases.m.clone(), r.cuts, r.nodes))
        .collect()
}

#[test]
fn repeated_runs_agree() {
    let (cfg, ch) = instance(2, 2, 31);
    let init = PhaseIndexMatrix::max_amplitude(2, 2);
    let a = run_srm(&cfg, &ch, &init, &SrmOptions::default()).unwrap();
    let b = run_srm(&cfg, &ch, &init, &SrmOptions::default()).unwrap();
    assert_eq!(without_timing(&a), without_timing(&b));
    assert_eq!(a.phases, b.phases);
}

#[test]
fn iteration_cap_is_honoured() {
    let (cfg, ch) = instance(2, 1, 8);
    let opts = SrmOptions {
        epsilon: -1.0,
        max_iter: 3,
        ..Default::default()
    };
    let trace = run_srm(&cfg, &ch, &PhaseIndexMatrix::max_amplitude(2, 1), &opts).unwrap();
    assert_eq!(trace.stop, StopReason::MaxIterations);
    assert_eq!(trace.iterations(), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rate_never_decreases(seed in 0u64..10_000, b in 1u32..=2, init_seed in any::<u64>()) {
        let (cfg, ch) = instance(2, b, seed);
        let init = PhaseIndexMatrix::random(2, b, &mut ChaCha8Rng::seed_from_u64(init_seed));
        let trace = run_srm(&cfg, &ch, &init, &SrmOptions::default()).unwrap();
        prop_assert!(trace.is_monotone(MONOTONE_TOL));
        prop_assert!(trace.iterations() <= 20);
        let last = trace.records.last().unwrap();
        prop_assert_eq!(last.sum_rate, trace.sum_rate());
    }
}
