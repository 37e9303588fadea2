use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ris_hbf::baselines::{
    continuous_relaxation, fd_gradient, random_phase_baseline, simulated_annealing, AnnealSchedule,
    ContinuousOptions, RateEvaluator, Stencil,
};
use ris_hbf::channel::synthesize_channel;
use ris_hbf::{build_geometry, run_srm, DistanceMode, PhaseIndexMatrix, SrmOptions, SystemConfig};

fn instance(seed: u64, b: u32) -> (SystemConfig, RateEvaluator) {
    let cfg = SystemConfig::desk(2, 2, 2, b, seed);
    let geom = build_geometry(&cfg, DistanceMode::Exact).unwrap();
    let ch = synthesize_channel(&cfg, &geom, seed);
    let eval = RateEvaluator::new(&cfg, &ch);
    (cfg, eval)
}

fn all_rates(eval: &RateEvaluator) -> Vec<f64> {
    (0..16u32)
        .map(|code| {
            let m = (0..4).map(|i| (code >> i) & 1).collect();
            eval.rate(&PhaseIndexMatrix::new(2, 1, m).unwrap())
        })
        .collect()
}

#[test]
fn annealing_finds_enumeration_optimum() {
    for seed in 0..10 {
        let (_, eval) = instance(seed, 1);
        let best = all_rates(&eval)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        let sched = AnnealSchedule {
            cap: 10_000,
            ..Default::default()
        };
        let init = PhaseIndexMatrix::max_amplitude(2, 1);
        let res = simulated_annealing(&eval, &init, &sched, &mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap();
        assert_eq!(res.evaluations, 10_000);
        assert!(
            (res.sum_rate - best).abs() < 1e-12,
            "seed {seed}: {} vs {best}",
            res.sum_rate
        );
    }
}

#[test]
fn zero_temperature_never_loses_ground() {
    for seed in 0..10 {
        let (_, eval) = instance(seed, 2);
        let init = PhaseIndexMatrix::uniform(2, 2, 0);
        let start = eval.rate(&init);
        let sched = AnnealSchedule {
            t0: 0.0,
            cap: 200,
            ..Default::default()
        };
        let a = simulated_annealing(&eval, &init, &sched, &mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap();
        let b = simulated_annealing(&eval, &init, &sched, &mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap();
        assert!(a.sum_rate >= start);
        assert_eq!(a, b);
    }
}

#[test]
fn best_of_sixteen_beats_median() {
    let (_, eval) = instance(4, 1);
    let mut rates = all_rates(&eval);
    rates.sort_by(f64::total_cmp);
    let median = 0.5 * (rates[7] + rates[8]);
    let trials = 400;
    let mean = (0..trials)
        .map(|s| {
            random_phase_baseline(&eval, 2, 1, 16, &mut ChaCha8Rng::seed_from_u64(s))
                .unwrap()
                .sum_rate
        })
        .sum::<f64>()
        / trials as f64;
    assert!(mean >= median, "{mean} < {median}");
}

#[test]
fn annealing_beats_random_on_average() {
    let (mut sa, mut rnd) = (0.0, 0.0);
    for seed in 0..20 {
        let (_, eval) = instance(seed, 1);
        let best = all_rates(&eval)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = simulated_annealing(
            &eval,
            &PhaseIndexMatrix::max_amplitude(2, 1),
            &AnnealSchedule {
                cap: 50,
                ..Default::default()
            },
            &mut rng,
        )
        .unwrap()
        .sum_rate;
        let r = random_phase_baseline(&eval, 2, 1, 1, &mut rng)
            .unwrap()
            .sum_rate;
        assert!(best >= s - 1e-12);
        sa += s;
        rnd += r;
    }
    assert!(sa >= rnd);
}

#[test]
fn central_difference_agrees_with_five_point() {
    for seed in 0..10 {
        let (_, eval) = instance(seed, 2);
        let x = [0.4 + seed as f64, 1.3, 2.9, 5.1];
        let f = |t: &[f64]| eval.rate_theta(t);
        let g2 = fd_gradient(f, &x, 1e-5, Stencil::Central);
        let g4 = fd_gradient(f, &x, 1e-3, Stencil::FivePoint);
        let scale = g4.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (a, b) in g2.iter().zip(&g4) {
            assert!((a - b).abs() <= 1e-4 * scale, "{a} vs {b}");
        }
    }
}

#[test]
fn relaxation_seeded_at_discrete_solution_dominates_it() {
    for seed in 0..5 {
        let (cfg, eval) = instance(seed, 1);
        let geom = build_geometry(&cfg, DistanceMode::Exact).unwrap();
        let ch = synthesize_channel(&cfg, &geom, seed);
        let trace = run_srm(
            &cfg,
            &ch,
            &PhaseIndexMatrix::max_amplitude(2, 1),
            &SrmOptions::default(),
        )
        .unwrap();
        let init: Vec<f64> = (0..4).map(|e| trace.phases.theta(e)).collect();
        let res = continuous_relaxation(&eval, &init, &ContinuousOptions::default()).unwrap();
        assert!(res.sum_rate >= trace.sum_rate() - 1e-6);

        let (_, fine) = instance(seed, 8);
        let sched = AnnealSchedule {
            cap: 2_000,
            ..Default::default()
        };
        let sa = simulated_annealing(
            &fine,
            &PhaseIndexMatrix::max_amplitude(2, 8),
            &sched,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap();
        let init: Vec<f64> = (0..4).map(|e| sa.phases.theta(e)).collect();
        let res = continuous_relaxation(&fine, &init, &ContinuousOptions::default()).unwrap();
        assert!(res.sum_rate >= sa.sum_rate - 1e-6);
    }
}
