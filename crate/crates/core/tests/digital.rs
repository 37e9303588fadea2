use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ris_hbf::channel::complex_normal;
use ris_hbf::digital::zf_sum_rate;
use ris_hbf::{algorithm1, water_filling, CMatrix, Error};

fn random_f(k: usize, n_t: usize, rng: &mut impl Rng) -> CMatrix {
    DMatrix::from_fn(k, n_t, |_, _| complex_normal(rng))
}

fn objective(p: &[f64], sigma2: f64) -> f64 {
    zf_sum_rate(p, sigma2)
}

#[test]
fn zf_residual_on_wide_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let f = random_f(3, 5, &mut rng);
    let sol = algorithm1(&f, 10.0, 0.5).unwrap();
    let r = &f * &sol.v_tilde - CMatrix::identity(3, 3);
    assert!(r.iter().all(|z| z.norm() < 1e-10));
}

#[test]
fn two_user_water_filling_matches_grid() {
    let (nu, p_total, sigma2) = ([1.0, 10.0], 1.0, 0.1);
    let (p, _) = water_filling(&nu, p_total, sigma2);
    let best = (0..=1_000_000)
        .map(|i| {
            let p0 = p_total * i as f64 / 1e6;
            let p1 = (p_total - nu[0] * p0) / nu[1];
            objective(&[p0, p1], sigma2)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((objective(&p, sigma2) - best).abs() < 1e-4);
}

#[test]
fn unit_gains_split_power_evenly() {
    let sol = algorithm1(&CMatrix::identity(2, 2), 2.0, 1.0).unwrap();
    assert!((sol.p[0] - 1.0).abs() < 1e-12 && (sol.p[1] - 1.0).abs() < 1e-12);
    assert!((sol.sum_rate - 2.0).abs() < 1e-12);
}

#[test]
fn tall_matrix_is_rank_deficient() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    assert!(matches!(
        algorithm1(&random_f(3, 2, &mut rng), 1.0, 1.0),
        Err(Error::RankDeficient { .. })
    ));
}

proptest! {
    #[test]
    fn zf_and_power_invariants(seed in any::<u64>(), k in 1usize..=4, extra in 0usize..=2, snr_db in -10.0f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_f(k, k + extra, &mut rng);
        let p_total = 5.0;
        let sigma2 = p_total / 10f64.powf(snr_db / 10.0);
        let sol = algorithm1(&f, p_total, sigma2).unwrap();

        let g = &f * &sol.v_d;
        for a in 0..k {
            for b in 0..k {
                if a == b {
                    prop_assert!((g[(a, a)].norm() - sol.p[a].sqrt()).abs() < 1e-9);
                } else {
                    prop_assert!(g[(a, b)].norm() < 1e-9 * p_total.sqrt());
                }
            }
        }

        prop_assert!(sol.p.iter().all(|&p| p >= 0.0));
        let spent: f64 = sol.nu.iter().zip(&sol.p).map(|(n, p)| n * p).sum();
        prop_assert!((spent - p_total).abs() < 1e-9 * p_total.max(1.0));

        let level = 1.0 / sol.mu;
        for i in 0..k {
            if sol.p[i] > 0.0 {
                prop_assert!((level - sol.nu[i] * sigma2 - sol.nu[i] * sol.p[i]).abs() < 1e-9 * level);
            } else {
                prop_assert!(level <= sol.nu[i] * sigma2 * (1.0 + 1e-12));
            }
        }

        let equal: Vec<f64> = sol.nu.iter().map(|n| p_total / (k as f64 * n)).collect();
        prop_assert!(sol.sum_rate >= objective(&equal, sigma2) - 1e-12);

        let eps = 1e-6;
        for i in 0..k {
            for j in 0..k {
                if i == j || sol.p[j] < eps * sol.nu[i] / sol.nu[j] {
                    continue;
                }
                let mut q = sol.p.clone();
                q[i] += eps;
                q[j] -= eps * sol.nu[i] / sol.nu[j];
                prop_assert!(objective(&q, sigma2) <= sol.sum_rate + 1e-12);
            }
        }

        let more = algorithm1(&f, 2.0 * p_total, sigma2).unwrap();
        prop_assert!(more.sum_rate >= sol.sum_rate);
    }
}
