use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ris_hbf::analog::{
    algorithm2, direct_gram, epigraph_value, floored_powers, objective_f, AnalogBfModel,
    AnalogOptions, Layout,
};
use ris_hbf::channel::complex_normal;
use ris_hbf::codebook::{
    encode_configuration, gram_affine_expansion, whiten, CodebookVectors, PairGrams,
};
use ris_hbf::digital::zf_precoder;
use ris_hbf::los::row_balance;
use ris_hbf::{assemble_f, CMatrix, PhaseIndexMatrix};
use std::f64::consts::PI;

fn random_elements(n: usize, k: usize, n_t: usize, rng: &mut impl Rng) -> Vec<CMatrix> {
    (0..n)
        .map(|_| DMatrix::from_fn(k, n_t, |_, _| complex_normal(rng)))
        .collect()
}

fn all_configurations(n_el: usize, b: u32) -> impl Iterator<Item = PhaseIndexMatrix> {
    let levels = 1u32 << b;
    let n_r = (n_el as f64).sqrt() as usize;
    (0..levels.pow(n_el as u32)).map(move |mut code| {
        let m = (0..n_el)
            .map(|_| {
                let d = code % levels;
                code /= levels;
                d
            })
            .collect();
        PhaseIndexMatrix::new(n_r, b, m).unwrap()
    })
}

#[test]
fn codebook_examples() {
    let cb = CodebookVectors::new(1);
    let x = cb.encode(PI).unwrap();
    assert_eq!(CodebookVectors::dot(&x.x, &cb.c), -1.0);
    assert_eq!(CodebookVectors::dot(&x.x, &cb.s), 0.0);
    let cb = CodebookVectors::new(2);
    assert_eq!(cb.len(), 7);
    assert_eq!(cb.e_mask.iter().sum::<f64>(), 3.0);
    assert!(cb.a.windows(2).all(|w| w[0] < w[1]));
    for m in 0..4 {
        let theta = m as f64 * PI / 2.0;
        assert_eq!(cb.decode(&cb.encode(theta).unwrap()).unwrap(), theta);
    }
    assert!(cb.encode(0.3).is_err());
}

#[test]
fn off_state_gives_zero_gram() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ht = random_elements(4, 2, 2, &mut rng);
    let cb = CodebookVectors::new(2);
    let (xs, ys) = encode_configuration(&cb, &PhaseIndexMatrix::uniform(2, 2, 3));
    let g = gram_affine_expansion(&PairGrams::from_whitened(&ht), &cb, &xs, &ys).unwrap();
    assert!(g.iter().all(|z| z.norm() < 1e-15));
}

#[test]
fn trace_objective_matches_zf_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let f = DMatrix::from_fn(3, 4, |_, _| complex_normal(&mut rng));
        let p: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..3.0)).collect();
        let ft = whiten(std::slice::from_ref(&f), &p).remove(0);
        let (_, nu) = zf_precoder(&ft).unwrap();
        let expected: f64 = nu.iter().sum();
        let got = objective_f(&f, &p).unwrap();
        assert!((got - expected).abs() < 1e-10 * expected);
    }
}

#[test]
fn model_dimensions() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let one = AnalogBfModel::build(
        &random_elements(1, 1, 1, &mut rng),
        &[1.0],
        &PhaseIndexMatrix::max_amplitude(1, 2),
        &AnalogOptions::default(),
    )
    .unwrap();
    assert_eq!(one.layout.n_pairs(), 0);
    assert_eq!(one.layout.num_vars(), 1 + 7);

    let four = AnalogBfModel::build(
        &random_elements(4, 2, 2, &mut rng),
        &[1.0, 1.0],
        &PhaseIndexMatrix::max_amplitude(2, 1),
        &AnalogOptions::default(),
    )
    .unwrap();
    assert_eq!(four.layout.len, 3);
    assert_eq!(four.layout.n_pairs(), 6);
    assert_eq!(four.layout.num_vars(), 1 + 10 * 3);
    assert_eq!(four.milp.lp.num_vars(), four.layout.num_vars());
    assert_eq!(Layout::W, 0);
}

#[test]
fn single_element_picks_max_amplitude() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let el = random_elements(1, 1, 1, &mut rng);
    let out = algorithm2(
        &el,
        &[1.0],
        &PhaseIndexMatrix::uniform(1, 2, 0),
        &AnalogOptions::default(),
    )
    .unwrap();
    assert_eq!(out.phases.m, vec![1]);
}

#[test]
fn los_mode_returns_balanced_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let el = random_elements(4, 2, 2, &mut rng);
    let p = [1.3, 0.6];
    let opts = AnalogOptions {
        los_mode: true,
        ..AnalogOptions::default()
    };
    let out = algorithm2(&el, &p, &PhaseIndexMatrix::uniform(2, 2, 1), &opts).unwrap();
    let rows = row_balance(&out.phases);
    assert!((rows[0] - rows[1]).abs() < 1e-12);

    let best = all_configurations(4, 2)
        .filter(|c| {
            let r = row_balance(c);
            (r[0] - r[1]).abs() < 1e-12
        })
        .map(|c| epigraph_value(&direct_gram(&el, &p, &c)).unwrap_or(f64::INFINITY))
        .fold(f64::INFINITY, f64::min);
    assert!(
        (out.epigraph - best).abs() <= 1e-6 * best,
        "{} vs {best}",
        out.epigraph
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn one_hot_round_trip(b in 1u32..=4, m in 0u32..16, m2 in 0u32..16) {
        let cb = CodebookVectors::new(b);
        let (m, m2) = (m % (1 << b), m2 % (1 << b));
        let x = cb.encode_index(m).unwrap();
        prop_assert_eq!(x.x.iter().sum::<f64>(), 1.0);
        prop_assert_eq!(CodebookVectors::dot(&x.x, &cb.e_mask), 0.0);
        prop_assert_eq!(cb.decode_index(&x).unwrap(), m);
        let x2 = cb.encode_index(m2).unwrap();
        let y = cb.pair(m, m2);
        prop_assert_eq!(y.y.iter().sum::<f64>(), 1.0);
        let lhs = CodebookVectors::dot(&x.x, &cb.a) - CodebookVectors::dot(&x2.x, &cb.a);
        prop_assert!((lhs - CodebookVectors::dot(&y.y, &cb.a)).abs() < 1e-12);
        prop_assert!(cb.check_pair(&x, &x2, &y).is_ok());
    }

    #[test]
    fn gram_expansion_is_exact(seed in any::<u64>(), b in 1u32..=3, k in 1usize..=3, n_r in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = n_r * n_r;
        let ht = random_elements(n, k, k + 1, &mut rng);
        let phases = PhaseIndexMatrix::random(n_r, b, &mut rng);
        let cb = CodebookVectors::new(b);
        let grams = PairGrams::from_whitened(&ht);
        for p in 0..n {
            for p2 in 0..n {
                let d = grams.get(p, p2) - grams.get(p2, p).adjoint();
                prop_assert!(d.iter().all(|z| z.norm() < 1e-14));
            }
        }
        let (xs, ys) = encode_configuration(&cb, &phases);
        let g = gram_affine_expansion(&grams, &cb, &xs, &ys).unwrap();
        let f = assemble_f(&ht, &phases.responses());
        let direct = &f * f.adjoint();
        prop_assert!((g - direct).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn model_point_reproduces_direct_gram(seed in any::<u64>(), b in 1u32..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let el = random_elements(4, 2, 2, &mut rng);
        let p = [rng.random_range(0.1..2.0), rng.random_range(0.1..2.0)];
        let inc = PhaseIndexMatrix::random(2, b, &mut rng);
        let model = AnalogBfModel::build(&el, &p, &inc, &AnalogOptions::default()).unwrap();
        let phases = PhaseIndexMatrix::random(2, b, &mut rng);
        let point = model.point_for(&phases, 1.0);
        prop_assert_eq!(model.decode(&point).unwrap(), phases.clone());
        let g = model.gram_at(&point) * Complex64::new(model.scale, 0.0);
        let direct = direct_gram(&el, &floored_powers(&p, 1e-4), &phases);
        let tol = 1e-10 * direct.norm().max(1.0);
        prop_assert!((g - direct).iter().all(|z| z.norm() < tol));
    }
}
