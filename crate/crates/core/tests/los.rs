use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ris_hbf::channel::complex_normal;
use ris_hbf::los::{
    fully_digital_achievability, orthogonality_residual, required_d_b, threshold_size,
    LosDesignRule,
};
use ris_hbf::{build_geometry, CMatrix, DistanceMode, PhaseIndexMatrix, SystemConfig};

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    DMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

#[test]
fn reference_threshold_and_spacing() {
    let cfg = SystemConfig::reference();
    assert!((threshold_size(&cfg).unwrap() - 40.0).abs() < 1.0);
    assert!((required_d_b(&cfg, 6).unwrap() - 6.75).abs() < 0.05);
}

#[test]
fn single_antenna_is_vacuously_orthogonal() {
    let mut cfg = SystemConfig::desk(2, 1, 4, 2, 1);
    cfg.rician_on = false;
    let geom = build_geometry(&cfg, DistanceMode::Paraxial).unwrap();
    let r = orthogonality_residual(&cfg, &geom, &PhaseIndexMatrix::max_amplitude(4, 2)).unwrap();
    assert_eq!(r, 0.0);
}

#[test]
fn design_rule_orthogonalizes_three_antennas() {
    let mut cfg = SystemConfig::desk(2, 3, 12, 2, 3);
    cfg.rician_on = false;
    cfg.d_b = required_d_b(&cfg, 12).unwrap();
    let phases = PhaseIndexMatrix::uniform(12, 2, 1);
    let rule = LosDesignRule::evaluate(&cfg, &phases).unwrap();
    assert!((rule.actual_product - rule.required_product).abs() < 1e-12);
    assert_eq!(rule.row_imbalance(), 0.0);
    let geom = build_geometry(&cfg, DistanceMode::Paraxial).unwrap();
    assert!(orthogonality_residual(&cfg, &geom, &phases).unwrap() < 1e-8);
}

#[test]
fn exact_geometry_is_rejected() {
    let cfg = SystemConfig::desk(2, 2, 2, 1, 1);
    let geom = build_geometry(&cfg, DistanceMode::Exact).unwrap();
    assert!(orthogonality_residual(&cfg, &geom, &PhaseIndexMatrix::max_amplitude(2, 1)).is_err());
}

#[test]
fn square_system_is_achievable() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let elements: Vec<CMatrix> = (0..4).map(|_| random(2, 2, &mut rng)).collect();
        let a = fully_digital_achievability(
            &elements,
            &random(2, 4, &mut rng),
            &random(4, 2, &mut rng),
        )
        .unwrap();
        assert!(a.size_condition);
        assert!(a.residual < 1e-8, "residual {}", a.residual);
        assert!(a.achievable);
    }
}

#[test]
fn too_few_antennas_or_elements() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let one_antenna: Vec<CMatrix> = (0..9).map(|_| random(2, 1, &mut rng)).collect();
    let a = fully_digital_achievability(
        &one_antenna,
        &random(2, 9, &mut rng),
        &random(9, 2, &mut rng),
    )
    .unwrap();
    assert!(!a.achievable);

    let three: Vec<CMatrix> = (0..3).map(|_| random(2, 2, &mut rng)).collect();
    let a = fully_digital_achievability(&three, &random(2, 3, &mut rng), &random(3, 2, &mut rng))
        .unwrap();
    assert!(!a.size_condition);
    assert!(!a.achievable);

    assert!(
        fully_digital_achievability(&three, &random(2, 4, &mut rng), &random(3, 2, &mut rng))
            .is_err()
    );
}
