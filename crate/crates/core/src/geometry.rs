//! Array positions and BS-RIS-user path lengths.
//!
//! Coordinates: BS antenna 0 at the origin, the y axis points from BS
//! antenna 0 to surface element (0,0), z is vertical. Users sit on the half
//! disc centred on element (0,0), on the same side of the surface plane as
//! the BS.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::SystemConfig;
use crate::error::{Error, Result};

pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMode {
    Exact,
    /// First-order expansion of the BS-surface distance around D00.
    Paraxial,
}

#[derive(Debug, Clone)]
pub struct GeometrySolution {
    pub bs_positions: Vec<Point>,
    /// Indexed `[l1 * n_r + l2]`.
    pub ris_positions: Vec<Point>,
    /// Indexed `[n][l1 * n_r + l2]`.
    pub d_bs_ris: Vec<Vec<f64>>,
    /// Indexed `[k][l1 * n_r + l2]`, always exact.
    pub d_ris_user: Vec<Vec<f64>>,
    pub mode: DistanceMode,
    pub n_r: usize,
}

impl GeometrySolution {
    pub fn element(&self, l1: usize, l2: usize) -> usize {
        l1 * self.n_r + l2
    }
}

fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub fn bs_position(cfg: &SystemConfig, n: usize) -> Point {
    let r = n as f64 * cfg.d_b;
    [r * cfg.theta_b.cos(), r * cfg.theta_b.sin(), 0.0]
}

pub fn ris_position(cfg: &SystemConfig, l1: usize, l2: usize) -> Point {
    let r = l1 as f64 * cfg.d_r1;
    [
        r * cfg.theta_r.cos(),
        r * cfg.theta_r.sin() + cfg.d_00,
        l2 as f64 * cfg.d_r2,
    ]
}

/// `(X, Y, Z)` offsets of element `(l1, l2)` from antenna `n`.
fn offsets(cfg: &SystemConfig, n: usize, l1: usize, l2: usize) -> (f64, f64, f64) {
    let (a, b) = (l1 as f64 * cfg.d_r1, n as f64 * cfg.d_b);
    (
        a * cfg.theta_r.cos() - b * cfg.theta_b.cos(),
        a * cfg.theta_r.sin() + cfg.d_00 - b * cfg.theta_b.sin(),
        l2 as f64 * cfg.d_r2,
    )
}

pub fn exact_distance(cfg: &SystemConfig, n: usize, l1: usize, l2: usize) -> f64 {
    let (x, y, z) = offsets(cfg, n, l1, l2);
    (x * x + y * y + z * z).sqrt()
}

/// Paraxial distance and its second-order correction term.
pub fn paraxial_distance(cfg: &SystemConfig, n: usize, l1: usize, l2: usize) -> (f64, f64) {
    let (x, y, z) = offsets(cfg, n, l1, l2);
    let corr = (x * x + z * z) / (2.0 * cfg.d_00);
    (y + corr, corr)
}

pub fn build_geometry(cfg: &SystemConfig, mode: DistanceMode) -> Result<GeometrySolution> {
    cfg.validate()?;
    let n_r = cfg.n_r;
    let bs_positions: Vec<Point> = (0..cfg.n_t).map(|n| bs_position(cfg, n)).collect();
    let ris_positions: Vec<Point> = (0..n_r * n_r)
        .map(|e| ris_position(cfg, e / n_r, e % n_r))
        .collect();

    let mut d_bs_ris = Vec::with_capacity(cfg.n_t);
    for n in 0..cfg.n_t {
        let mut row = Vec::with_capacity(n_r * n_r);
        for e in 0..n_r * n_r {
            let (l1, l2) = (e / n_r, e % n_r);
            let d = match mode {
                DistanceMode::Exact => dist(&ris_positions[e], &bs_positions[n]),
                DistanceMode::Paraxial => {
                    let (d, corr) = paraxial_distance(cfg, n, l1, l2);
                    if corr > 0.1 * cfg.d_00 {
                        return Err(Error::ParaxialInvalid {
                            correction: corr,
                            d_00: cfg.d_00,
                        });
                    }
                    d
                }
            };
            if !(d > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "antenna {n} coincides with element ({l1},{l2})"
                )));
            }
            row.push(d);
        }
        d_bs_ris.push(row);
    }

    let mut d_ris_user = Vec::with_capacity(cfg.k_users);
    for (k, u) in cfg.user_positions.iter().enumerate() {
        let row: Vec<f64> = ris_positions.iter().map(|p| dist(p, u)).collect();
        if row.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "user {k} sits on a surface element"
            )));
        }
        d_ris_user.push(row);
    }

    Ok(GeometrySolution {
        bs_positions,
        ris_positions,
        d_bs_ris,
        d_ris_user,
        mode,
        n_r,
    })
}

/// Frame for dropping users: centre, unit direction into the user half
/// plane (horizontal), and user height.
#[derive(Debug, Clone, Copy)]
pub struct UserPlacement {
    pub center: Point,
    pub facing: [f64; 2],
    pub height: f64,
}

impl UserPlacement {
    pub fn for_config(cfg: &SystemConfig) -> Self {
        let center = ris_position(cfg, 0, 0);
        let normal = [-cfg.theta_r.sin(), cfg.theta_r.cos()];
        // BS lies at the origin; pick the side of the surface plane it is on.
        let side = -center[0] * normal[0] - center[1] * normal[1];
        let sign = if side > 0.0 { 1.0 } else { -1.0 };
        Self {
            center,
            facing: [sign * normal[0], sign * normal[1]],
            height: cfg.user_height,
        }
    }
}

/// Uniform points on the half disc of `radius` in front of the surface.
pub fn half_circle_user_placement(
    seed: u64,
    k_users: usize,
    radius: f64,
    frame: &UserPlacement,
) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f05_e75a_11ce);
    let base = frame.facing[1].atan2(frame.facing[0]);
    (0..k_users)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let phi =
                base + rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
            [
                frame.center[0] + r * phi.cos(),
                frame.center[1] + r * phi.sin(),
                frame.height,
            ]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_pair_is_d00_in_both_modes() {
        let cfg = SystemConfig::reference();
        for mode in [DistanceMode::Exact, DistanceMode::Paraxial] {
            let g = build_geometry(&cfg, mode).unwrap();
            assert_eq!(g.d_bs_ris[0][0], cfg.d_00);
        }
    }

    #[test]
    fn zero_angle_hand_values() {
        let mut cfg = SystemConfig::reference();
        cfg.theta_b = 0.0;
        cfg.theta_r = 0.0;
        let exact = exact_distance(&cfg, 1, 1, 0);
        let (par, _) = paraxial_distance(&cfg, 1, 1, 0);
        assert!((exact - ((0.03f64 - 1.0).powi(2) + 400.0).sqrt()).abs() < 1e-12);
        assert!((par - (20.0 + (0.03f64 - 1.0).powi(2) / 40.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_large_paraxial_correction() {
        let mut cfg = SystemConfig::reference();
        cfg.d_00 = 1.0;
        cfg.d_b = 1.0;
        assert!(matches!(
            build_geometry(&cfg, DistanceMode::Paraxial),
            Err(Error::ParaxialInvalid { .. })
        ));
        assert!(build_geometry(&cfg, DistanceMode::Exact).is_ok());
    }

    #[test]
    fn users_are_in_front_and_within_radius() {
        let cfg = SystemConfig::reference();
        let frame = UserPlacement::for_config(&cfg);
        let pts = half_circle_user_placement(3, 200, 60.0, &frame);
        assert_eq!(pts, half_circle_user_placement(3, 200, 60.0, &frame));
        for p in &pts {
            let (dx, dy) = (p[0] - frame.center[0], p[1] - frame.center[1]);
            assert!((dx * dx + dy * dy).sqrt() <= 60.0 + 1e-12);
            assert!(dx * frame.facing[0] + dy * frame.facing[1] >= 0.0);
        }
        // the BS is on the facing side
        assert!(-frame.center[0] * frame.facing[0] - frame.center[1] * frame.facing[1] > 0.0);
    }
}
