//! System parameters and their on-disk key/value form.
//!
//! The file form is flat TOML. Keys match the [`SystemConfig`] field names;
//! angles are written in degrees (`theta_b`, `theta_r`), distances in
//! meters and powers in watts. Missing keys fall back to
//! [`SystemConfig::reference`]. When `user_positions` is absent, users are
//! dropped on the half disc in front of the surface using `seed`.
//!
//! ```toml
//! n_t = 2
//! k_users = 2
//! n_r = 2
//! b_bits = 1
//! p_total = 20.0
//! noise_power = 12.619
//! theta_b = 15.0
//! theta_r = 30.0
//! user_positions = [[10.0, 40.0, 0.0], [-5.0, 30.0, 0.0]]
//! phi_k = [[1.0, 0.0], [1.0, 0.0]]
//! ```

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{half_circle_user_placement, UserPlacement};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub n_t: usize,
    pub k_users: usize,
    /// Side length of the square surface (n_r * n_r elements).
    pub n_r: usize,
    pub b_bits: u32,
    pub p_total: f64,
    pub noise_power: f64,
    pub wavelength: f64,
    pub d_b: f64,
    pub d_r1: f64,
    pub d_r2: f64,
    /// Radians.
    pub theta_b: f64,
    /// Radians.
    pub theta_r: f64,
    pub d_00: f64,
    pub alpha: f64,
    /// Exponent of the NLoS path-loss law `d^-exponent`; `None` reuses `alpha`.
    pub nlos_exponent: Option<f64>,
    pub kappa: f64,
    /// `false` selects the pure line-of-sight limit (kappa -> infinity).
    pub rician_on: bool,
    /// Dimensionless wave number of the surface elements.
    pub wave_number: f64,
    pub user_positions: Vec<[f64; 3]>,
    pub user_height: f64,
    pub placement_radius: f64,
    pub seed: u64,
    pub phi_k: Vec<Complex64>,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl SystemConfig {
    /// Simulation setup of the reference scenario: 5.9 GHz carrier, 20 W,
    /// SNR 2 dB, D00 = 20 m, d_B = 1 m, d_R = 3 cm, arrays at 15/30 degrees,
    /// kappa = 4, five antennas and users, 6 x 6 surface, 2-bit phases.
    pub fn reference() -> Self {
        let mut cfg = Self {
            n_t: 5,
            k_users: 5,
            n_r: 6,
            b_bits: 2,
            p_total: 20.0,
            noise_power: 20.0 / db_to_linear(2.0),
            wavelength: SPEED_OF_LIGHT / 5.9e9,
            d_b: 1.0,
            d_r1: 0.03,
            d_r2: 0.03,
            theta_b: 15f64.to_radians(),
            theta_r: 30f64.to_radians(),
            d_00: 20.0,
            alpha: 0.0,
            nlos_exponent: None,
            kappa: 4.0,
            rician_on: true,
            wave_number: 1.0,
            user_positions: Vec::new(),
            user_height: 0.0,
            placement_radius: 60.0,
            seed: 1,
            phi_k: Vec::new(),
        };
        cfg.place_users();
        cfg
    }

    /// Reference scenario shrunk to a size the exact analog solver handles.
    pub fn desk(k_users: usize, n_t: usize, n_r: usize, b_bits: u32, seed: u64) -> Self {
        let mut cfg = Self::reference();
        cfg.k_users = k_users;
        cfg.n_t = n_t;
        cfg.n_r = n_r;
        cfg.b_bits = b_bits;
        cfg.seed = seed;
        cfg.place_users();
        cfg
    }

    /// Redraws users on the half disc and resets `phi_k` to ones.
    pub fn place_users(&mut self) {
        let frame = UserPlacement::for_config(self);
        self.user_positions =
            half_circle_user_placement(self.seed, self.k_users, self.placement_radius, &frame);
        self.phi_k = vec![Complex64::new(1.0, 0.0); self.k_users];
    }

    /// `sigma^2 = P_T / SNR`.
    pub fn set_snr_db(&mut self, snr_db: f64) {
        self.noise_power = self.p_total / db_to_linear(snr_db);
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * (self.p_total / self.noise_power).log10()
    }

    pub fn n_elements(&self) -> usize {
        self.n_r * self.n_r
    }

    pub fn codebook_size(&self) -> usize {
        1usize << self.b_bits
    }

    pub fn nlos_exponent(&self) -> f64 {
        self.nlos_exponent.unwrap_or(self.alpha)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.n_t < 1 || self.k_users < 1 || self.n_r < 1 {
            return bad("n_t, k_users and n_r must be at least 1");
        }
        if self.b_bits < 1 || self.b_bits > 16 {
            return bad("b_bits must be in 1..=16");
        }
        let positive = [
            ("p_total", self.p_total),
            ("noise_power", self.noise_power),
            ("wavelength", self.wavelength),
            ("d_b", self.d_b),
            ("d_r1", self.d_r1),
            ("d_r2", self.d_r2),
            ("d_00", self.d_00),
            ("placement_radius", self.placement_radius),
            ("wave_number", self.wave_number),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.kappa >= 0.0) {
            return bad("kappa must be nonnegative");
        }
        if !self.alpha.is_finite() || !self.nlos_exponent().is_finite() {
            return bad("path-loss exponents must be finite");
        }
        if !self.theta_b.is_finite() || !self.theta_r.is_finite() || !self.user_height.is_finite() {
            return bad("angles and user height must be finite");
        }
        if self.user_positions.len() != self.k_users {
            return Err(Error::InvalidConfig(format!(
                "user_positions has {} entries for {} users",
                self.user_positions.len(),
                self.k_users
            )));
        }
        if self.user_positions.iter().flatten().any(|v| !v.is_finite()) {
            return bad("user positions must be finite");
        }
        if self.phi_k.len() != self.k_users {
            return Err(Error::InvalidConfig(format!(
                "phi_k has {} entries for {} users",
                self.phi_k.len(),
                self.k_users
            )));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_config()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ConfigFile::from(self)).expect("config file form is serializable")
    }
}

/// Flat file form of [`SystemConfig`] (angles in degrees).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub n_t: usize,
    pub k_users: usize,
    pub n_r: usize,
    pub b_bits: u32,
    pub p_total: f64,
    pub noise_power: f64,
    pub wavelength: f64,
    pub d_b: f64,
    pub d_r1: f64,
    pub d_r2: f64,
    pub theta_b: f64,
    pub theta_r: f64,
    pub d_00: f64,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nlos_exponent: Option<f64>,
    pub kappa: f64,
    pub rician_on: bool,
    pub wave_number: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub user_positions: Option<Vec<[f64; 3]>>,
    pub user_height: f64,
    pub placement_radius: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_k: Option<Vec<[f64; 2]>>,
}

impl Default for ConfigFile {
    fn default() -> Self {
        let mut f = ConfigFile::from(&SystemConfig::reference());
        f.user_positions = None;
        f.phi_k = None;
        f
    }
}

impl From<&SystemConfig> for ConfigFile {
    fn from(c: &SystemConfig) -> Self {
        Self {
            n_t: c.n_t,
            k_users: c.k_users,
            n_r: c.n_r,
            b_bits: c.b_bits,
            p_total: c.p_total,
            noise_power: c.noise_power,
            wavelength: c.wavelength,
            d_b: c.d_b,
            d_r1: c.d_r1,
            d_r2: c.d_r2,
            theta_b: tidy_degrees(c.theta_b),
            theta_r: tidy_degrees(c.theta_r),
            d_00: c.d_00,
            alpha: c.alpha,
            nlos_exponent: c.nlos_exponent,
            kappa: c.kappa,
            rician_on: c.rician_on,
            wave_number: c.wave_number,
            user_positions: Some(c.user_positions.clone()),
            user_height: c.user_height,
            placement_radius: c.placement_radius,
            seed: c.seed,
            phi_k: Some(c.phi_k.iter().map(|z| [z.re, z.im]).collect()),
        }
    }
}

/// Degrees with radian round-off trimmed, so 15 deg is written as `15.0`.
fn tidy_degrees(rad: f64) -> f64 {
    (rad.to_degrees() * 1e9).round() / 1e9
}

impl ConfigFile {
    pub fn into_config(self) -> Result<SystemConfig> {
        let mut cfg = SystemConfig {
            n_t: self.n_t,
            k_users: self.k_users,
            n_r: self.n_r,
            b_bits: self.b_bits,
            p_total: self.p_total,
            noise_power: self.noise_power,
            wavelength: self.wavelength,
            d_b: self.d_b,
            d_r1: self.d_r1,
            d_r2: self.d_r2,
            theta_b: self.theta_b.to_radians(),
            theta_r: self.theta_r.to_radians(),
            d_00: self.d_00,
            alpha: self.alpha,
            nlos_exponent: self.nlos_exponent,
            kappa: self.kappa,
            rician_on: self.rician_on,
            wave_number: self.wave_number,
            user_positions: Vec::new(),
            user_height: self.user_height,
            placement_radius: self.placement_radius,
            seed: self.seed,
            phi_k: Vec::new(),
        };
        match self.user_positions {
            Some(pos) => cfg.user_positions = pos,
            None => {
                let frame = UserPlacement::for_config(&cfg);
                cfg.user_positions =
                    half_circle_user_placement(cfg.seed, cfg.k_users, cfg.placement_radius, &frame);
            }
        }
        cfg.phi_k = match self.phi_k {
            Some(v) => v
                .into_iter()
                .map(|[re, im]| Complex64::new(re, im))
                .collect(),
            None => vec![Complex64::new(1.0, 0.0); cfg.k_users],
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_is_valid() {
        let cfg = SystemConfig::reference();
        cfg.validate().unwrap();
        assert!((cfg.snr_db() - 2.0).abs() < 1e-12);
        assert!((cfg.wavelength - 0.050812281).abs() < 1e-9);
    }

    #[test]
    fn toml_round_trip_keeps_degrees_on_disk() {
        let cfg = SystemConfig::desk(2, 2, 2, 1, 9);
        let text = cfg.to_toml_string();
        assert!(text.contains("theta_b = 15"));
        let back = SystemConfig::from_toml_str(&text).unwrap();
        assert_eq!(back.user_positions, cfg.user_positions);
        assert!((back.theta_r - cfg.theta_r).abs() < 1e-12);
        assert_eq!(back.phi_k, cfg.phi_k);
    }

    #[test]
    fn partial_file_uses_defaults_and_places_users() {
        let cfg = SystemConfig::from_toml_str("k_users = 3\nn_t = 3\nseed = 4\n").unwrap();
        assert_eq!(cfg.user_positions.len(), 3);
        assert_eq!(cfg.n_r, 6);
    }

    #[test]
    fn rejects_invalid_values() {
        assert!(SystemConfig::from_toml_str("noise_power = 0.0").is_err());
        assert!(SystemConfig::from_toml_str("bogus_key = 1").is_err());
        assert!(
            SystemConfig::from_toml_str("k_users = 2\nuser_positions = [[1.0, 2.0, 0.0]]").is_err()
        );
        let mut cfg = SystemConfig::reference();
        cfg.kappa = -1.0;
        assert!(cfg.validate().is_err());
        cfg.kappa = 4.0;
        cfg.d_r2 = 0.0;
        assert!(cfg.validate().is_err());
    }
}
