//! Line-of-sight design rules: the surface size at which the links from
//! different BS antennas to a user become orthogonal, the matching antenna
//! spacing, and a check of when the surface can emulate fully digital
//! beamforming.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::{CMatrix, PhaseIndexMatrix};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::geometry::{DistanceMode, GeometrySolution};

/// Residual below which a least-squares solve counts as exact.
pub const ACHIEVABLE_TOL: f64 = 1e-8;

fn orientation(cfg: &SystemConfig) -> Result<f64> {
    let c = cfg.theta_r.cos() * cfg.theta_b.cos();
    if c.abs() < 1e-12 {
        return Err(Error::DegenerateOrientation);
    }
    Ok(c)
}

/// `lambda * D00 / (d_R1 * d_B * cos(theta_R) * cos(theta_B))`.
pub fn threshold_size(cfg: &SystemConfig) -> Result<f64> {
    Ok(cfg.wavelength * cfg.d_00 / (cfg.d_r1 * cfg.d_b * orientation(cfg)?))
}

/// Antenna spacing that makes `n_r` the threshold size.
pub fn required_d_b(cfg: &SystemConfig, n_r: usize) -> Result<f64> {
    Ok(cfg.wavelength * cfg.d_00 / (n_r as f64 * cfg.d_r1 * orientation(cfg)?))
}

/// Per-row sums of `1 + sin(theta)`.
pub fn row_balance(phases: &PhaseIndexMatrix) -> Vec<f64> {
    (0..phases.n_r)
        .map(|l1| {
            (0..phases.n_r)
                .map(|l2| 1.0 + phases.theta(l1 * phases.n_r + l2).sin())
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LosDesignRule {
    /// `d_R1 * d_B` needed for orthogonality at the configured size.
    pub required_product: f64,
    pub actual_product: f64,
    pub threshold: f64,
    pub required_d_b: f64,
    /// Row sums of `1 + sin(theta)`; orthogonality needs them all equal.
    pub row_sums: Vec<f64>,
}

impl LosDesignRule {
    pub fn evaluate(cfg: &SystemConfig, phases: &PhaseIndexMatrix) -> Result<Self> {
        let c = orientation(cfg)?;
        Ok(Self {
            required_product: cfg.wavelength * cfg.d_00 / (cfg.n_r as f64 * c),
            actual_product: cfg.d_r1 * cfg.d_b,
            threshold: threshold_size(cfg)?,
            required_d_b: required_d_b(cfg, cfg.n_r)?,
            row_sums: row_balance(phases),
        })
    }

    /// Largest spread between row sums.
    pub fn row_imbalance(&self) -> f64 {
        let max = self
            .row_sums
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let min = self.row_sums.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }
}

/// Pure line-of-sight link vector from antenna `n` to user `k` across all
/// elements.
pub fn link_vector(
    cfg: &SystemConfig,
    geom: &GeometrySolution,
    phases: &PhaseIndexMatrix,
    n: usize,
    k: usize,
) -> Vec<Complex64> {
    let beta = std::f64::consts::TAU / cfg.wavelength;
    phases
        .responses()
        .iter()
        .enumerate()
        .map(|(e, q)| {
            q * Complex64::from_polar(1.0, -beta * (geom.d_bs_ris[n][e] + geom.d_ris_user[k][e]))
        })
        .collect()
}

/// Largest normalized inner product `|f_a^H f_b| / (|f_a| |f_b|)` between
/// links from different antennas to the same user. 0 means orthogonal.
pub fn orthogonality_residual(
    cfg: &SystemConfig,
    geom: &GeometrySolution,
    phases: &PhaseIndexMatrix,
) -> Result<f64> {
    if geom.mode != DistanceMode::Paraxial {
        return Err(Error::InvalidConfig(
            "orthogonality analysis needs paraxial geometry".into(),
        ));
    }
    if phases.n_r != geom.n_r {
        return Err(Error::DimensionMismatch(format!(
            "phases for n_r = {}, geometry for {}",
            phases.n_r, geom.n_r
        )));
    }
    let n_t = geom.d_bs_ris.len();
    let mut worst: f64 = 0.0;
    for k in 0..geom.d_ris_user.len() {
        let links: Vec<Vec<Complex64>> = (0..n_t)
            .map(|n| link_vector(cfg, geom, phases, n, k))
            .collect();
        let norms: Vec<f64> = links
            .iter()
            .map(|f| f.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
            .collect();
        for a in 0..n_t {
            for b in a + 1..n_t {
                if norms[a] == 0.0 || norms[b] == 0.0 {
                    continue;
                }
                let dot: Complex64 = links[a]
                    .iter()
                    .zip(&links[b])
                    .map(|(x, y)| x.conj() * y)
                    .sum();
                worst = worst.max(dot.norm() / (norms[a] * norms[b]));
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct Achievability {
    pub achievable: bool,
    /// `n_elements >= K * N_t`.
    pub size_condition: bool,
    /// `||A q - t|| / ||t||` of the least-squares solve.
    pub residual: f64,
    /// Unconstrained element responses solving the system.
    pub q: Vec<Complex64>,
}

/// Whether some free-valued element responses `q` make `F` (with a diagonal
/// digital precoder) reproduce the fully digital product `H_FD V_FD`.
///
/// `elements` are the per-element K x N_t matrices so that
/// `F = sum_e q_e elements[e]`. Responses are not restricted to the codebook.
pub fn fully_digital_achievability(
    elements: &[CMatrix],
    h_fd: &CMatrix,
    v_fd: &CMatrix,
) -> Result<Achievability> {
    let n_el = elements.len();
    let (k, n_t) = elements
        .first()
        .map(|e| e.shape())
        .ok_or_else(|| Error::DimensionMismatch("no surface elements".into()))?;
    if h_fd.nrows() != k || h_fd.ncols() != n_el || v_fd.nrows() != n_el || v_fd.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "H_FD is {}x{}, V_FD is {}x{}; expected {k}x{n_el} and {n_el}x{k}",
            h_fd.nrows(),
            h_fd.ncols(),
            v_fd.nrows(),
            v_fd.ncols()
        )));
    }
    let size_condition = n_el >= k * n_t;
    if n_t < k {
        return Ok(Achievability {
            achievable: false,
            size_condition,
            residual: f64::INFINITY,
            q: Vec::new(),
        });
    }
    // Diagonal V_D with unit gains on the first K antennas; the remaining
    // columns of F are unconstrained.
    let target = h_fd * v_fd;
    let mut a = CMatrix::zeros(k * k, n_el);
    let mut t = DVector::<Complex64>::zeros(k * k);
    for m in 0..k {
        for c in 0..k {
            let row = m * k + c;
            t[row] = target[(m, c)];
            for (e, el) in elements.iter().enumerate() {
                a[(row, e)] = el[(m, c)];
            }
        }
    }
    let svd = a.clone().svd(true, true);
    let q = svd
        .solve(&t, 1e-12 * svd.singular_values.max())
        .expect("u and v^T were computed");
    let tnorm = t.norm();
    let residual = if tnorm > 0.0 {
        (&a * &q - &t).norm() / tnorm
    } else {
        (&a * &q).norm()
    };
    Ok(Achievability {
        achievable: size_condition && residual < ACHIEVABLE_TOL,
        size_condition,
        residual,
        q: q.iter().copied().collect(),
    })
}
