//! Zero-forcing precoder with water-filling power allocation.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::CMatrix;
use crate::error::{Error, Result};

/// Relative singular-value threshold below which F is treated as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ZfSolution {
    /// N_t x K, `F^H (F F^H)^-1`.
    pub v_tilde: CMatrix,
    pub nu: Vec<f64>,
    pub p: Vec<f64>,
    pub mu: f64,
    /// `v_tilde * diag(sqrt(p))`.
    pub v_d: CMatrix,
    pub sum_rate: f64,
}

/// Returns `(v_tilde, nu)` with `F v_tilde = I` and `nu_k = ||v_tilde[:, k]||^2`.
pub fn zf_precoder(f: &CMatrix) -> Result<(CMatrix, Vec<f64>)> {
    let (k, n_t) = f.shape();
    if k == 0 || n_t == 0 {
        return Err(Error::DimensionMismatch("empty transmission matrix".into()));
    }
    if !f.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::RankDeficient {
            sigma_min: f64::NAN,
        });
    }
    let sv = f.clone().svd(false, false).singular_values;
    let s_max = sv.max();
    let s_min = if k > n_t { 0.0 } else { sv.min() };
    if !(s_max > 0.0) || s_min <= RANK_TOL * s_max {
        return Err(Error::RankDeficient { sigma_min: s_min });
    }
    // F^H = Q R  =>  F F^H = R^H R  and  F^H (F F^H)^-1 = Q R^-H.
    let qr = f.adjoint().qr();
    let (q, r) = (qr.q(), qr.r());
    let rh = r.adjoint();
    let x = rh
        .solve_lower_triangular(&CMatrix::identity(k, k))
        .ok_or(Error::RankDeficient { sigma_min: s_min })?;
    let v_tilde = q * x;
    let nu = (0..k).map(|j| v_tilde.column(j).norm_squared()).collect();
    Ok((v_tilde, nu))
}

/// Maximizes `sum log2(1 + p_k / sigma^2)` subject to `sum nu_k p_k <= P`.
/// Returns `(p, mu)` with `p_k = max(1/mu - nu_k sigma^2, 0) / nu_k`.
pub fn water_filling(nu: &[f64], p_total: f64, noise_power: f64) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..nu.len()).collect();
    order.sort_by(|&a, &b| nu[a].total_cmp(&nu[b]).then(a.cmp(&b)));
    let mut level = 0.0;
    let mut acc = 0.0;
    for (a, &i) in order.iter().enumerate() {
        acc += nu[i];
        let candidate = (p_total + noise_power * acc) / (a + 1) as f64;
        if candidate > nu[i] * noise_power {
            level = candidate;
        } else {
            break;
        }
    }
    let p = nu
        .iter()
        .map(|&v| ((level - v * noise_power).max(0.0)) / v)
        .collect();
    (p, 1.0 / level)
}

pub fn zf_sum_rate(p: &[f64], noise_power: f64) -> f64 {
    p.iter().map(|pk| (1.0 + pk / noise_power).log2()).sum()
}

/// ZF followed by water-filling.
pub fn algorithm1(f: &CMatrix, p_total: f64, noise_power: f64) -> Result<ZfSolution> {
    let (v_tilde, nu) = zf_precoder(f)?;
    let (p, mu) = water_filling(&nu, p_total, noise_power);
    let scale = DVector::from_iterator(p.len(), p.iter().map(|v| Complex64::new(v.sqrt(), 0.0)));
    let v_d = &v_tilde * CMatrix::from_diagonal(&scale);
    let sum_rate = zf_sum_rate(&p, noise_power);
    Ok(ZfSolution {
        v_tilde,
        nu,
        p,
        mu,
        v_d,
        sum_rate,
    })
}

/// Sum rate of the digital step, 0 when F cannot separate the users.
pub fn sum_rate_or_zero(f: &CMatrix, p_total: f64, noise_power: f64) -> f64 {
    algorithm1(f, p_total, noise_power).map_or(0.0, |s| s.sum_rate)
}
