//! Surface element response, channel synthesis, the transmission matrix
//! and per-user rates.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::geometry::GeometrySolution;

pub type CMatrix = DMatrix<Complex64>;

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Element response `(j + e^{j theta}) / 2`.
pub fn q_of_theta(theta: f64) -> Complex64 {
    (J + Complex64::from_polar(1.0, theta)) * 0.5
}

/// `(cos, sin)` of `m * pi / 2^(b-1)` for any integer `m`, exact on the
/// quadrant points.
pub fn phase_cos_sin(m: i64, b: u32) -> (f64, f64) {
    let steps = 1i64 << b;
    let m = m.rem_euclid(steps);
    if (4 * m) % steps == 0 {
        return match 4 * m / steps {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
    }
    let t = phase_angle(m, b);
    (t.cos(), t.sin())
}

pub fn phase_angle(m: i64, b: u32) -> f64 {
    m as f64 * PI / f64::from(1u32 << (b - 1))
}

/// Response of codebook entry `m`, built from exact trig.
pub fn q_of_index(m: u32, b: u32) -> Complex64 {
    let (c, s) = phase_cos_sin(i64::from(m), b);
    Complex64::new(c, 1.0 + s) * 0.5
}

/// Integer phase indices of the surface, row-major `[l1 * n_r + l2]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhaseIndexMatrix {
    pub n_r: usize,
    pub b_bits: u32,
    pub m: Vec<u32>,
}

impl PhaseIndexMatrix {
    pub fn new(n_r: usize, b_bits: u32, m: Vec<u32>) -> Result<Self> {
        if m.len() != n_r * n_r {
            return Err(Error::DimensionMismatch(format!(
                "{} phase indices for a {n_r}x{n_r} surface",
                m.len()
            )));
        }
        if let Some(bad) = m.iter().find(|&&v| v >= 1 << b_bits) {
            return Err(Error::InvalidConfig(format!(
                "phase index {bad} out of range for b = {b_bits}"
            )));
        }
        Ok(Self { n_r, b_bits, m })
    }

    pub fn uniform(n_r: usize, b_bits: u32, m: u32) -> Self {
        Self::new(n_r, b_bits, vec![m; n_r * n_r]).expect("index in range")
    }

    /// All elements near theta = pi/2 (largest |q|).
    pub fn max_amplitude(n_r: usize, b_bits: u32) -> Self {
        let m = (f64::from(1u32 << b_bits) / 4.0).round() as u32;
        Self::uniform(n_r, b_bits, m)
    }

    pub fn random(n_r: usize, b_bits: u32, rng: &mut impl Rng) -> Self {
        let m = (0..n_r * n_r)
            .map(|_| rng.random_range(0..1u32 << b_bits))
            .collect();
        Self { n_r, b_bits, m }
    }

    pub fn get(&self, l1: usize, l2: usize) -> u32 {
        self.m[l1 * self.n_r + l2]
    }

    pub fn theta(&self, e: usize) -> f64 {
        phase_angle(i64::from(self.m[e]), self.b_bits)
    }

    pub fn responses(&self) -> Vec<Complex64> {
        self.m.iter().map(|&m| q_of_index(m, self.b_bits)).collect()
    }

    pub fn n_elements(&self) -> usize {
        self.m.len()
    }
}

/// Per-element K x N_t channel matrices, indexed by element `l1 * n_r + l2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    pub k_users: usize,
    pub n_t: usize,
    pub n_r: usize,
    pub h_los: Vec<CMatrix>,
    pub h_total: Vec<CMatrix>,
    /// LoS amplitude `[D00 + d00^(k)]^-alpha` per user.
    pub pathloss_los: Vec<f64>,
    pub wave_number_beta: f64,
}

impl ChannelTensor {
    pub fn get(&self, k: usize, n: usize, l1: usize, l2: usize) -> (Complex64, Complex64) {
        let e = l1 * self.n_r + l2;
        (self.h_los[e][(k, n)], self.h_total[e][(k, n)])
    }

    pub fn n_elements(&self) -> usize {
        self.n_r * self.n_r
    }

    /// `H_p o Phi` for every element (row k scaled by `phi[k]`).
    pub fn element_matrices(&self, phi: &[Complex64]) -> Vec<CMatrix> {
        self.h_total
            .iter()
            .map(|h| {
                let mut m = h.clone();
                for (k, &ph) in phi.iter().enumerate() {
                    for z in m.row_mut(k).iter_mut() {
                        *z *= ph;
                    }
                }
                m
            })
            .collect()
    }

    /// Binary dump: magic `RISCHAN1`, then `K`, `N_t`, `n_r` as u64, `beta`,
    /// the K path losses, and finally `h_los` followed by `h_total` as
    /// (re, im) pairs in `[k][n][l1][l2]` row-major order. Little endian.
    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(b"RISCHAN1")?;
        for v in [self.k_users, self.n_t, self.n_r] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        w.write_all(&self.wave_number_beta.to_le_bytes())?;
        for v in &self.pathloss_los {
            w.write_all(&v.to_le_bytes())?;
        }
        for tensor in [&self.h_los, &self.h_total] {
            for k in 0..self.k_users {
                for n in 0..self.n_t {
                    for h in tensor.iter() {
                        w.write_all(&h[(k, n)].re.to_le_bytes())?;
                        w.write_all(&h[(k, n)].im.to_le_bytes())?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != b"RISCHAN1" {
            return Err(Error::Parse("not a channel dump".into()));
        }
        let mut word = [0u8; 8];
        let mut next = |r: &mut dyn Read| -> Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let k_users = u64::from_le_bytes(next(r)?) as usize;
        let n_t = u64::from_le_bytes(next(r)?) as usize;
        let n_r = u64::from_le_bytes(next(r)?) as usize;
        let wave_number_beta = f64::from_le_bytes(next(r)?);
        let pathloss_los = (0..k_users)
            .map(|_| next(r).map(f64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        let mut tensors = Vec::new();
        for _ in 0..2 {
            let mut t = vec![CMatrix::zeros(k_users, n_t); n_r * n_r];
            for k in 0..k_users {
                for n in 0..n_t {
                    for h in t.iter_mut() {
                        let re = f64::from_le_bytes(next(r)?);
                        let im = f64::from_le_bytes(next(r)?);
                        h[(k, n)] = Complex64::new(re, im);
                    }
                }
            }
            tensors.push(t);
        }
        let h_total = tensors.pop().expect("two tensors");
        let h_los = tensors.pop().expect("two tensors");
        Ok(Self {
            k_users,
            n_t,
            n_r,
            h_los,
            h_total,
            pathloss_los,
            wave_number_beta,
        })
    }

    /// CSV dump with columns `k,n,l1,l2,los_re,los_im,total_re,total_im`.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "k", "n", "l1", "l2", "los_re", "los_im", "total_re", "total_im",
        ])?;
        for k in 0..self.k_users {
            for n in 0..self.n_t {
                for l1 in 0..self.n_r {
                    for l2 in 0..self.n_r {
                        let (a, b) = self.get(k, n, l1, l2);
                        out.write_record(&[
                            k.to_string(),
                            n.to_string(),
                            l1.to_string(),
                            l2.to_string(),
                            format!("{:e}", a.re),
                            format!("{:e}", a.im),
                            format!("{:e}", b.re),
                            format!("{:e}", b.im),
                        ])?;
                    }
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Standard complex Gaussian draw, `E|z|^2 = 1`.
pub fn complex_normal(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws the Ricean channel; the NLoS draws come from `ChaCha8(seed)` in
/// `[k][n][element]` order.
pub fn synthesize_channel(cfg: &SystemConfig, geom: &GeometrySolution, seed: u64) -> ChannelTensor {
    let (k_users, n_t, n_r) = (cfg.k_users, cfg.n_t, cfg.n_r);
    let n_el = n_r * n_r;
    let beta = cfg.wave_number;
    let kwave = beta * 2.0 * PI / cfg.wavelength;
    let pathloss_los: Vec<f64> = (0..k_users)
        .map(|k| (cfg.d_00 + geom.d_ris_user[k][0]).powf(-cfg.alpha))
        .collect();

    let mut h_los = vec![CMatrix::zeros(k_users, n_t); n_el];
    let mut h_total = vec![CMatrix::zeros(k_users, n_t); n_el];
    let los_w = if cfg.rician_on {
        (cfg.kappa / (1.0 + cfg.kappa)).sqrt()
    } else {
        1.0
    };
    let nlos_w = (1.0 / (1.0 + cfg.kappa)).sqrt();
    let nlos_exp = cfg.nlos_exponent();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..k_users {
        for n in 0..n_t {
            for e in 0..n_el {
                let path = geom.d_bs_ris[n][e] + geom.d_ris_user[k][e];
                let los = Complex64::from_polar(pathloss_los[k], -kwave * path);
                h_los[e][(k, n)] = los;
                h_total[e][(k, n)] = if cfg.rician_on {
                    los * los_w + complex_normal(&mut rng) * (nlos_w * path.powf(-nlos_exp))
                } else {
                    los
                };
            }
        }
    }
    ChannelTensor {
        k_users,
        n_t,
        n_r,
        h_los,
        h_total,
        pathloss_los,
        wave_number_beta: beta,
    }
}

/// `F = sum_p q_p (H_p o Phi)` from precomputed element matrices.
pub fn assemble_f(elements: &[CMatrix], q: &[Complex64]) -> CMatrix {
    let (rows, cols) = elements[0].shape();
    let mut f = CMatrix::zeros(rows, cols);
    for (h, &qp) in elements.iter().zip(q) {
        if qp != Complex64::new(0.0, 0.0) {
            f.zip_apply(h, |a, b| *a += b * qp);
        }
    }
    f
}

pub fn assemble_f_for(
    channel: &ChannelTensor,
    phases: &PhaseIndexMatrix,
    phi: &[Complex64],
) -> CMatrix {
    assemble_f(&channel.element_matrices(phi), &phases.responses())
}

/// Per-user rates in bits/s/Hz for precoder `v_d` (N_t x K).
pub fn user_rates(f: &CMatrix, v_d: &CMatrix, noise_power: f64) -> Vec<f64> {
    let g = f * v_d;
    (0..g.nrows())
        .map(|k| {
            let signal = g[(k, k)].norm_sqr();
            let interference: f64 = (0..g.ncols())
                .filter(|&j| j != k)
                .map(|j| g[(k, j)].norm_sqr())
                .sum();
            (1.0 + signal / (interference + noise_power)).log2()
        })
        .collect()
}
