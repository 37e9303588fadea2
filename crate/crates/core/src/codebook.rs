//! One-hot phase encodings and the affine form of the effective Gram matrix.
//!
//! A phase index `m` in `0..2^b` is encoded as a one-hot vector over the
//! `L = 2^(b+1) - 1` signed angles `i * pi / 2^(b-1)`, `i = -(2^b - 1)..=2^b - 1`;
//! the negative half is masked out. Phase differences use the same grid
//! without the mask. With these, `cos`, `sin` of every phase and every phase
//! difference are linear in the binaries, and so is
//! `G = P^-1/2 F F^H P^-1/2`.

use num_complex::Complex64;

use crate::channel::{phase_angle, phase_cos_sin, CMatrix, PhaseIndexMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CodebookVectors {
    pub b_bits: u32,
    pub a: Vec<f64>,
    pub c: Vec<f64>,
    pub s: Vec<f64>,
    pub e_mask: Vec<f64>,
}

impl CodebookVectors {
    pub fn new(b_bits: u32) -> Self {
        let half = (1i64 << b_bits) - 1;
        let mut cb = Self {
            b_bits,
            a: Vec::new(),
            c: Vec::new(),
            s: Vec::new(),
            e_mask: Vec::new(),
        };
        for m in -half..=half {
            let (c, s) = phase_cos_sin(m, b_bits);
            cb.a.push(phase_angle(m, b_bits));
            cb.c.push(c);
            cb.s.push(s);
            cb.e_mask.push(if m < 0 { 1.0 } else { 0.0 });
        }
        cb
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Offset of angle 0 in the vectors.
    pub fn zero_slot(&self) -> usize {
        (1 << self.b_bits) - 1
    }

    /// Slot of signed multiple `m` of the step `pi / 2^(b-1)`.
    pub fn slot(&self, m: i64) -> usize {
        (m + self.zero_slot() as i64) as usize
    }

    pub fn slot_multiple(&self, slot: usize) -> i64 {
        slot as i64 - self.zero_slot() as i64
    }

    pub fn encode_index(&self, m: u32) -> Result<OneHotPhase> {
        if m >= 1 << self.b_bits {
            return Err(Error::NotInCodebook(phase_angle(i64::from(m), self.b_bits)));
        }
        let mut x = vec![0.0; self.len()];
        x[self.slot(i64::from(m))] = 1.0;
        Ok(OneHotPhase { x })
    }

    pub fn encode(&self, theta: f64) -> Result<OneHotPhase> {
        let step = phase_angle(1, self.b_bits);
        let m = (theta / step).round();
        if !(0.0..f64::from(1u32 << self.b_bits)).contains(&m) || (theta - m * step).abs() > 1e-9 {
            return Err(Error::NotInCodebook(theta));
        }
        self.encode_index(m as u32)
    }

    fn check_one_hot(&self, v: &[f64]) -> Result<usize> {
        if v.len() != self.len() {
            return Err(Error::InvalidOneHot(format!(
                "length {} for L = {}",
                v.len(),
                self.len()
            )));
        }
        let mut hot = None;
        for (i, &val) in v.iter().enumerate() {
            if val == 1.0 {
                if hot.is_some() {
                    return Err(Error::InvalidOneHot("more than one entry set".into()));
                }
                hot = Some(i);
            } else if val != 0.0 {
                return Err(Error::InvalidOneHot(format!(
                    "entry {i} = {val} is not binary"
                )));
            }
        }
        hot.ok_or_else(|| Error::InvalidOneHot("no entry set".into()))
    }

    pub fn decode_index(&self, x: &OneHotPhase) -> Result<u32> {
        let i = self.check_one_hot(&x.x)?;
        if self.e_mask[i] != 0.0 {
            return Err(Error::InvalidOneHot(
                "masked (negative) angle selected".into(),
            ));
        }
        Ok(self.slot_multiple(i) as u32)
    }

    pub fn decode(&self, x: &OneHotPhase) -> Result<f64> {
        Ok(self.a[self.slot(i64::from(self.decode_index(x)?))])
    }

    /// Difference encoding for `theta_m - theta_m2`.
    pub fn pair(&self, m: u32, m2: u32) -> PairOneHot {
        let mut y = vec![0.0; self.len()];
        y[self.slot(i64::from(m) - i64::from(m2))] = 1.0;
        PairOneHot { y }
    }

    pub fn dot(u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// Checks `a.(x - x') = a.y` and that `y` is one-hot.
    pub fn check_pair(&self, x: &OneHotPhase, x2: &OneHotPhase, y: &PairOneHot) -> Result<()> {
        self.check_one_hot(&y.y)?;
        let lhs = Self::dot(&self.a, &x.x) - Self::dot(&self.a, &x2.x);
        let rhs = Self::dot(&self.a, &y.y);
        if (lhs - rhs).abs() > 1e-9 {
            return Err(Error::InconsistentPair { lhs, rhs });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneHotPhase {
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairOneHot {
    pub y: Vec<f64>,
}

/// Index of the pair `(p, p2)`, `p < p2`, in lexicographic order.
pub fn pair_index(p: usize, p2: usize, n: usize) -> usize {
    debug_assert!(p < p2 && p2 < n);
    p * (2 * n - p - 1) / 2 + (p2 - p - 1)
}

/// `A_{p,p'} = P^-1/2 (H_p o Phi)(H_p' o Phi)^H P^-1/2` for `p <= p'`.
#[derive(Debug, Clone)]
pub struct PairGrams {
    pub n_elements: usize,
    pub k_users: usize,
    /// `A_{p,p}`, Hermitian.
    pub diag: Vec<CMatrix>,
    /// `A_{p,p'}` for `p < p'` in [`pair_index`] order.
    pub cross: Vec<CMatrix>,
}

/// `P^-1/2 H` for each element matrix.
pub fn whiten(elements: &[CMatrix], powers: &[f64]) -> Vec<CMatrix> {
    elements
        .iter()
        .map(|h| {
            let mut m = h.clone();
            for (k, &p) in powers.iter().enumerate() {
                let w = 1.0 / p.sqrt();
                for z in m.row_mut(k).iter_mut() {
                    *z *= w;
                }
            }
            m
        })
        .collect()
}

impl PairGrams {
    /// Grams from whitened element matrices `P^-1/2 (H_p o Phi)`.
    pub fn from_whitened(ht: &[CMatrix]) -> Self {
        let n = ht.len();
        let k_users = ht[0].nrows();
        let diag = crate::par::map_indices(n, |p| &ht[p] * ht[p].adjoint());
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|p| (p + 1..n).map(move |p2| (p, p2)))
            .collect();
        let cross = crate::par::map_indices(pairs.len(), |i| {
            let (p, p2) = pairs[i];
            &ht[p] * ht[p2].adjoint()
        });
        Self {
            n_elements: n,
            k_users,
            diag,
            cross,
        }
    }

    pub fn get(&self, p: usize, p2: usize) -> CMatrix {
        use std::cmp::Ordering::*;
        match p.cmp(&p2) {
            Equal => self.diag[p].clone(),
            Less => self.cross[pair_index(p, p2, self.n_elements)].clone(),
            Greater => self.cross[pair_index(p2, p, self.n_elements)].adjoint(),
        }
    }
}

/// Per-pair factor `(j + e^{j t})(-j + e^{-j t'})` written through
/// `sin t`, `sin t'`, `cos t`, `cos t'`, `cos(t - t')`, `sin(t - t')`.
pub fn pair_factor(
    sin_t: f64,
    sin_t2: f64,
    cos_t: f64,
    cos_t2: f64,
    cos_d: f64,
    sin_d: f64,
) -> Complex64 {
    Complex64::new(1.0 + sin_t + sin_t2 + cos_d, sin_d + cos_t2 - cos_t)
}

/// `G` from the one-hot variables; pair blocks in [`pair_index`] order.
pub fn gram_affine_expansion(
    grams: &PairGrams,
    cb: &CodebookVectors,
    xs: &[OneHotPhase],
    ys: &[PairOneHot],
) -> Result<CMatrix> {
    let n = grams.n_elements;
    if xs.len() != n || ys.len() != n * (n - 1) / 2 {
        return Err(Error::DimensionMismatch(format!(
            "{} phase blocks and {} pair blocks for {n} elements",
            xs.len(),
            ys.len()
        )));
    }
    let cos: Vec<f64> = xs
        .iter()
        .map(|x| CodebookVectors::dot(&x.x, &cb.c))
        .collect();
    let sin: Vec<f64> = xs
        .iter()
        .map(|x| CodebookVectors::dot(&x.x, &cb.s))
        .collect();
    let mut g = CMatrix::zeros(grams.k_users, grams.k_users);
    for p in 0..n {
        g += &grams.diag[p] * Complex64::new((2.0 + 2.0 * sin[p]) / 4.0, 0.0);
    }
    for p in 0..n {
        for p2 in p + 1..n {
            let idx = pair_index(p, p2, n);
            cb.check_pair(&xs[p], &xs[p2], &ys[idx])?;
            let y = &ys[idx].y;
            let f = pair_factor(
                sin[p],
                sin[p2],
                cos[p],
                cos[p2],
                CodebookVectors::dot(y, &cb.c),
                CodebookVectors::dot(y, &cb.s),
            ) / 4.0;
            let m = &grams.cross[idx] * f;
            g += &m + m.adjoint();
        }
    }
    Ok(g)
}

/// One-hot blocks for a configuration.
pub fn encode_configuration(
    cb: &CodebookVectors,
    phases: &PhaseIndexMatrix,
) -> (Vec<OneHotPhase>, Vec<PairOneHot>) {
    let xs = phases
        .m
        .iter()
        .map(|&m| cb.encode_index(m).expect("index in range"))
        .collect();
    let n = phases.m.len();
    let mut ys = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for p in 0..n {
        for p2 in p + 1..n {
            ys.push(cb.pair(phases.m[p], phases.m[p2]));
        }
    }
    (xs, ys)
}
