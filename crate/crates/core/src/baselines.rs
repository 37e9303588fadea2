//! Reference algorithms scored with the same digital step as the main
//! driver: simulated annealing, best-of-random phases and a continuous-phase
//! gradient ascent.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{
    assemble_f, q_of_index, q_of_theta, CMatrix, ChannelTensor, PhaseIndexMatrix,
};
use crate::config::SystemConfig;
use crate::digital::sum_rate_or_zero;
use crate::error::{Error, Result};

/// Scores surface configurations on one channel realization.
#[derive(Debug, Clone)]
pub struct RateEvaluator {
    elements: Vec<CMatrix>,
    p_total: f64,
    noise_power: f64,
}

impl RateEvaluator {
    pub fn new(cfg: &SystemConfig, channel: &ChannelTensor) -> Self {
        Self {
            elements: channel.element_matrices(&cfg.phi_k),
            p_total: cfg.p_total,
            noise_power: cfg.noise_power,
        }
    }

    pub fn from_elements(elements: Vec<CMatrix>, p_total: f64, noise_power: f64) -> Self {
        Self {
            elements,
            p_total,
            noise_power,
        }
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn rate_of_f(&self, f: &CMatrix) -> f64 {
        sum_rate_or_zero(f, self.p_total, self.noise_power)
    }

    pub fn rate(&self, phases: &PhaseIndexMatrix) -> f64 {
        self.rate_of_f(&assemble_f(&self.elements, &phases.responses()))
    }

    pub fn rate_theta(&self, theta: &[f64]) -> f64 {
        let q: Vec<Complex64> = theta.iter().map(|&t| q_of_theta(t)).collect();
        self.rate_of_f(&assemble_f(&self.elements, &q))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub phases: PhaseIndexMatrix,
    pub sum_rate: f64,
    /// Configurations scored.
    pub evaluations: usize,
}

/// Geometric cooling from `t0` (bits/s/Hz), stopping after `cap` scored
/// configurations including the initial one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    pub t0: f64,
    pub cooling: f64,
    pub cap: usize,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            t0: 1.0,
            cooling: 0.999,
            cap: 100_000,
        }
    }
}

impl AnnealSchedule {
    /// The full-length schedule with 10^7 evaluations.
    pub fn paper() -> Self {
        Self {
            cap: 10_000_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cap == 0 {
            return Err(Error::InvalidConfig(
                "annealing cap must be at least 1".into(),
            ));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "cooling factor {} not in (0, 1)",
                self.cooling
            )));
        }
        if !(self.t0 >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "initial temperature {} is negative",
                self.t0
            )));
        }
        Ok(())
    }
}

/// Metropolis search over single-element phase changes; returns the best
/// configuration seen. With `t0 = 0` only non-worsening moves are taken.
pub fn simulated_annealing(
    eval: &RateEvaluator,
    init: &PhaseIndexMatrix,
    schedule: &AnnealSchedule,
    rng: &mut impl Rng,
) -> Result<BaselineResult> {
    schedule.validate()?;
    let b = init.b_bits;
    let levels = 1u32 << b;
    let mut current = init.clone();
    let mut f = assemble_f(&eval.elements, &current.responses());
    let mut rate = eval.rate_of_f(&f);
    let mut best = BaselineResult {
        phases: current.clone(),
        sum_rate: rate,
        evaluations: 1,
    };
    let mut temp = schedule.t0;

    for _ in 1..schedule.cap {
        let e = rng.random_range(0..current.n_elements());
        let old = current.m[e];
        let new = (old + rng.random_range(1..levels)) % levels;
        let dq = q_of_index(new, b) - q_of_index(old, b);
        let mut cand = f.clone();
        cand.zip_apply(&eval.elements[e], |a, h| *a += h * dq);
        let cand_rate = eval.rate_of_f(&cand);
        best.evaluations += 1;
        let delta = cand_rate - rate;
        let accept = delta >= 0.0 || (temp > 0.0 && rng.random::<f64>() < (delta / temp).exp());
        if accept {
            current.m[e] = new;
            f = cand;
            rate = cand_rate;
            if rate > best.sum_rate {
                best.sum_rate = rate;
                best.phases = current.clone();
            }
        }
        temp *= schedule.cooling;
    }
    Ok(best)
}

/// Best of `draws` uniformly drawn configurations.
pub fn random_phase_baseline(
    eval: &RateEvaluator,
    n_r: usize,
    b_bits: u32,
    draws: usize,
    rng: &mut impl Rng,
) -> Result<BaselineResult> {
    if draws == 0 {
        return Err(Error::InvalidConfig(
            "random baseline needs at least one draw".into(),
        ));
    }
    let mut best: Option<BaselineResult> = None;
    for _ in 0..draws {
        let phases = PhaseIndexMatrix::random(n_r, b_bits, rng);
        let rate = eval.rate(&phases);
        if best.as_ref().is_none_or(|b| rate > b.sum_rate) {
            best = Some(BaselineResult {
                phases,
                sum_rate: rate,
                evaluations: 0,
            });
        }
    }
    let mut best = best.expect("at least one draw");
    best.evaluations = draws;
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// `(f(x+h) - f(x-h)) / 2h`.
    Central,
    /// `(-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h`.
    FivePoint,
}

/// Finite-difference gradient of `f` at `x`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64, stencil: Stencil) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut at = |i: usize, d: f64| {
        probe[i] = x[i] + d;
        let v = f(&probe);
        probe[i] = x[i];
        v
    };
    (0..x.len())
        .map(|i| match stencil {
            Stencil::Central => (at(i, h) - at(i, -h)) / (2.0 * h),
            Stencil::FivePoint => {
                (-at(i, 2.0 * h) + 8.0 * at(i, h) - 8.0 * at(i, -h) + at(i, -2.0 * h)) / (12.0 * h)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousOptions {
    /// Initial step length in radians along the normalized gradient.
    pub step: f64,
    pub iters: usize,
    /// Finite-difference spacing in radians.
    pub h: f64,
    /// Step halvings tried before giving up on an iteration.
    pub backtracks: usize,
}

impl Default for ContinuousOptions {
    fn default() -> Self {
        Self {
            step: 0.5,
            iters: 200,
            h: 1e-5,
            backtracks: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousResult {
    pub theta: Vec<f64>,
    pub sum_rate: f64,
    pub iterations: usize,
}

fn wrap(t: f64) -> f64 {
    t.rem_euclid(std::f64::consts::TAU)
}

/// Gradient ascent on the sum rate over `theta in [0, 2pi)^N`, wrapping
/// after each step. The step starts at `opts.step` along the normalized
/// gradient and is halved until the rate improves.
pub fn continuous_relaxation(
    eval: &RateEvaluator,
    init: &[f64],
    opts: &ContinuousOptions,
) -> Result<ContinuousResult> {
    if !(opts.step > 0.0) || !(opts.h > 0.0) {
        return Err(Error::InvalidConfig(
            "continuous relaxation needs positive step and h".into(),
        ));
    }
    if init.len() != eval.n_elements() {
        return Err(Error::DimensionMismatch(format!(
            "{} angles for {} elements",
            init.len(),
            eval.n_elements()
        )));
    }
    let mut theta: Vec<f64> = init.iter().map(|&t| wrap(t)).collect();
    let mut rate = eval.rate_theta(&theta);
    let mut step = opts.step;
    let mut iterations = 0;
    for _ in 0..opts.iters {
        let g = fd_gradient(|t| eval.rate_theta(t), &theta, opts.h, Stencil::Central);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            break;
        }
        let mut improved = false;
        for _ in 0..=opts.backtracks {
            let trial: Vec<f64> = theta
                .iter()
                .zip(&g)
                .map(|(t, d)| wrap(t + step * d / norm))
                .collect();
            let trial_rate = eval.rate_theta(&trial);
            if trial_rate > rate {
                theta = trial;
                rate = trial_rate;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        if !improved {
            break;
        }
        step = (step * 2.0).min(opts.step);
    }
    Ok(ContinuousResult {
        theta,
        sum_rate: rate,
        iterations,
    })
}
