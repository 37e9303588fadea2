//! Sum-rate maximization by alternating the digital and analog steps.
//!
//! Starting from given phases, the driver runs ZF with water-filling, freezes
//! the resulting powers, reconfigures the surface for them, and repeats until
//! the sum rate gains less than `epsilon` per round.

use std::io::Write;
use std::time::Instant;

use crate::analog::{
    algorithm2, direct_gram, epigraph_value, floored_powers, trace_inverse, AnalogOptions,
};
use crate::channel::{assemble_f, ChannelTensor, PhaseIndexMatrix};
use crate::config::SystemConfig;
use crate::digital::{algorithm1, ZfSolution};
use crate::error::{Error, Result};
use ris_milp::MilpStatus;

/// Slack allowed when comparing consecutive sum rates.
pub const MONOTONE_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SrmOptions {
    /// Stop once a round gains at most this much (bit/s/Hz).
    pub epsilon: f64,
    /// Cap on analog steps.
    pub max_iter: usize,
    pub analog: AnalogOptions,
}

impl Default for SrmOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            max_iter: 20,
            analog: AnalogOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// The analog step produced a configuration ZF cannot serve; the last
    /// feasible iterate is kept.
    RankDeficient,
}

#[derive(Debug, Clone)]
pub struct SrmRecord {
    pub t: usize,
    pub sum_rate: f64,
    pub phases: PhaseIndexMatrix,
    pub powers: Vec<f64>,
    /// Epigraph value `K * lambda_max(G^-1)` of the phases under the powers
    /// they were optimized for.
    pub w: f64,
    pub trace_objective: f64,
    pub cuts: usize,
    pub nodes: usize,
    pub seconds: f64,
    /// Whether the analog proposal replaced the previous phases.
    pub accepted: bool,
    pub milp_status: Option<MilpStatus>,
}

#[derive(Debug, Clone)]
pub struct SrmTrace {
    pub records: Vec<SrmRecord>,
    pub epsilon: f64,
    pub max_iter: usize,
    pub stop: StopReason,
    pub phases: PhaseIndexMatrix,
    pub digital: ZfSolution,
}

impl SrmTrace {
    pub fn sum_rate(&self) -> f64 {
        self.digital.sum_rate
    }

    pub fn rates(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.sum_rate).collect()
    }

    /// Analog steps taken.
    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }

    pub fn is_monotone(&self, tol: f64) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].sum_rate >= w[0].sum_rate - tol)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "R", "w", "trace_objective", "cuts", "nodes", "seconds"])?;
        for r in &self.records {
            out.write_record([
                r.t.to_string(),
                r.sum_rate.to_string(),
                r.w.to_string(),
                r.trace_objective.to_string(),
                r.cuts.to_string(),
                r.nodes.to_string(),
                r.seconds.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Alternates [`algorithm1`] and [`algorithm2`] from `init`.
///
/// A proposal that would lower the sum rate is rejected, which ends the run
/// since the rate then stops moving. `epsilon = inf` yields exactly one
/// digital step.
pub fn run_srm(
    cfg: &SystemConfig,
    channel: &ChannelTensor,
    init: &PhaseIndexMatrix,
    opts: &SrmOptions,
) -> Result<SrmTrace> {
    if init.n_r != channel.n_r {
        return Err(Error::DimensionMismatch(format!(
            "phases are {0}x{0}, channel is {1}x{1}",
            init.n_r, channel.n_r
        )));
    }
    let start = Instant::now();
    let elements = channel.element_matrices(&cfg.phi_k);
    let score = |phases: &PhaseIndexMatrix| -> Result<ZfSolution> {
        let f = assemble_f(&elements, &phases.responses());
        algorithm1(&f, cfg.p_total, cfg.noise_power)
    };
    let measures = |phases: &PhaseIndexMatrix, powers: &[f64]| -> (f64, f64) {
        let g = direct_gram(
            &elements,
            &floored_powers(powers, opts.analog.power_floor),
            phases,
        );
        (
            epigraph_value(&g).unwrap_or(f64::INFINITY),
            trace_inverse(&g).unwrap_or(f64::INFINITY),
        )
    };

    let mut phases = init.clone();
    let mut digital = score(&phases)?;
    let (w0, tr0) = measures(&phases, &digital.p);
    let mut records = vec![SrmRecord {
        t: 0,
        sum_rate: digital.sum_rate,
        phases: phases.clone(),
        powers: digital.p.clone(),
        w: w0,
        trace_objective: tr0,
        cuts: 0,
        nodes: 0,
        seconds: start.elapsed().as_secs_f64(),
        accepted: true,
        milp_status: None,
    }];
    let mut prev = f64::NEG_INFINITY;
    let mut stop = StopReason::MaxIterations;

    for t in 1..=opts.max_iter {
        if digital.sum_rate - prev <= opts.epsilon {
            stop = StopReason::Converged;
            break;
        }
        prev = digital.sum_rate;
        let outcome = algorithm2(&elements, &digital.p, &phases, &opts.analog)?;
        let candidate = match score(&outcome.phases) {
            Ok(s) => s,
            Err(Error::RankDeficient { .. }) => {
                stop = StopReason::RankDeficient;
                break;
            }
            Err(e) => return Err(e),
        };
        let accepted = candidate.sum_rate >= digital.sum_rate;
        log::debug!(
            "srm t={t} R={:.6} candidate={:.6} accepted={accepted} nodes={}",
            digital.sum_rate,
            candidate.sum_rate,
            outcome.nodes
        );
        if accepted {
            phases = outcome.phases;
            digital = candidate;
        }
        records.push(SrmRecord {
            t,
            sum_rate: digital.sum_rate,
            phases: phases.clone(),
            powers: digital.p.clone(),
            w: outcome.epigraph,
            trace_objective: outcome.trace_objective,
            cuts: outcome.cuts,
            nodes: outcome.nodes,
            seconds: start.elapsed().as_secs_f64(),
            accepted,
            milp_status: Some(outcome.status),
        });
    }

    Ok(SrmTrace {
        records,
        epsilon: opts.epsilon,
        max_iter: opts.max_iter,
        stop,
        phases,
        digital,
    })
}
