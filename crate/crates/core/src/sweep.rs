//! Parameter sweeps: every `(value, trial)` cell gets its own seed, channel
//! and solver instances, runs the selected algorithms, and yields one row per
//! algorithm. Cells run in parallel and are merged in cell order.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    continuous_relaxation, random_phase_baseline, simulated_annealing, AnnealSchedule,
    ContinuousOptions, RateEvaluator,
};
use crate::channel::{synthesize_channel, PhaseIndexMatrix};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::geometry::{build_geometry, DistanceMode};
use crate::par;
use crate::srm::{run_srm, SrmOptions};

/// Largest SRM cells run without `allow_large`.
pub const DESK_MAX_N_R: usize = 4;
pub const DESK_MAX_B: u32 = 2;
pub const DESK_MAX_USERS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Snr,
    NR,
    B,
    /// Sets both the user count and the antenna count.
    KUsers,
    DB,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            Self::Snr => "snr",
            Self::NR => "n_r",
            Self::B => "b",
            Self::KUsers => "k_users",
            Self::DB => "d_b",
        }
    }

    /// Whether the value leaves the channel draw untouched, so cells with
    /// different values can share it.
    fn keeps_channel(self) -> bool {
        matches!(self, Self::Snr | Self::B)
    }

    pub fn apply(self, cfg: &mut SystemConfig, value: f64) -> Result<()> {
        let count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidConfig(format!(
                    "{} must be a positive integer, got {v}",
                    self.name()
                )))
            }
        };
        match self {
            Self::Snr => cfg.set_snr_db(value),
            Self::NR => cfg.n_r = count(value)?,
            Self::B => cfg.b_bits = count(value)? as u32,
            Self::KUsers => {
                cfg.k_users = count(value)?;
                cfg.n_t = cfg.k_users;
            }
            Self::DB => cfg.d_b = value,
        }
        Ok(())
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "snr" => Self::Snr,
            "n_r" | "nr" => Self::NR,
            "b" => Self::B,
            "k_users" | "k" => Self::KUsers,
            "d_b" | "db" => Self::DB,
            _ => return Err(Error::Parse(format!("unknown sweep parameter '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Srm,
    Sa,
    Random,
    Continuous,
    /// SRM on the pure line-of-sight channel with row-balance constraints.
    Los,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Self::Srm,
        Self::Sa,
        Self::Random,
        Self::Continuous,
        Self::Los,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Srm => "srm",
            Self::Sa => "sa",
            Self::Random => "random",
            Self::Continuous => "continuous",
            Self::Los => "los",
        }
    }

    fn uses_milp(self) -> bool {
        matches!(self, Self::Srm | Self::Los)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: SystemConfig,
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub trials: usize,
    pub seed_base: u64,
    /// Reuse one channel per trial across values when the parameter does not
    /// change the channel (SNR, b).
    pub common_channels: bool,
    /// Permit SRM cells above the desk-scale limits.
    pub allow_large: bool,
    /// Record wall-clock seconds; off gives byte-reproducible output.
    pub timing: bool,
    pub srm: SrmOptions,
    pub anneal: AnnealSchedule,
    pub random_draws: usize,
    pub continuous: ContinuousOptions,
}

impl SweepSpec {
    pub fn new(
        base: SystemConfig,
        param: SweepParam,
        values: Vec<f64>,
        algorithms: Vec<Algorithm>,
    ) -> Self {
        Self {
            base,
            param,
            values,
            algorithms,
            trials: 1,
            seed_base: 0,
            common_channels: false,
            allow_large: false,
            timing: true,
            srm: SrmOptions::default(),
            anneal: AnnealSchedule::default(),
            random_draws: 100,
            continuous: ContinuousOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidConfig(
                "sweep needs at least one value".into(),
            ));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidConfig(
                "sweep needs at least one algorithm".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig(
                "sweep needs at least one trial".into(),
            ));
        }
        self.anneal.validate()?;
        for &v in &self.values {
            self.param.apply(&mut self.base.clone(), v)?;
        }
        Ok(())
    }

    /// Channel seed of a cell.
    pub fn cell_seed(&self, value: f64, trial: usize) -> u64 {
        let v = if self.common_channels && self.param.keeps_channel() {
            0
        } else {
            value.to_bits()
        };
        splitmix64(self.seed_base ^ splitmix64(v ^ splitmix64(trial as u64)))
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub trial: usize,
    pub seed: u64,
    pub algorithm: String,
    pub sum_rate: Option<f64>,
    pub seconds: f64,
    pub iterations: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub value: f64,
    pub algorithm: String,
    pub n: usize,
    pub failures: usize,
    pub mean: f64,
    pub std: f64,
    /// Half-width of the normal 95% interval of the mean.
    pub ci95: f64,
}

impl SweepTable {
    pub fn all_succeeded(&self) -> bool {
        self.rows.iter().all(|r| r.error.is_none())
    }

    pub fn algorithms(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.algorithm) {
                out.push(r.algorithm.clone());
            }
        }
        out
    }

    pub fn values(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.value) {
                out.push(r.value);
            }
        }
        out
    }

    /// Rate of `algorithm` in the cell `(value, trial)`.
    pub fn rate(&self, value: f64, trial: usize, algorithm: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.value == value && r.trial == trial && r.algorithm == algorithm)
            .and_then(|r| r.sum_rate)
    }

    pub fn aggregate(&self) -> Vec<AggregateRow> {
        let mut out = Vec::new();
        for value in self.values() {
            for alg in self.algorithms() {
                let cell: Vec<&SweepRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.value == value && r.algorithm == alg)
                    .collect();
                if cell.is_empty() {
                    continue;
                }
                let rates: Vec<f64> = cell.iter().filter_map(|r| r.sum_rate).collect();
                let n = rates.len();
                let mean = if n > 0 {
                    rates.iter().sum::<f64>() / n as f64
                } else {
                    f64::NAN
                };
                let std = if n > 1 {
                    (rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                } else {
                    0.0
                };
                out.push(AggregateRow {
                    value,
                    algorithm: alg.clone(),
                    n,
                    failures: cell.len() - n,
                    mean,
                    std,
                    ci95: if n > 0 {
                        1.96 * std / (n as f64).sqrt()
                    } else {
                        f64::NAN
                    },
                });
            }
        }
        out
    }

    pub fn mean(&self, value: f64, algorithm: &str) -> Option<f64> {
        self.aggregate()
            .into_iter()
            .find(|a| a.value == value && a.algorithm == algorithm)
            .map(|a| a.mean)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(r: impl Read) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let rows = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<SweepRow>, _>>()?;
        Ok(Self { rows })
    }

    pub fn write_aggregate_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["value", "algorithm", "n", "failures", "mean", "std", "ci95"])?;
        for a in self.aggregate() {
            out.write_record([
                a.value.to_string(),
                a.algorithm,
                a.n.to_string(),
                a.failures.to_string(),
                a.mean.to_string(),
                a.std.to_string(),
                a.ci95.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Mean sum rate per algorithm against the swept value, with 95% bars.
    pub fn write_svg(&self, path: &Path, x_label: &str) -> Result<()> {
        use plotters::prelude::*;

        if self.rows.is_empty() {
            return Err(Error::InvalidConfig("nothing to plot".into()));
        }
        let agg: Vec<AggregateRow> = self.aggregate().into_iter().filter(|a| a.n > 0).collect();
        let values = self.values();
        let (x0, x1) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        let (y0, y1) = agg
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| {
                (a.min(r.mean - r.ci95), b.max(r.mean + r.ci95))
            });
        let pad_x = if x1 > x0 { 0.05 * (x1 - x0) } else { 1.0 };
        let (y0, y1) = if y0.is_finite() { (y0, y1) } else { (0.0, 1.0) };
        let pad_y = if y1 > y0 { 0.1 * (y1 - y0) } else { 1.0 };
        let plot_err = |e: &dyn fmt::Display| Error::Io(std::io::Error::other(e.to_string()));

        let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| plot_err(&e))?;
        let mut chart = ChartBuilder::on(&root)
            .margin(20)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d((x0 - pad_x)..(x1 + pad_x), (y0 - pad_y)..(y1 + pad_y))
            .map_err(|e| plot_err(&e))?;
        chart
            .configure_mesh()
            .x_desc(x_label)
            .y_desc("sum rate (bit/s/Hz)")
            .draw()
            .map_err(|e| plot_err(&e))?;
        for (i, alg) in self.algorithms().iter().enumerate() {
            let color = Palette99::pick(i).to_rgba();
            let pts: Vec<&AggregateRow> = agg.iter().filter(|a| &a.algorithm == alg).collect();
            chart
                .draw_series(LineSeries::new(
                    pts.iter().map(|a| (a.value, a.mean)),
                    color.stroke_width(2),
                ))
                .map_err(|e| plot_err(&e))?
                .label(alg.as_str())
                .legend(move |(x, y)| {
                    PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2))
                });
            chart
                .draw_series(pts.iter().map(|a| {
                    PathElement::new(
                        vec![(a.value, a.mean - a.ci95), (a.value, a.mean + a.ci95)],
                        color,
                    )
                }))
                .map_err(|e| plot_err(&e))?;
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(|e| plot_err(&e))?;
        root.present().map_err(|e| plot_err(&e))?;
        Ok(())
    }
}

/// Starting phases for the discrete algorithms.
fn initial_phases(cfg: &SystemConfig) -> PhaseIndexMatrix {
    PhaseIndexMatrix::max_amplitude(cfg.n_r, cfg.b_bits)
}

fn within_desk_limits(cfg: &SystemConfig) -> bool {
    cfg.n_r <= DESK_MAX_N_R
        && cfg.b_bits <= DESK_MAX_B
        && cfg.k_users <= DESK_MAX_USERS
        && cfg.n_t <= DESK_MAX_USERS
}

struct CellOutput {
    algorithm: Algorithm,
    result: Result<(f64, usize)>,
    seconds: f64,
}

fn run_cell(spec: &SweepSpec, value: f64, seed: u64) -> Vec<CellOutput> {
    let mut cfg = spec.base.clone();
    let setup = (|| -> Result<(SystemConfig, RateEvaluator, crate::channel::ChannelTensor)> {
        spec.param.apply(&mut cfg, value)?;
        cfg.seed = seed;
        cfg.place_users();
        let geom = build_geometry(&cfg, DistanceMode::Exact)?;
        let channel = synthesize_channel(&cfg, &geom, seed);
        let eval = RateEvaluator::new(&cfg, &channel);
        Ok((cfg.clone(), eval, channel))
    })();
    let (cfg, eval, channel) = match setup {
        Ok(s) => s,
        Err(e) => {
            let msg = e.to_string();
            return spec
                .algorithms
                .iter()
                .map(|&algorithm| CellOutput {
                    algorithm,
                    result: Err(Error::InvalidConfig(msg.clone())),
                    seconds: 0.0,
                })
                .collect();
        }
    };

    let mut srm_phases: Option<PhaseIndexMatrix> = None;
    let mut out = Vec::with_capacity(spec.algorithms.len());
    for (a_idx, &algorithm) in spec.algorithms.iter().enumerate() {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ (a_idx as u64 + 1)));
        let result = if algorithm.uses_milp() && !spec.allow_large && !within_desk_limits(&cfg) {
            Err(Error::InvalidConfig(format!(
                "{algorithm} cell exceeds desk limits (n_r <= {DESK_MAX_N_R}, b <= {DESK_MAX_B}, K = N_t <= {DESK_MAX_USERS})"
            )))
        } else {
            match algorithm {
                Algorithm::Srm => {
                    run_srm(&cfg, &channel, &initial_phases(&cfg), &spec.srm).map(|t| {
                        srm_phases = Some(t.phases.clone());
                        (t.sum_rate(), t.iterations())
                    })
                }
                Algorithm::Sa => {
                    simulated_annealing(&eval, &initial_phases(&cfg), &spec.anneal, &mut rng)
                        .map(|r| (r.sum_rate, r.evaluations))
                }
                Algorithm::Random => {
                    random_phase_baseline(&eval, cfg.n_r, cfg.b_bits, spec.random_draws, &mut rng)
                        .map(|r| (r.sum_rate, r.evaluations))
                }
                Algorithm::Continuous => {
                    let mut starts = vec![vec![std::f64::consts::FRAC_PI_2; cfg.n_elements()]];
                    if let Some(p) = &srm_phases {
                        starts.push((0..p.n_elements()).map(|e| p.theta(e)).collect());
                    }
                    starts
                        .iter()
                        .map(|s| continuous_relaxation(&eval, s, &spec.continuous))
                        .try_fold((f64::NEG_INFINITY, 0), |(best, it), r| {
                            r.map(|r| (best.max(r.sum_rate), it + r.iterations))
                        })
                }
                Algorithm::Los => run_los(&cfg, seed, &spec.srm),
            }
        };
        out.push(CellOutput {
            algorithm,
            result,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    out
}

/// SRM on a pure line-of-sight draw with its own user drop.
fn run_los(base: &SystemConfig, seed: u64, srm: &SrmOptions) -> Result<(f64, usize)> {
    let mut cfg = base.clone();
    cfg.rician_on = false;
    cfg.seed = splitmix64(seed ^ 0x004C_4F53);
    cfg.place_users();
    let geom = build_geometry(&cfg, DistanceMode::Exact)?;
    let channel = synthesize_channel(&cfg, &geom, cfg.seed);
    let mut opts = srm.clone();
    opts.analog.los_mode = true;
    run_srm(&cfg, &channel, &initial_phases(&cfg), &opts).map(|t| (t.sum_rate(), t.iterations()))
}

/// Runs every cell of `spec`; failures are recorded in the table.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    if spec.algorithms.iter().any(|a| !a.uses_milp()) {
        for &v in &spec.values {
            let mut cfg = spec.base.clone();
            spec.param.apply(&mut cfg, v)?;
            if !within_desk_limits(&cfg) {
                log::warn!(
                    "{}={v} is above desk scale; baselines will be slow",
                    spec.param
                );
            }
        }
    }
    let cells: Vec<(f64, usize)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.trials).map(move |t| (v, t)))
        .collect();
    let outputs = par::map_indices(cells.len(), |i| {
        let (value, trial) = cells[i];
        let seed = spec.cell_seed(value, trial);
        (value, trial, seed, run_cell(spec, value, seed))
    });
    let mut rows = Vec::new();
    for (value, trial, seed, outs) in outputs {
        for o in outs {
            let (sum_rate, iterations, error) = match o.result {
                Ok((r, it)) => (Some(r), it, None),
                Err(e) => (None, 0, Some(e.to_string())),
            };
            rows.push(SweepRow {
                param: spec.param.name().to_string(),
                value,
                trial,
                seed,
                algorithm: o.algorithm.name().to_string(),
                sum_rate,
                seconds: if spec.timing { o.seconds } else { 0.0 },
                iterations,
                error,
            });
        }
    }
    Ok(SweepTable { rows })
}
