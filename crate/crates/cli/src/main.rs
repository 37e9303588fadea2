use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ris_hbf::analog::AnalogOptions;
use ris_hbf::baselines::AnnealSchedule;
use ris_hbf::channel::synthesize_channel;
use ris_hbf::los::{orthogonality_residual, LosDesignRule};
use ris_hbf::srm::{run_srm, SrmOptions};
use ris_hbf::sweep::{run_sweep, Algorithm, SweepParam, SweepSpec};
use ris_hbf::{build_geometry, DistanceMode, PhaseIndexMatrix, SystemConfig};

#[derive(Parser)]
#[command(
    name = "ris-hbf",
    version,
    about = "RIS hybrid beamforming experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep one parameter and write per-cell results.
    Sweep(SweepArgs),
    /// Run the alternating optimization on a single channel draw.
    Solve(SolveArgs),
    /// Print the line-of-sight design rules for a configuration.
    LosReport(LosArgs),
}

#[derive(Args)]
struct SystemArgs {
    /// TOML configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    users: Option<usize>,
    /// BS antennas (defaults to the user count).
    #[arg(long)]
    antennas: Option<usize>,
    /// Surface side length.
    #[arg(long)]
    n_r: Option<usize>,
    /// Phase control bits.
    #[arg(long)]
    bits: Option<u32>,
    /// P_T / sigma^2 in dB.
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<f64>,
    #[arg(long)]
    d_b: Option<f64>,
    /// Pure line of sight.
    #[arg(long)]
    los: bool,
    /// Channel and placement seed [default: 1, or the config file's].
    #[arg(long)]
    seed: Option<u64>,
}

impl SystemArgs {
    fn build(&self) -> Result<SystemConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                SystemConfig::load(path).with_context(|| format!("loading {}", path.display()))?
            }
            None => SystemConfig::desk(2, 2, 2, 2, self.seed.unwrap_or(1)),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        let users = self.users.unwrap_or(cfg.k_users);
        let replace_users = users != cfg.k_users;
        cfg.k_users = users;
        cfg.n_t = self.antennas.or(self.users).unwrap_or(cfg.n_t);
        cfg.n_r = self.n_r.unwrap_or(cfg.n_r);
        cfg.b_bits = self.bits.unwrap_or(cfg.b_bits);
        cfg.d_b = self.d_b.unwrap_or(cfg.d_b);
        if let Some(snr) = self.snr {
            cfg.set_snr_db(snr);
        }
        if self.los {
            cfg.rician_on = false;
        }
        if replace_users {
            cfg.place_users();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Stop once a round gains at most this many bit/s/Hz.
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long, default_value_t = 20)]
    max_iter: usize,
    /// Branch-and-bound node budget per analog step.
    #[arg(long, default_value_t = 50_000)]
    node_limit: usize,
}

impl SolverArgs {
    fn options(&self, los_mode: bool) -> SrmOptions {
        SrmOptions {
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            analog: AnalogOptions {
                node_limit: self.node_limit,
                los_mode,
                ..AnalogOptions::default()
            },
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// snr | n_r | b | k_users | d_b
    #[arg(long)]
    param: SweepParam,
    /// Comma-separated values, or `start:stop:step`.
    #[arg(long, allow_hyphen_values = true)]
    values: String,
    /// Comma-separated: srm, sa, random, continuous, los.
    #[arg(long, default_value = "srm,random")]
    algorithms: String,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    /// Share each trial's channel across values that leave it unchanged.
    #[arg(long)]
    common_channels: bool,
    /// Allow SRM cells above the desk-scale limits.
    #[arg(long)]
    allow_large: bool,
    /// Write zero seconds so repeated runs produce identical files.
    #[arg(long)]
    no_timing: bool,
    /// Annealing evaluations.
    #[arg(long, default_value_t = 100_000)]
    sa_iters: usize,
    /// Use the full 10^7-evaluation annealing schedule.
    #[arg(long)]
    sa_full: bool,
    #[arg(long, default_value_t = 1)]
    random_draws: usize,
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Per-iteration trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Binary dump of the channel draw.
    #[arg(long)]
    save_channel: Option<PathBuf>,
}

#[derive(Args)]
struct LosArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Phase index used on every element for the residual.
    #[arg(long)]
    phase: Option<u32>,
}

fn parse_values(text: &str) -> Result<Vec<f64>> {
    if let Some((a, rest)) = text.split_once(':') {
        let (b, step) = rest.split_once(':').unwrap_or((rest, "1"));
        let (a, b, step): (f64, f64, f64) =
            (a.trim().parse()?, b.trim().parse()?, step.trim().parse()?);
        if !(step > 0.0) || b < a {
            bail!("range {text} needs start <= stop and a positive step");
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| a + i as f64 * step).collect());
    }
    text.split(',')
        .map(|v| Ok(v.trim().parse::<f64>()?))
        .collect()
}

fn sweep(args: &SweepArgs) -> Result<bool> {
    let algorithms = args
        .algorithms
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<Algorithm>())
        .collect::<Result<Vec<_>, _>>()?;
    let mut spec = SweepSpec::new(
        args.system.build()?,
        args.param,
        parse_values(&args.values)?,
        algorithms,
    );
    spec.trials = args.trials;
    spec.seed_base = args.seed_base;
    spec.common_channels = args.common_channels;
    spec.allow_large = args.allow_large;
    spec.timing = !args.no_timing;
    spec.srm = args.solver.options(false);
    spec.anneal = if args.sa_full {
        AnnealSchedule::paper()
    } else {
        AnnealSchedule {
            cap: args.sa_iters,
            ..AnnealSchedule::default()
        }
    };
    spec.random_draws = args.random_draws;
    spec.validate()?;

    let table = run_sweep(&spec)?;
    table.write_csv(BufWriter::new(File::create(&args.out)?))?;
    if let Some(path) = &args.summary {
        table.write_aggregate_csv(BufWriter::new(File::create(path)?))?;
    }
    if let Some(path) = &args.plot {
        table.write_svg(path, args.param.name())?;
    }
    for a in table.aggregate() {
        println!(
            "{}={:<8} {:<10} mean {:.4} +/- {:.4} (n={}, failed={})",
            args.param, a.value, a.algorithm, a.mean, a.ci95, a.n, a.failures
        );
    }
    for r in table.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "cell {}={} trial {} {}: {}",
            r.param,
            r.value,
            r.trial,
            r.algorithm,
            r.error.as_deref().unwrap_or("")
        );
    }
    Ok(table.all_succeeded())
}

fn solve(args: &SolveArgs) -> Result<bool> {
    let cfg = args.system.build()?;
    let geom = build_geometry(&cfg, DistanceMode::Exact)?;
    let channel = synthesize_channel(&cfg, &geom, cfg.seed);
    if let Some(path) = &args.save_channel {
        channel.write_binary(&mut BufWriter::new(File::create(path)?))?;
    }
    let init = PhaseIndexMatrix::max_amplitude(cfg.n_r, cfg.b_bits);
    let trace = run_srm(&cfg, &channel, &init, &args.solver.options(!cfg.rician_on))?;
    for r in &trace.records {
        println!(
            "t={:<2} R={:.6} w={:.6e} trace={:.6e} cuts={} nodes={} {:.2}s{}",
            r.t,
            r.sum_rate,
            r.w,
            r.trace_objective,
            r.cuts,
            r.nodes,
            r.seconds,
            if r.accepted { "" } else { " (rejected)" }
        );
    }
    println!("stop: {:?}", trace.stop);
    println!("phases: {:?}", trace.phases.m);
    println!("powers: {:?}", trace.digital.p);
    if let Some(path) = &args.trace {
        trace.write_csv(BufWriter::new(File::create(path)?))?;
    }
    Ok(true)
}

fn los_report(args: &LosArgs) -> Result<bool> {
    let mut cfg = args.system.build()?;
    cfg.rician_on = false;
    let phases = match args.phase {
        Some(m) => PhaseIndexMatrix::new(cfg.n_r, cfg.b_bits, vec![m; cfg.n_elements()])?,
        None => PhaseIndexMatrix::max_amplitude(cfg.n_r, cfg.b_bits),
    };
    let rule = LosDesignRule::evaluate(&cfg, &phases)?;
    println!("threshold size N_R^th     {:.4}", rule.threshold);
    println!(
        "d_B for N_R = {:<3}         {:.4} m",
        cfg.n_r, rule.required_d_b
    );
    println!("d_R1 * d_B required       {:.6}", rule.required_product);
    println!("d_R1 * d_B configured     {:.6}", rule.actual_product);
    println!("row imbalance             {:.3e}", rule.row_imbalance());
    match build_geometry(&cfg, DistanceMode::Paraxial) {
        Ok(geom) => println!(
            "orthogonality residual    {:.3e}",
            orthogonality_residual(&cfg, &geom, &phases)?
        ),
        Err(e) => println!("orthogonality residual    n/a ({e})"),
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Solve(a) => solve(a),
        Command::LosReport(a) => los_report(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
