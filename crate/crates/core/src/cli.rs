//! The `zdforge` command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium::{follower_profile_br, gap_report, sse_solve};
use crate::error::{Error, Result};
use crate::evaluation::{analytic_utility, determinant_utility, monte_carlo_utility, simulate};
use crate::game::{Action, GameSpec, MemoryOneStrategy, LEADER};
use crate::io::{fmt17, EqualizerFile, GameDocument, StrategyEntry, StrategyFile};
use crate::scenarios::{ScenarioParams, UavDraws, UAV_DELTA};
use crate::zd::{
    equalizer_for_gamma, feasibility_region, synthesize_equalizer_with, uniform_omega, verify_enforcement,
    EqualizerSpec, FeasibleRegion,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_BAD_PARAMS: i32 = 2;
pub const EXIT_EMPTY_REGION: i32 = 3;
pub const EXIT_GAMMA_RANGE: i32 = 4;
pub const EXIT_UNSUPPORTED: i32 = 5;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "ZDFORGE_THREADS";

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NoEqualizer => EXIT_EMPTY_REGION,
        Error::GammaOutOfRange { .. } => EXIT_GAMMA_RANGE,
        Error::Unsupported(_) | Error::NoFollowerEquilibrium(_) => EXIT_UNSUPPORTED,
        _ => EXIT_BAD_PARAMS,
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "zdforge",
    version,
    about = "Equalizer ZD strategies versus Stackelberg equilibria"
)]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Probability clamping tolerance for synthesized strategies.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tolerance: f64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a game file.
    Gen(GenArgs),
    /// Equalizer region, bounds and leader strategy.
    Zd(ZdArgs),
    /// SSE value, best equalizer value and their gap.
    Gap(GapArgs),
    /// Gap over a grid of theta for randomized UAV games.
    Sweep(SweepArgs),
    /// Simulated play of a leader strategy against optimistic followers.
    Trace(TraceArgs),
    /// Utilities of a strategy profile.
    Eval(EvalArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Pgg,
    Snowdrift,
    AsyncPgg,
    AsyncSnowdrift,
    Security,
    Uav,
    Mtd,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    pub kind: Kind,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Enhancement factor (public goods).
    #[arg(long, default_value_t = 2.0)]
    pub r: f64,
    /// Cost.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Benefit (snowdrift).
    #[arg(long, default_value_t = 3.0)]
    pub b: f64,
    /// Share factors, comma separated (asymmetric public goods).
    #[arg(long, value_delimiter = ',')]
    pub shares: Vec<f64>,
    /// Per-player benefits, comma separated (asymmetric snowdrift).
    #[arg(long, value_delimiter = ',')]
    pub benefits: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    /// Draw one table per follower instead of one shared follower table.
    #[arg(long)]
    pub independent_followers: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extreme {
    Plus,
    Minus,
}

#[derive(Args, Debug)]
pub struct ZdArgs {
    pub game: PathBuf,
    /// Follower weights, comma separated; uniform when omitted.
    #[arg(long, value_delimiter = ',')]
    pub omega: Vec<f64>,
    #[arg(long, conflicts_with = "extreme")]
    pub gamma: Option<f64>,
    #[arg(long, value_enum)]
    pub extreme: Option<Extreme>,
    /// Random follower profiles used to verify enforcement.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
}

#[derive(Args, Debug)]
pub struct GapArgs {
    pub game: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub omega: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = UAV_DELTA)]
    pub delta: f64,
    /// Explicit theta values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub thetas: Vec<f64>,
    /// Number of evenly spaced theta values on [0, 1] when --thetas is absent.
    #[arg(long, default_value_t = 11)]
    pub points: usize,
    #[arg(long)]
    pub independent_followers: bool,
    /// Omit theta values with no equalizer instead of failing.
    #[arg(long)]
    pub skip_empty: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeaderChoice {
    ZdPlus,
    ZdMinus,
    Sse,
    Uniform,
}

#[derive(Args, Debug)]
pub struct TraceArgs {
    pub game: PathBuf,
    #[arg(long, value_enum)]
    pub leader: LeaderChoice,
    #[arg(long, default_value_t = 50)]
    pub horizon: usize,
    #[arg(long, value_delimiter = ',')]
    pub omega: Vec<f64>,
    /// Also estimate utilities from this many replications.
    #[arg(long)]
    pub replications: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Analytic,
    Determinant,
    MonteCarlo,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    pub game: PathBuf,
    pub strategies: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Analytic)]
    pub method: Method,
    #[arg(long, default_value_t = 400)]
    pub horizon: usize,
    #[arg(long, default_value_t = 20000)]
    pub replications: usize,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Messages go to `stdout` and `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_BAD_PARAMS;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
    };
    match dispatch(&cli, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Applies the thread cap from the environment, once per process.
pub fn configure_threads() {
    if let Some(k) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build_global();
    }
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    if !(cli.tolerance.is_finite() && cli.tolerance >= 0.0) {
        return Err(Error::Domain(format!(
            "tolerance {} must be nonnegative",
            cli.tolerance
        )));
    }
    match &cli.command {
        Command::Gen(a) => cmd_gen(cli, a, stdout),
        Command::Zd(a) => cmd_zd(cli, a, stdout),
        Command::Gap(a) => cmd_gap(cli, a, stdout),
        Command::Sweep(a) => cmd_sweep(cli, a, stdout, stderr),
        Command::Trace(a) => cmd_trace(cli, a, stdout, stderr),
        Command::Eval(a) => cmd_eval(cli, a, stdout),
    }
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn omega_or_uniform(omega: &[f64], n: usize) -> Vec<f64> {
    if omega.is_empty() {
        uniform_omega(n)
    } else {
        omega.to_vec()
    }
}

fn scenario(cli: &Cli, a: &GenArgs) -> ScenarioParams {
    let delta = a.delta.unwrap_or(UAV_DELTA);
    match a.kind {
        Kind::Pgg => ScenarioParams::Pgg {
            n: a.n,
            r: a.r,
            c: a.c,
            delta,
        },
        Kind::Snowdrift => ScenarioParams::Snowdrift {
            n: a.n,
            b: a.b,
            c: a.c,
            delta,
        },
        Kind::AsyncPgg => ScenarioParams::AsyncPgg {
            a: a.shares.clone(),
            r: a.r,
            c: a.c,
            delta,
        },
        Kind::AsyncSnowdrift => ScenarioParams::AsyncSnowdrift {
            b: a.benefits.clone(),
            c: a.c,
            delta,
        },
        Kind::Security => ScenarioParams::Security {
            n: a.n,
            seed: cli.seed,
            delta,
        },
        Kind::Uav => ScenarioParams::UavRandom {
            n: a.n,
            theta: a.theta,
            seed: cli.seed,
            delta,
            shared_followers: a.n > 2 && !a.independent_followers,
        },
        Kind::Mtd => ScenarioParams::MtdRandom {
            seed: cli.seed,
            delta,
        },
    }
}

fn cmd_gen(cli: &Cli, a: &GenArgs, stdout: &mut dyn Write) -> Result<()> {
    let params = scenario(cli, a);
    let mut doc = GameDocument::new(params.generate()?);
    doc.kind = Some(params.kind().to_string());
    emit(&cli.out, &doc.to_json()?, stdout)?;
    if cli.out.is_some() {
        writeln!(
            stdout,
            "n = {}, delta = {}, kind = {}",
            doc.game.n(),
            doc.game.delta(),
            params.kind()
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ZdOutput {
    equalizer: EqualizerFile,
    strategy: StrategyEntry,
    gamma_minus: f64,
    gamma_plus: f64,
    max_deviation: f64,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn write_region(region: &FeasibleRegion, out: &Path) -> Result<()> {
    let mut c = String::from("cu,cv,b\n");
    for h in &region.constraints {
        c += &format!("{},{},{}\n", fmt17(h.cu), fmt17(h.cv), fmt17(h.b));
    }
    fs::write(sibling(out, "constraints"), c)?;
    let mut v = String::from("u,v,gamma\n");
    for p in region.vertices() {
        v += &format!("{},{},{}\n", fmt17(p.u), fmt17(p.v), fmt17(p.gamma()));
    }
    fs::write(sibling(out, "vertices"), v)?;
    Ok(())
}

fn cmd_zd(cli: &Cli, a: &ZdArgs, stdout: &mut dyn Write) -> Result<()> {
    let doc = GameDocument::read(&a.game)?;
    let game = &doc.game;
    let stored = doc
        .equalizer
        .clone()
        .filter(|_| a.gamma.is_none() && a.extreme.is_none());
    let omega = match &stored {
        Some(s) if a.omega.is_empty() => s.omega().to_vec(),
        _ => omega_or_uniform(&a.omega, game.n()),
    };
    let leader_init = stored
        .as_ref()
        .map_or(game.initial_probs()[LEADER], |s| s.leader_init());
    let region = feasibility_region(game, &omega, leader_init)?;
    let bounds = region.bounds.ok_or(Error::NoEqualizer)?;
    writeln!(stdout, "gamma_minus = {}", fmt17(bounds.gamma_minus))?;
    writeln!(stdout, "gamma_plus = {}", fmt17(bounds.gamma_plus))?;
    let spec = match (&stored, a.gamma, a.extreme) {
        (Some(s), None, None) => EqualizerSpec::new(omega.clone(), s.gamma(), s.phi(), leader_init)?,
        (_, Some(g), _) => equalizer_for_gamma(game, &omega, g, leader_init)?,
        (_, None, Some(Extreme::Minus)) => {
            EqualizerSpec::new(omega.clone(), bounds.gamma_minus, bounds.phi_minus, leader_init)?
        }
        _ => EqualizerSpec::new(omega.clone(), bounds.gamma_plus, bounds.phi_plus, leader_init)?,
    };
    let zd = synthesize_equalizer_with(game, &spec, cli.tolerance)?;
    let max_deviation = verify_enforcement(game, &spec, &zd, a.trials, cli.seed)?;
    writeln!(
        stdout,
        "gamma = {}, phi = {}",
        fmt17(spec.gamma()),
        fmt17(spec.phi())
    )?;
    writeln!(stdout, "max enforcement deviation = {max_deviation:e}")?;
    let output = ZdOutput {
        equalizer: EqualizerFile {
            omega: spec.omega().to_vec(),
            gamma: spec.gamma(),
            phi: spec.phi(),
            leader_init: spec.leader_init(),
        },
        strategy: StrategyEntry {
            probs: zd.probs().to_vec(),
            init_prob: zd.init_prob(),
        },
        gamma_minus: bounds.gamma_minus,
        gamma_plus: bounds.gamma_plus,
        max_deviation,
    };
    let text = serde_json::to_string_pretty(&output)? + "\n";
    match &cli.out {
        Some(path) => {
            fs::write(path, text)?;
            write_region(&region, path)?;
        }
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_gap(cli: &Cli, a: &GapArgs, stdout: &mut dyn Write) -> Result<()> {
    let doc = GameDocument::read(&a.game)?;
    let omega = omega_or_uniform(&a.omega, doc.game.n());
    let report = gap_report(&doc.game, &omega)?;
    for w in &report.warnings {
        writeln!(stdout, "warning: {w}")?;
    }
    writeln!(
        stdout,
        "sse_value = {}, zd_value = {}, gap = {}, heuristic = true",
        fmt17(report.sse_value),
        fmt17(report.zd_value),
        fmt17(report.gap)
    )?;
    emit(&cli.out, &report.to_json()?, stdout)
}

/// One row of a theta sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub theta: f64,
    pub sse_value: f64,
    pub zd_value: f64,
    pub gamma_minus: f64,
    pub gamma_plus: f64,
    pub gap: f64,
}

pub const SWEEP_HEADER: &str = "theta,sse,zd,gamma_minus,gamma_plus,gap";

fn cmd_sweep(cli: &Cli, a: &SweepArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let thetas: Vec<f64> = if a.thetas.is_empty() {
        match a.points {
            0 => return Err(Error::Domain("need at least one theta".into())),
            1 => vec![0.0],
            k => (0..k).map(|i| i as f64 / (k - 1) as f64).collect(),
        }
    } else {
        a.thetas.clone()
    };
    if let Some(t) = thetas.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::Domain(format!("theta = {t} outside [0, 1]")));
    }
    let shared = a.n > 2 && !a.independent_followers;
    if a.n > 2 && a.independent_followers {
        writeln!(
            stderr,
            "warning: independent follower tables; the equalizer bound assumes identical followers"
        )?;
    }
    let draws = UavDraws::new(a.n, cli.seed, shared)?;
    let omega = uniform_omega(a.n);
    let rows: Vec<Option<SweepRow>> = thetas
        .par_iter()
        .map(|&theta| {
            let game = draws.game(theta, a.delta)?;
            match gap_report(&game, &omega) {
                Ok(r) => Ok(Some(SweepRow {
                    theta,
                    sse_value: r.sse_value,
                    zd_value: r.zd_value,
                    gamma_minus: r.zd.bounds.gamma_minus,
                    gamma_plus: r.zd.bounds.gamma_plus,
                    gap: r.gap,
                })),
                Err(Error::NoEqualizer) if a.skip_empty => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut csv = format!("{SWEEP_HEADER}\n");
    for (theta, row) in thetas.iter().zip(&rows) {
        match row {
            Some(r) => {
                csv += &[
                    r.theta,
                    r.sse_value,
                    r.zd_value,
                    r.gamma_minus,
                    r.gamma_plus,
                    r.gap,
                ]
                .map(fmt17)
                .join(",");
                csv.push('\n');
            }
            None => writeln!(stderr, "theta = {theta}: no equalizer exists, row omitted")?,
        }
    }
    emit(&cli.out, &csv, stdout)
}

/// Fraction of stages where the leader's action equals the action chosen
/// by a strict majority of the followers.
pub fn match_rate(profiles: &[Vec<Action>]) -> f64 {
    let hits = profiles
        .iter()
        .filter(|p| {
            let ones = p[1..].iter().filter(|&&a| a == Action::One).count();
            let twos = p.len() - 1 - ones;
            let majority = match ones.cmp(&twos) {
                std::cmp::Ordering::Greater => Some(Action::One),
                std::cmp::Ordering::Less => Some(Action::Two),
                std::cmp::Ordering::Equal => None,
            };
            majority == Some(p[LEADER])
        })
        .count();
    hits as f64 / profiles.len() as f64
}

fn leader_strategy(
    game: &GameSpec,
    choice: LeaderChoice,
    omega: &[f64],
    tol: f64,
) -> Result<MemoryOneStrategy> {
    let init = game.initial_probs()[LEADER];
    match choice {
        LeaderChoice::ZdPlus | LeaderChoice::ZdMinus => {
            let bounds = feasibility_region(game, omega, init)?
                .bounds
                .ok_or(Error::NoEqualizer)?;
            let (gamma, phi) = if choice == LeaderChoice::ZdPlus {
                (bounds.gamma_plus, bounds.phi_plus)
            } else {
                (bounds.gamma_minus, bounds.phi_minus)
            };
            synthesize_equalizer_with(game, &EqualizerSpec::new(omega.to_vec(), gamma, phi, init)?, tol)
        }
        LeaderChoice::Sse => Ok(sse_solve(game)?.leader),
        LeaderChoice::Uniform => MemoryOneStrategy::constant(game.n(), 0.5, init),
    }
}

fn cmd_trace(cli: &Cli, a: &TraceArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let doc = GameDocument::read(&a.game)?;
    let game = &doc.game;
    let omega = omega_or_uniform(&a.omega, game.n());
    let leader = leader_strategy(game, a.leader, &omega, cli.tolerance)?;
    let response = follower_profile_br(game, &leader)?;
    let mut profile = vec![leader];
    profile.extend(response.strategies(game)?);
    let trace = simulate(game, &profile, a.horizon, cli.seed)?;
    let mut csv = Vec::new();
    trace.write_csv(&mut csv)?;
    let mut summary = format!(
        "empirical discounted return = [{}], analytic = [{}]",
        trace
            .discounted_returns
            .iter()
            .map(|x| fmt17(*x))
            .collect::<Vec<_>>()
            .join(", "),
        response
            .utilities
            .iter()
            .map(|x| fmt17(*x))
            .collect::<Vec<_>>()
            .join(", ")
    );
    if doc.kind.as_deref() == Some("mtd_random") {
        let profiles: Vec<Vec<Action>> = trace.records.iter().map(|r| r.profile.clone()).collect();
        summary += &format!(", match rate = {}", fmt17(match_rate(&profiles)));
    }
    if let Some(r) = a.replications {
        let mc = monte_carlo_utility(game, &profile, a.horizon, r, cli.seed)?;
        let e = mc.estimates[LEADER];
        summary += &format!(
            ", leader monte carlo = {} ± {} (truncation ≤ {})",
            fmt17(e.mean),
            fmt17(e.stderr),
            fmt17(mc.truncation_bound)
        );
    }
    match &cli.out {
        Some(path) => {
            fs::write(path, &csv)?;
            writeln!(stdout, "{summary}")?;
        }
        None => {
            stdout.write_all(&csv)?;
            writeln!(stderr, "{summary}")?;
        }
    }
    Ok(())
}

fn cmd_eval(cli: &Cli, a: &EvalArgs, stdout: &mut dyn Write) -> Result<()> {
    let doc = GameDocument::read(&a.game)?;
    let game = &doc.game;
    let profile = StrategyFile::read(&a.strategies)?.into_strategies()?;
    let mut text = String::new();
    match a.method {
        Method::Analytic => {
            for (i, u) in analytic_utility(game, &profile)?.utilities.iter().enumerate() {
                text += &format!("player {} utility = {}\n", i + 1, fmt17(*u));
            }
        }
        Method::Determinant => {
            for i in 0..game.n() {
                let u = determinant_utility(game, &profile, i)?;
                text += &format!("player {} utility = {}\n", i + 1, fmt17(u));
            }
        }
        Method::MonteCarlo => {
            let mc = monte_carlo_utility(game, &profile, a.horizon, a.replications, cli.seed)?;
            for (i, e) in mc.estimates.iter().enumerate() {
                text += &format!(
                    "player {} utility = {} stderr = {}\n",
                    i + 1,
                    fmt17(e.mean),
                    fmt17(e.stderr)
                );
            }
            text += &format!("truncation bound = {}\n", fmt17(mc.truncation_bound));
        }
    }
    emit(&cli.out, &text, stdout)
}
