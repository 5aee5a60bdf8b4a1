//! Command-line front end. Every run writes `summary.json`, CSV tables and
//! a `manifest.json` from which it can be rerun.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::coeffs::{assemble_coeffs, default_grid, linearize, Model};
use crate::error::{Error, ErrorKind};
use crate::expr::Expr;
use crate::io::{self, fmt_f64, RunDir, Table};
use crate::meta::{chain_hitting_distribution, simulate_chain, ChainSpec, HistogramSpec, Lab};
use crate::sim::{Scheme, SimConfig};
use crate::spectral::{default_resolution, solve_gamma};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const NUMERICAL: i32 = 2;
    pub const ASSUMPTION: i32 = 3;
}

#[derive(Debug, Parser)]
#[command(name = "metalab", version = io::VERSION, about = "Scaling exponents, exit laws and metastable time scales of degenerate diffusions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check assumptions (a)-(e) on a model file.
    Check(ModelArgs),
    /// Scaling exponent and classification of every surface.
    Gamma(SpectralArgs),
    /// Local coefficients, stationary measure and eigenfunction of one surface.
    Stationary(StationaryArgs),
    /// Two-sided exit probability between level sets.
    ExitProb(ExitProbArgs),
    /// Mean exit time against eps with a power-law or logarithmic fit.
    ExitTime(ExitTimeArgs),
    /// Transition matrix between attracting surfaces.
    Qmatrix(QmatrixArgs),
    /// Hitting distribution of an absorbing chain.
    Chain(ChainArgs),
    /// Law of the perturbed process at a fixed time.
    Metastable(MetastableArgs),
    /// Long-run occupation of the unperturbed process.
    Invariant(InvariantArgs),
    /// Feynman-Kac estimate of `E_x g(X_t)`.
    Cauchy(CauchyArgs),
    /// Rerun a command from its manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Model JSON file.
    #[arg(long)]
    pub model: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "metalab-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SpectralArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Grid points per angular direction; defaults by topology.
    #[arg(long)]
    pub resolution: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 100.0)]
    pub t_max: f64,
    #[arg(long, value_enum, default_value_t = SchemeArg::Heun)]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub n_traj: usize,
    /// Fixed step size everywhere.
    #[arg(long)]
    pub no_adaptive: bool,
    /// Worker threads; also set by METALAB_WORKERS.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum SchemeArg {
    Heun,
    EulerCorrected,
}

impl SimArgs {
    pub fn config(&self) -> SimConfig {
        SimConfig {
            eps: self.eps,
            dt: self.dt,
            t_max: self.t_max,
            scheme: match self.scheme {
                SchemeArg::Heun => Scheme::Heun,
                SchemeArg::EulerCorrected => Scheme::EulerCorrected,
            },
            seed: self.seed,
            n_traj: self.n_traj,
            adaptive: !self.no_adaptive,
            workers: self.workers,
            ..SimConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct StationaryArgs {
    #[command(flatten)]
    pub spectral: SpectralArgs,
    #[arg(long, default_value_t = 0)]
    pub surface: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ExitProbArgs {
    #[command(flatten)]
    pub spectral: SpectralArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, default_value_t = 0)]
    pub surface: usize,
    #[arg(long)]
    pub zeta: f64,
    #[arg(long)]
    pub kappa1: f64,
    #[arg(long)]
    pub kappa2: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ExitTimeArgs {
    #[command(flatten)]
    pub spectral: SpectralArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, default_value_t = 0)]
    pub surface: usize,
    #[arg(long)]
    pub kappa: f64,
    /// Decreasing noise levels, comma separated.
    #[arg(long = "eps-levels", value_delimiter = ',', required = true)]
    pub eps_levels: Vec<f64>,
    /// Trajectories start at `zeta = start_factor * eps`.
    #[arg(long, default_value_t = 1.0)]
    pub start_factor: f64,
}

#[derive(Debug, Clone, Args)]
pub struct QmatrixArgs {
    #[command(flatten)]
    pub spectral: SpectralArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Start level is `r eps`.
    #[arg(long, default_value_t = crate::meta::DEFAULT_R)]
    pub r: f64,
    /// Repeat at `eps / 2` to gauge the drift of the estimate.
    #[arg(long)]
    pub half: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ChainArgs {
    /// Exponents in decreasing order, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub gammas: Vec<f64>,
    /// Transition matrix with rows separated by `;`, entries by spaces or commas.
    #[arg(long)]
    pub q: String,
    #[arg(long, value_delimiter = ',', required = true)]
    pub p0: Vec<f64>,
    /// Absorbing states are `1..=l`.
    #[arg(long)]
    pub l: usize,
    /// Also estimate by simulating this many chains.
    #[arg(long)]
    pub simulate: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "metalab-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct HistArgs {
    /// Histogram covers `[-half_width, half_width]^2`.
    #[arg(long, default_value_t = 3.0)]
    pub half_width: f64,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
}

#[derive(Debug, Clone, Args)]
pub struct MetastableArgs {
    #[command(flatten)]
    pub spectral: SpectralArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub hist: HistArgs,
    /// Start point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub x: Vec<f64>,
    #[arg(long)]
    pub t: f64,
    #[arg(long, default_value_t = crate::meta::KAPPA_REPORT)]
    pub kappa_report: f64,
    /// Also estimate the hitting weights `p_x` at this level.
    #[arg(long)]
    pub px_level: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct InvariantArgs {
    #[command(flatten)]
    pub spectral: SpectralArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub hist: HistArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub x: Vec<f64>,
    #[arg(long, default_value_t = 50.0)]
    pub burn_in: f64,
    #[arg(long, default_value_t = 1e4)]
    pub duration: f64,
    /// Distances at which the occupation near the surfaces is reported.
    #[arg(long, value_delimiter = ',', default_value = "0.01")]
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct CauchyArgs {
    #[command(flatten)]
    pub spectral: SpectralArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub x: Vec<f64>,
    #[arg(long)]
    pub t: f64,
    /// Initial condition `g` as an expression in `x0, x1, ...`.
    #[arg(long)]
    pub g: String,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory; defaults to the one recorded in the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Usage => exit::USAGE,
            ErrorKind::Numerical => exit::NUMERICAL,
            ErrorKind::Assumption => exit::ASSUMPTION,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        code: exit::USAGE,
        message: message.into(),
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (without the program name), runs the command and returns
/// the exit code. Output lines go to `out`, diagnostics to stderr.
pub fn run(args: &[String], out: &mut dyn std::io::Write) -> i32 {
    let argv = std::iter::once("metalab".to_string()).chain(args.iter().cloned());
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    let args = absolute_model_paths(args);
    match dispatch(cli.command, &args, out) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn load(path: &Path) -> CliResult<Model> {
    let loaded = io::load_model(path)?;
    for c in loaded.report.checks.iter().filter(|c| !c.passed) {
        eprintln!(
            "warning: assumption ({}) fails: {} (value {})",
            c.name,
            c.description,
            fmt_f64(c.value)
        );
    }
    Ok(loaded.model)
}

fn lab<'m>(model: &'m Model, resolution: Option<usize>) -> CliResult<Lab<'m>> {
    Ok(match resolution {
        Some(n) => Lab::new(model, n)?,
        None => Lab::solve(model)?,
    })
}

fn line(out: &mut dyn std::io::Write, s: &str) {
    let _ = writeln!(out, "{s}");
}

fn tuple(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
    format!("({})", parts.join(", "))
}

/// Rounds away the last few bits of solver noise for display.
fn display(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

fn parse_matrix(s: &str) -> CliResult<Vec<Vec<f64>>> {
    s.split(';')
        .map(|row| {
            row.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|_| usage(format!("bad matrix entry `{t}`"))))
                .collect()
        })
        .collect()
}

fn dispatch(command: Command, args: &[String], out: &mut dyn std::io::Write) -> CliResult<()> {
    match command {
        Command::Check(a) => {
            let loaded = io::load_model(&a.model)?;
            let _ = write!(out, "{}", io::format_report(&loaded.report));
            let mut dir = RunDir::create(&a.out)?;
            dir.json("summary.json", &loaded.report)?;
            dir.finish("check", args, json!({ "model": a.model }))?;
            if let Some(c) = loaded.report.fatal() {
                return Err(CliError {
                    code: exit::ASSUMPTION,
                    message: format!("assumption ({}) fails: {}", c.name, c.description),
                });
            }
            Ok(())
        }
        Command::Gamma(a) => {
            let model = load(&a.model.model)?;
            let lab = lab(&model, a.resolution)?;
            let mut dir = RunDir::create(&a.model.out)?;
            let mut summary = vec![];
            for s in lab.solutions() {
                line(
                    out,
                    &format!(
                        "surface {}: gamma = {:?}, classification {:?}",
                        s.surface_id,
                        display(s.gamma),
                        s.classification
                    ),
                );
                summary.push(json!({
                    "surface_id": s.surface_id,
                    "gamma": s.gamma,
                    "classification": s.classification,
                    "alpha_bar": s.alpha_bar,
                    "beta_bar": s.beta_bar,
                    "residual": s.residual,
                    "grid_points": s.grid.len(),
                }));
                dir.table(&format!("lambda_{}.csv", s.surface_id), &io::lambda_table(&s.lambda_curve))?;
            }
            dir.json("summary.json", &summary)?;
            dir.finish("gamma", args, json!({ "model": a.model.model, "resolution": a.resolution }))?;
            Ok(())
        }
        Command::Stationary(a) => {
            let model = load(&a.spectral.model.model)?;
            let surface = model.surface(a.surface)?;
            let n = a.spectral.resolution.unwrap_or(default_resolution(surface.topology()?));
            let lin = linearize(&model, a.surface)?;
            let co = assemble_coeffs(&lin, &default_grid(surface, n)?)?;
            let sol = solve_gamma(&co)?;
            line(
                out,
                &format!(
                    "surface {}: alpha_bar = {}, beta_bar = {}, gamma = {:?}, phi variation {}",
                    a.surface,
                    fmt_f64(sol.alpha_bar),
                    fmt_f64(sol.beta_bar),
                    display(sol.gamma),
                    fmt_f64(sol.phi_variation())
                ),
            );
            let mut dir = RunDir::create(&a.spectral.model.out)?;
            dir.table("coefficients.csv", &io::coefficients_table(&co))?;
            dir.table("stationary.csv", &io::spectral_table(&sol))?;
            dir.json(
                "summary.json",
                &json!({
                    "surface_id": a.surface,
                    "gamma": sol.gamma,
                    "alpha_bar": sol.alpha_bar,
                    "beta_bar": sol.beta_bar,
                    "phi_variation": sol.phi_variation(),
                    "residual": sol.residual,
                    "alpha_flag": co.alpha_flag(),
                }),
            )?;
            dir.finish(
                "stationary",
                args,
                json!({ "model": a.spectral.model.model, "surface": a.surface, "resolution": n }),
            )?;
            Ok(())
        }
        Command::ExitProb(a) => {
            if !(a.kappa1 > 0.0 && a.kappa1 <= a.zeta && a.zeta <= a.kappa2) {
                return Err(usage(format!(
                    "need 0 < kappa1 <= zeta <= kappa2, got ({}, {}, {})",
                    a.kappa1, a.zeta, a.kappa2
                )));
            }
            let model = load(&a.spectral.model.model)?;
            let lab = lab(&model, a.spectral.resolution)?;
            let cfg = a.sim.config();
            let (est, events) = lab.exit_prob_events(a.surface, a.zeta, a.kappa1, a.kappa2, &cfg)?;
            line(
                out,
                &format!(
                    "P(upper first) = {} +- {} (predicted {}, z = {:.2}, timeouts {})",
                    fmt_f64(est.probability),
                    fmt_f64(est.std_error),
                    fmt_f64(est.predicted),
                    est.z_score(),
                    est.timeouts
                ),
            );
            let mut dir = RunDir::create(&a.spectral.model.out)?;
            dir.table("events.csv", &io::events_table(&events, model.dim()))?;
            dir.json("summary.json", &est)?;
            dir.finish("exit-prob", args, json!({ "model": a.spectral.model.model, "sim": cfg }))?;
            Ok(())
        }
        Command::ExitTime(a) => {
            let model = load(&a.spectral.model.model)?;
            let lab = lab(&model, a.spectral.resolution)?;
            let cfg = a.sim.config();
            let stats = lab.exit_time_scaling(a.surface, a.kappa, &a.eps_levels, a.start_factor, &cfg)?;
            line(
                out,
                &format!(
                    "{:?} fit: slope {} +- {} (R^2 {})",
                    stats.fit_kind,
                    fmt_f64(stats.fit.slope),
                    fmt_f64(stats.fit.slope_se),
                    fmt_f64(stats.fit.r_squared)
                ),
            );
            let pts: Vec<(f64, f64, f64)> = stats
                .eps
                .iter()
                .zip(stats.mean.iter().zip(&stats.std_error))
                .map(|(e, (m, s))| ((1.0 / e).ln(), *m, *s))
                .collect();
            let mut dir = RunDir::create(&a.spectral.model.out)?;
            dir.table("exit_times.csv", &io::plot_table(&pts))?;
            dir.json("summary.json", &stats)?;
            dir.finish("exit-time", args, json!({ "model": a.spectral.model.model, "sim": cfg }))?;
            Ok(())
        }
        Command::Qmatrix(a) => {
            let model = load(&a.spectral.model.model)?;
            let lab = lab(&model, a.spectral.resolution)?;
            let cfg = a.sim.config();
            let est = lab.qmatrix(a.r, a.half, &cfg)?;
            let mut t = Table::new(&["from", "to", "q", "std_error"]);
            for (i, row) in est.q.iter().enumerate() {
                line(out, &tuple(row));
                for (j, v) in row.iter().enumerate() {
                    t.row(&[
                        est.surfaces[i].to_string(),
                        est.surfaces[j].to_string(),
                        fmt_f64(*v),
                        fmt_f64(est.std_error[i][j]),
                    ]);
                }
            }
            if let Some(d) = est.drift() {
                line(out, &format!("drift under eps/2: {}", fmt_f64(d)));
            }
            let mut dir = RunDir::create(&a.spectral.model.out)?;
            dir.table("qmatrix.csv", &t)?;
            dir.json("summary.json", &est)?;
            dir.finish("qmatrix", args, json!({ "model": a.spectral.model.model, "sim": cfg }))?;
            Ok(())
        }
        Command::Chain(a) => {
            let chain = ChainSpec {
                gammas: a.gammas.clone(),
                q: parse_matrix(&a.q)?,
                p0: a.p0.clone(),
            };
            let p = chain_hitting_distribution(&chain, a.l)?;
            line(out, &tuple(&p));
            let mut t = Table::new(&["state", "p", "simulated", "std_error"]);
            let sim = match a.simulate {
                Some(n) => Some(simulate_chain(&chain, a.l, n, a.seed)?),
                None => None,
            };
            for (k, v) in p.iter().enumerate() {
                let (s, e) = sim.as_ref().map_or((String::new(), String::new()), |(w, se)| {
                    (fmt_f64(w[k]), fmt_f64(se[k]))
                });
                t.row(&[(k + 1).to_string(), fmt_f64(*v), s, e]);
            }
            if let Some((w, se)) = &sim {
                line(out, &format!("simulated {} +- {}", tuple(w), tuple(se)));
            }
            let mut dir = RunDir::create(&a.out)?;
            dir.table("chain.csv", &t)?;
            dir.json("summary.json", &json!({ "chain": chain, "l": a.l, "p": p, "simulated": sim }))?;
            dir.finish("chain", args, json!({ "chain": chain, "l": a.l, "seed": a.seed }))?;
            Ok(())
        }
        Command::Metastable(a) => {
            let model = load(&a.spectral.model.model)?;
            let lab = lab(&model, a.spectral.resolution)?;
            let cfg = SimConfig {
                t_max: a.sim.t_max.max(a.t),
                ..a.sim.config()
            };
            let hist = HistogramSpec::square(a.hist.half_width, a.hist.bins);
            let res = lab.metastable_distribution(&a.x, a.t, a.kappa_report, &hist, &cfg)?;
            line(
                out,
                &format!(
                    "surfaces {:?}: weights {} +- {} (unassigned {})",
                    res.surfaces,
                    tuple(&res.weights),
                    tuple(&res.std_error),
                    fmt_f64(res.unassigned)
                ),
            );
            let mut dir = RunDir::create(&a.spectral.model.out)?;
            dir.table("histogram.csv", &io::histogram_table(&res.histogram))?;
            let px = match a.px_level {
                Some(level) => {
                    let p = lab.p_x(&a.x, level, false, &SimConfig { eps: 0.0, ..cfg.clone() })?;
                    line(out, &format!("p_x = {} +- {}", tuple(&p.weights), tuple(&p.std_error)));
                    Some(p)
                }
                None => None,
            };
            dir.json("summary.json", &json!({ "metastable": res, "p_x": px }))?;
            dir.finish("metastable", args, json!({ "model": a.spectral.model.model, "sim": cfg }))?;
            Ok(())
        }
        Command::Invariant(a) => {
            let model = load(&a.spectral.model.model)?;
            let lab = lab(&model, a.spectral.resolution)?;
            let cfg = a.sim.config();
            let hist = HistogramSpec::square(a.hist.half_width, a.hist.bins);
            let m = lab.invariant_measure(&a.x, a.burn_in, a.duration, &hist, &a.thresholds, &cfg)?;
            for (th, mass) in &m.proximity {
                line(out, &format!("occupation within {} of the surfaces: {}", fmt_f64(*th), fmt_f64(*mass)));
            }
            let mut dir = RunDir::create(&a.spectral.model.out)?;
            dir.table("histogram.csv", &io::histogram_table(&m.histogram))?;
            dir.json("summary.json", &m)?;
            dir.finish("invariant", args, json!({ "model": a.spectral.model.model, "sim": cfg }))?;
            Ok(())
        }
        Command::Cauchy(a) => {
            let model = load(&a.spectral.model.model)?;
            let lab = lab(&model, a.spectral.resolution)?;
            let cfg = SimConfig {
                t_max: a.sim.t_max.max(a.t),
                ..a.sim.config()
            };
            let g = Expr::parse(&a.g)?;
            let est = lab.feynman_kac(&a.x, a.t, &g, &cfg)?;
            line(
                out,
                &format!("u(t, x) = {} +- {}", fmt_f64(est.value), fmt_f64(est.std_error)),
            );
            let mut dir = RunDir::create(&a.spectral.model.out)?;
            dir.json("summary.json", &est)?;
            dir.finish("cauchy", args, json!({ "model": a.spectral.model.model, "sim": cfg, "g": a.g }))?;
            Ok(())
        }
        Command::Replay(a) => {
            let m = io::Manifest::read(&a.manifest)?;
            let mut replay = strip_out(&m.args);
            if let Some(o) = &a.out {
                replay.push("--out".into());
                replay.push(o.display().to_string());
            } else {
                replay = m.args.clone();
            }
            if replay.first().map(String::as_str) == Some("replay") {
                return Err(usage("a replay manifest cannot be replayed"));
            }
            let code = run(&replay, out);
            if code == exit::OK {
                Ok(())
            } else {
                Err(CliError {
                    code,
                    message: format!("replayed `{}` failed", m.command),
                })
            }
        }
    }
}

/// Records model paths absolutely so a manifest replays from any directory.
fn absolute_model_paths(args: &[String]) -> Vec<String> {
    let mut res = args.to_vec();
    for i in 1..res.len() {
        if res[i - 1] == "--model" {
            if let Ok(p) = std::fs::canonicalize(&res[i]) {
                res[i] = p.display().to_string();
            }
        }
    }
    res
}

fn strip_out(args: &[String]) -> Vec<String> {
    let mut res = vec![];
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
        } else if a == "--out" {
            skip = true;
        } else if !a.starts_with("--out=") {
            res.push(a.clone());
        }
    }
    res
}
