//! The `exploration-eq` command line.
//!
//! Every subcommand writes one primary artefact: to stdout by default, or to
//! `<out-dir>/<subcommand>.<ext>` with `--out-dir`. Numbers are printed in
//! shortest round-trip form, so re-parsing any output gives back the same `f64`s.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 invalid input (including
//! `N·ρ·(1+θ) ≥ 1` where a finite solution needs it), 3 a solver failed to
//! converge, 4 `verify` found a violated equilibrium condition.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::asymmetric::{construct_equilibrium, construct_pareto, AsymmetricEquilibrium};
use crate::error::{Error, Result};
use crate::model::{critical_limits, ModelParams};
use crate::planner::{complete_info_value, coop_sweep, solve_cooperative, SweepAxis, COOP_CSV_HEADER};
use crate::profile::StrategyProfile;
use crate::sim::{simulate, write_paths_csv, ReflectionScheme, SimConfig};
use crate::symmetric::{k_dagger, solve_symmetric, symmetric_sweep, SymmetricEquilibrium, SYM_CSV_HEADER};
use crate::verify::{check_equilibrium, dp_deviation_gain, DpDeviation, EquilibriumView, VerificationReport};

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "EXPLORATION_EQ_THREADS";

/// Default master seed for `sim`.
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Parser)]
#[command(name = "exploration-eq", version, about = "Equilibria of a strategic exploration game on a Brownian landscape")]
pub struct Cli {
    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Output format; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Model parameters: a JSON file, `--rho/--theta`, or `--r/--mu/--sigma`.
#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// JSON file with `{r, mu, sigma, n_players}` or `{rho, theta, n_players}`.
    #[arg(long, conflicts_with_all = ["rho", "theta", "r", "mu", "sigma"])]
    pub params: Option<PathBuf>,
    #[arg(long, requires = "theta", conflicts_with_all = ["r", "mu", "sigma"], allow_hyphen_values = true)]
    pub rho: Option<f64>,
    #[arg(long, requires = "rho", allow_hyphen_values = true)]
    pub theta: Option<f64>,
    #[arg(long, requires_all = ["mu", "sigma"], allow_hyphen_values = true)]
    pub r: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: Option<f64>,
    /// Number of players (overrides the file's `n_players`).
    #[arg(long)]
    pub n: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepOver {
    N,
    R,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepModel {
    Coop,
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureSet {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cooperative cutoff and planner payoff.
    SolveCoop {
        #[command(flatten)]
        params: ParamArgs,
        /// Points in the CSV grid dump.
        #[arg(long, default_value_t = 401)]
        grid: usize,
    },
    /// The symmetric Markov perfect equilibrium.
    SolveSymmetric {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 401)]
        grid: usize,
    },
    /// A turn-taking equilibrium on a partition of the alternation region.
    SolveAsymmetric {
        #[command(flatten)]
        params: ParamArgs,
        /// Interior partition points; the default is the trivial partition.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        partition: Vec<f64>,
        /// Refine until every player beats the symmetric payoff on `[0, a♭ − eps]`.
        #[arg(long, conflicts_with = "partition")]
        pareto_eps: Option<f64>,
        #[arg(long, default_value_t = 64)]
        max_cells: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 401)]
        grid: usize,
    },
    /// Check the equilibrium conditions of a solution or a profile file.
    Verify {
        #[command(flatten)]
        params: ParamArgs,
        /// `coop`, `symmetric`, `asymmetric`, or a JSON strategy-profile file.
        #[arg(long, default_value = "symmetric")]
        profile: String,
        #[arg(long, value_delimiter = ',')]
        partition: Vec<f64>,
        #[arg(long, default_value_t = 2000)]
        grid: usize,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        /// Also run the DP deviation oracle at this spacing (symmetric only).
        #[arg(long)]
        dp_da: Option<f64>,
    },
    /// Monte Carlo simulation of a profile.
    Sim {
        #[command(flatten)]
        params: ParamArgs,
        /// `coop`, `symmetric`, `asymmetric`, or a JSON strategy-profile file.
        #[arg(long, default_value = "symmetric")]
        profile: String,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Time horizon; chosen from the truncation bound when omitted.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        a0: f64,
        #[arg(long)]
        antithetic: bool,
        #[arg(long, value_enum, default_value = "bridge-max")]
        scheme: SchemeArg,
        /// Write one CSV row per path here.
        #[arg(long)]
        paths_csv: Option<PathBuf>,
        /// Keep the per-path `s_bar`/`x_bar` samples in the JSON output.
        #[arg(long)]
        samples: bool,
    },
    /// Comparative statics over N or r.
    Sweep {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_enum)]
        over: SweepOver,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        /// Spacing of the cells (default 1).
        #[arg(long, conflicts_with = "points")]
        step: Option<f64>,
        /// Number of evenly spaced cells instead of a step.
        #[arg(long)]
        points: Option<usize>,
        #[arg(long, value_enum, default_value = "symmetric")]
        model: SweepModel,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// CSV data and a manifest for the figure set.
    Figures {
        #[arg(long, value_enum, default_value = "all")]
        set: FigureSet,
        /// Lower discount rate for fig5 (required for fig5).
        #[arg(long)]
        r_low: Option<f64>,
        /// Higher discount rate for fig5 (required for fig5).
        #[arg(long)]
        r_high: Option<f64>,
        /// Points per curve.
        #[arg(long, default_value_t = 401)]
        grid: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Overshoot,
    BridgeMax,
}

impl From<SchemeArg> for ReflectionScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Overshoot => ReflectionScheme::Overshoot,
            SchemeArg::BridgeMax => ReflectionScheme::BridgeMax,
        }
    }
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidPrimitive(_)
        | Error::AssumptionViolated { .. }
        | Error::PartitionInvalid(_)
        | Error::GridTooCoarse(_) => 2,
        Error::NoSignChange { .. }
        | Error::MaxIterations(_)
        | Error::StepUnderflow(_)
        | Error::ConvergenceFailure(_)
        | Error::InsufficientSamples { .. } => 3,
        _ => 1,
    }
}

/// Sizes the global rayon pool from [`THREADS_ENV`], if set.
pub fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidPrimitive(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // A second initialisation (e.g. in tests) keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args`, runs the subcommand and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return exit_code(&e);
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed command line. `Ok` carries the exit code (0, or 4 for a
/// failed verification).
pub fn run(cli: &Cli) -> Result<i32> {
    let out = Output {
        dir: cli.out_dir.clone(),
    };
    match &cli.command {
        Command::SolveCoop { params, grid } => {
            let p = params.resolve(true)?;
            let team = p.n_players as f64;
            let sol = solve_cooperative(&p, team)?;
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => out.json("solve-coop.json", &sol)?,
                Format::Csv => {
                    let rows = sample(sol.a_star, *grid, |a| {
                        let k = if a < sol.a_star { team } else { 0.0 };
                        vec![a, k, sol.value.value(a), complete_info_value(&p, team, a).to_f64()]
                    });
                    out.csv("solve-coop.csv", &["a", "k_total", "u_star", "u_hat"], &rows)?
                }
            }
        }
        Command::SolveSymmetric { params, tol, grid } => {
            let p = params.resolve(true)?;
            let eq = solve_symmetric(&p, p.n_players as f64, *tol)?;
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => out.json("solve-symmetric.json", &eq)?,
                Format::Csv => {
                    let rows = sample(eq.a_tilde, *grid, |a| vec![a, k_dagger(&eq, a), eq.value.value(a)]);
                    out.csv("solve-symmetric.csv", &["a", "k", "u"], &rows)?
                }
            }
        }
        Command::SolveAsymmetric {
            params,
            partition,
            pareto_eps,
            max_cells,
            tol,
            grid,
        } => {
            let p = params.resolve(true)?;
            let n = p.n_players as usize;
            let eq = match pareto_eps {
                Some(eps) => construct_pareto(&p, n, *eps, *tol, *max_cells)?,
                None => construct_equilibrium(&p, n, partition, *tol)?,
            };
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => out.json("solve-asymmetric.json", &eq)?,
                Format::Csv => {
                    let (header, rows) = asymmetric_grid(&eq, *grid);
                    let header: Vec<&str> = header.iter().map(String::as_str).collect();
                    out.csv("solve-asymmetric.csv", &header, &rows)?
                }
            }
        }
        Command::Verify {
            params,
            profile,
            partition,
            grid,
            tol,
            dp_da,
        } => {
            let p = params.resolve(true)?;
            let (view, sym) = equilibrium_view(&p, profile, partition)?;
            let report = check_equilibrium(&view, *grid, *tol);
            let dp_deviation = match dp_da {
                Some(da) => {
                    let sym = sym.ok_or_else(|| {
                        Error::InvalidPrimitive("the DP deviation oracle needs --profile symmetric".into())
                    })?;
                    Some(dp_deviation_gain(&p, &sym, *da)?)
                }
                None => None,
            };
            let dp_pass = dp_deviation.is_none_or(|d| d.gain <= *tol);
            let pass = report.all_pass() && dp_pass;
            let result = VerifyOutput {
                profile: profile.clone(),
                pass,
                report,
                dp_deviation,
            };
            out.json("verify.json", &result)?;
            if !pass {
                for (name, ok) in result.report.summary() {
                    if !ok {
                        eprintln!("verify: {name} failed");
                    }
                }
                if !dp_pass {
                    eprintln!("verify: DP deviation gain exceeds tolerance");
                }
                return Ok(4);
            }
        }
        Command::Sim {
            params,
            profile,
            paths,
            dt,
            horizon,
            seed,
            a0,
            antithetic,
            scheme,
            paths_csv,
            samples,
        } => {
            let p = params.resolve(true)?;
            let prof = strategy_profile(&p, profile)?;
            let mut cfg = SimConfig::new(*paths, *dt, *a0, *seed);
            cfg.horizon = *horizon;
            cfg.antithetic = *antithetic;
            cfg.scheme = (*scheme).into();
            cfg.record_paths = paths_csv.is_some();
            let mut res = simulate(&p, &prof, &cfg)?;
            if let Some(path) = paths_csv {
                let file = fs::File::create(path)?;
                write_paths_csv(&res, std::io::BufWriter::new(file))?;
            }
            res.per_path = None;
            if !samples {
                res.s_bar.clear();
                res.x_bar.clear();
            }
            out.json("sim.json", &res)?;
        }
        Command::Sweep {
            params,
            over,
            from,
            to,
            step,
            points,
            model,
            tol,
        } => {
            let needs_n = *over == SweepOver::R;
            let mut p = params.resolve(needs_n)?;
            if !needs_n {
                p.n_players = params.n.unwrap_or(1);
            }
            let values = axis_values(*from, *to, *step, *points)?;
            let axis = match over {
                SweepOver::N => SweepAxis::Players(values),
                SweepOver::R => SweepAxis::Discount(values),
            };
            let fmt = cli.format.unwrap_or(Format::Csv);
            match model {
                SweepModel::Coop => {
                    let rows = coop_sweep(&p, &axis);
                    match fmt {
                        Format::Json => out.json("sweep.json", &rows)?,
                        Format::Csv => {
                            let recs: Vec<Vec<String>> = rows
                                .iter()
                                .map(|r| {
                                    vec![
                                        num(r.n_players),
                                        num(r.r),
                                        num(r.rho),
                                        num(r.theta),
                                        r.a_star.to_string(),
                                        r.u_star_0.to_string(),
                                        r.u_hat_0.to_string(),
                                        r.class.label().to_string(),
                                    ]
                                })
                                .collect();
                            out.csv_strings("sweep.csv", &COOP_CSV_HEADER, &recs)?
                        }
                    }
                }
                SweepModel::Symmetric => {
                    let rows = symmetric_sweep(&p, &axis, *tol);
                    match fmt {
                        Format::Json => out.json("sweep.json", &rows)?,
                        Format::Csv => {
                            let recs: Vec<Vec<String>> = rows
                                .iter()
                                .map(|r| {
                                    vec![
                                        num(r.n_players),
                                        num(r.r),
                                        num(r.rho),
                                        num(r.theta),
                                        r.a_tilde.to_string(),
                                        r.a_dagger.to_string(),
                                        r.binding.to_string(),
                                        r.u0.to_string(),
                                        num(r.k0),
                                        r.assumption_violated.to_string(),
                                    ]
                                })
                                .collect();
                            out.csv_strings("sweep.csv", &SYM_CSV_HEADER, &recs)?
                        }
                    }
                }
            }
        }
        Command::Figures {
            set,
            r_low,
            r_high,
            grid,
        } => {
            let dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("figures"));
            write_figures(&dir, *set, *r_low, *r_high, *grid)?;
            println!("{}", dir.join(MANIFEST_FILE).display());
        }
    }
    Ok(0)
}

impl ParamArgs {
    /// Builds the parameter set. With `need_n`, a team size must come from
    /// `--n` or the file.
    pub fn resolve(&self, need_n: bool) -> Result<ModelParams> {
        let mut p = if let Some(path) = &self.params {
            let text = fs::read_to_string(path)?;
            // A missing n_players is filled from --n before validation.
            let mut raw: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidPrimitive(format!("{}: {e}", path.display())))?;
            if let (Some(n), Some(obj)) = (self.n, raw.as_object_mut()) {
                obj.insert("n_players".into(), n.into());
            }
            serde_json::from_value::<ModelParams>(raw)
                .map_err(|e| Error::InvalidPrimitive(format!("{}: {e}", path.display())))?
        } else {
            let n = match self.n {
                Some(n) => n,
                None if need_n => return Err(Error::InvalidPrimitive("--n is required".into())),
                None => 1,
            };
            let p = match (self.rho, self.theta, self.r, self.mu, self.sigma) {
                (Some(rho), Some(theta), None, None, None) => {
                    if !(rho > 0.0) || !rho.is_finite() {
                        return Err(Error::InvalidPrimitive(format!("rho must be positive, got {rho}")));
                    }
                    ModelParams::from_rho_theta(rho, theta, n)
                }
                (None, None, Some(r), Some(mu), Some(sigma)) => ModelParams::new(r, mu, sigma, n),
                _ => {
                    return Err(Error::InvalidPrimitive(
                        "give --params FILE, --rho and --theta, or --r, --mu and --sigma".into(),
                    ))
                }
            };
            p.check_primitives()?;
            p
        };
        if let Some(n) = self.n {
            p.n_players = n;
        }
        Ok(p)
    }
}

/// `verify` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub profile: String,
    pub pass: bool,
    pub report: VerificationReport,
    pub dp_deviation: Option<DpDeviation>,
}

fn load_profile(path: &str) -> Result<StrategyProfile> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidPrimitive(format!("{path}: {e}")))
}

fn strategy_profile(p: &ModelParams, which: &str) -> Result<StrategyProfile> {
    let n = p.n_players as usize;
    Ok(match which {
        "coop" => solve_cooperative(p, n as f64)?.profile(n),
        "symmetric" => solve_symmetric(p, n as f64, 1e-12)?.profile(),
        "asymmetric" => construct_equilibrium(p, n, &[], 1e-12)?.profile(),
        path => load_profile(path)?,
    })
}

fn equilibrium_view(
    p: &ModelParams,
    which: &str,
    partition: &[f64],
) -> Result<(EquilibriumView, Option<SymmetricEquilibrium>)> {
    let n = p.n_players as usize;
    Ok(match which {
        "coop" => (EquilibriumView::from_cooperative(p, &solve_cooperative(p, n as f64)?, n), None),
        "symmetric" => {
            let eq = solve_symmetric(p, n as f64, 1e-12)?;
            (EquilibriumView::from_symmetric(p, &eq), Some(eq))
        }
        "asymmetric" => (
            EquilibriumView::from_asymmetric(p, &construct_equilibrium(p, n, partition, 1e-12)?),
            None,
        ),
        path => (EquilibriumView::from_profile(p, load_profile(path)?, 1e-10)?, None),
    })
}

fn axis_values(from: f64, to: f64, step: Option<f64>, points: Option<usize>) -> Result<Vec<f64>> {
    if !from.is_finite() || !to.is_finite() || to < from {
        return Err(Error::InvalidPrimitive(format!("empty sweep range [{from}, {to}]")));
    }
    if let Some(m) = points {
        if m == 0 {
            return Err(Error::InvalidPrimitive("--points must be positive".into()));
        }
        if m == 1 {
            return Ok(vec![from]);
        }
        return Ok((0..m).map(|i| from + (to - from) * i as f64 / (m - 1) as f64).collect());
    }
    let step = step.unwrap_or(1.0);
    if !(step > 0.0) {
        return Err(Error::InvalidPrimitive(format!("--step must be positive, got {step}")));
    }
    let count = ((to - from) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| from + step * i as f64).collect())
}

/// `grid` points on `[0, 1.1·end]`, each mapped to a row.
fn sample(end: f64, grid: usize, row: impl Fn(f64) -> Vec<f64>) -> Vec<Vec<f64>> {
    let hi = 1.1 * end.max(1e-3);
    let m = grid.max(2);
    (0..m).map(|i| row(hi * i as f64 / (m - 1) as f64)).collect()
}

fn asymmetric_grid(eq: &AsymmetricEquilibrium, grid: usize) -> (Vec<String>, Vec<Vec<f64>>) {
    let n = eq.strategies.len();
    let mut header = vec!["a".to_string(), "u_bar".to_string()];
    header.extend((0..n).map(|i| format!("k_{i}")));
    header.extend((0..n).map(|i| format!("u_{i}")));
    let rows = sample(eq.a_flat(), grid, |a| {
        let mut row = vec![a, eq.average.u_bar.value(a)];
        row.extend(eq.strategies.iter().map(|s| s.eval(a)));
        row.extend(eq.payoffs.iter().map(|u| u.value(a)));
        row
    });
    (header, rows)
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    fn emit(&self, name: &str, body: &[u8]) -> Result<()> {
        match &self.dir {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                fs::write(dir.join(name), body)?;
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(body)?;
                stdout.flush()?;
            }
        }
        Ok(())
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_vec_pretty(value)?;
        body.push(b'\n');
        self.emit(name, &body)
    }

    fn csv(&self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let recs: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|&x| num(x)).collect()).collect();
        self.csv_strings(name, header, &recs)
    }

    fn csv_strings(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        self.emit(name, &csv_bytes(header, rows)?)
    }
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

// ---------------------------------------------------------------------------
// Figure data

pub const MANIFEST_FILE: &str = "manifest.json";

/// Index of the CSV files written by `figures`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FigureManifest {
    pub figures: Vec<FigureEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureEntry {
    /// `fig1` … `fig5`.
    pub id: String,
    pub title: String,
    /// Parameter set the data was computed at.
    pub params: serde_json::Value,
    pub series: Vec<SeriesEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesEntry {
    pub name: String,
    /// CSV file, relative to the manifest.
    pub path: String,
    pub x_column: String,
    pub y_column: String,
    pub x_label: String,
    pub y_label: String,
    /// Reference thresholds to mark on the x axis.
    pub annotations: Vec<Annotation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub name: String,
    pub value: f64,
}

fn ann(pairs: &[(&str, f64)]) -> Vec<Annotation> {
    pairs
        .iter()
        .map(|&(name, value)| Annotation {
            name: name.to_string(),
            value,
        })
        .collect()
}

fn series(name: &str, path: &str, x: &str, y: &str, labels: (&str, &str), annotations: Vec<Annotation>) -> SeriesEntry {
    SeriesEntry {
        name: name.to_string(),
        path: path.to_string(),
        x_column: x.to_string(),
        y_column: y.to_string(),
        x_label: labels.0.to_string(),
        y_label: labels.1.to_string(),
        annotations,
    }
}

// Frozen figure parameter sets.
const FIG_RHO: f64 = 2.0;
const FIG_THETA: f64 = -1.0;
const FIG5_THETA: f64 = -0.09;
const TIGHT: f64 = 1e-12;

/// Writes the CSVs of `set` into `dir` and the manifest next to them.
pub fn write_figures(dir: &Path, set: FigureSet, r_low: Option<f64>, r_high: Option<f64>, grid: usize) -> Result<FigureManifest> {
    fs::create_dir_all(dir)?;
    let wanted = |f: FigureSet| set == FigureSet::All || set == f;
    let mut manifest = FigureManifest::default();
    let grid = grid.max(2);
    if wanted(FigureSet::Fig5) && (r_low.is_none() || r_high.is_none()) {
        return Err(Error::InvalidPrimitive("fig5 needs --r-low and --r-high".into()));
    }
    if wanted(FigureSet::Fig1) {
        manifest.figures.push(fig1(dir, grid)?);
    }
    if wanted(FigureSet::Fig2) {
        manifest.figures.push(fig2(dir, grid)?);
    }
    if wanted(FigureSet::Fig3) {
        manifest.figures.push(fig3(dir, grid)?);
    }
    if wanted(FigureSet::Fig4) {
        manifest.figures.push(fig4(dir, grid)?);
    }
    if wanted(FigureSet::Fig5) {
        manifest
            .figures
            .push(fig5(dir, r_low.unwrap_or_default(), r_high.unwrap_or_default(), grid)?);
    }
    let mut body = serde_json::to_vec_pretty(&manifest)?;
    body.push(b'\n');
    fs::write(dir.join(MANIFEST_FILE), body)?;
    Ok(manifest)
}

fn write_csv(dir: &Path, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let recs: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|&x| num(x)).collect()).collect();
    fs::write(dir.join(name), csv_bytes(header, &recs)?)?;
    Ok(())
}

fn linspace(hi: f64, m: usize) -> impl Iterator<Item = f64> {
    (0..m).map(move |i| hi * i as f64 / (m - 1) as f64)
}

fn fig_params(n: u32) -> ModelParams {
    ModelParams::from_rho_theta(FIG_RHO, FIG_THETA, n)
}

fn params_json(p: &ModelParams) -> serde_json::Value {
    serde_json::json!({ "rho": p.rho(), "theta": p.theta(), "n_players": p.n_players })
}

fn fig1(dir: &Path, grid: usize) -> Result<FigureEntry> {
    let mut out = Vec::new();
    for n in [2u32, 4] {
        let p = fig_params(n);
        let eq = solve_symmetric(&p, n as f64, TIGHT)?;
        let rows: Vec<Vec<f64>> = linspace(1.2 * eq.a_tilde, grid).map(|a| vec![a, k_dagger(&eq, a)]).collect();
        let file = format!("fig1_n{n}.csv");
        write_csv(dir, &file, &["a", "k"], &rows)?;
        out.push(series(
            &format!("N={n}"),
            &file,
            "a",
            "k",
            ("a", "k"),
            ann(&[("a_tilde", eq.a_tilde), ("a_dagger", eq.a_dagger)]),
        ));
    }
    Ok(FigureEntry {
        id: "fig1".into(),
        title: "Symmetric equilibrium exploration intensity, N=2 (binding) and N=4 (non-binding)".into(),
        params: serde_json::json!({ "rho": FIG_RHO, "theta": FIG_THETA, "n_players": [2, 4] }),
        series: out,
    })
}

fn fig2(dir: &Path, grid: usize) -> Result<FigureEntry> {
    let p = fig_params(2);
    let coop2 = solve_cooperative(&p, 2.0)?;
    let coop1 = solve_cooperative(&p, 1.0)?;
    let sym = solve_symmetric(&p, 2.0, TIGHT)?;
    let rows: Vec<Vec<f64>> = linspace(1.2 * coop2.a_star, grid)
        .map(|a| {
            vec![
                a,
                complete_info_value(&p, 2.0, a).to_f64(),
                coop2.value.value(a),
                sym.value.value(a),
                coop1.value.value(a),
            ]
        })
        .collect();
    let file = "fig2.csv";
    write_csv(dir, file, &["a", "u_hat", "u_star_2", "u_dagger_2", "u_star_1"], &rows)?;
    let marks = ann(&[("a_star_1", coop1.a_star), ("a_tilde", sym.a_tilde), ("a_star_2", coop2.a_star)]);
    // Ordered top to bottom.
    let series = [
        ("complete information", "u_hat"),
        ("cooperative N=2", "u_star_2"),
        ("symmetric equilibrium N=2", "u_dagger_2"),
        ("single agent", "u_star_1"),
    ]
    .iter()
    .map(|&(name, col)| series(name, file, "a", col, ("a", "payoff"), marks.clone()))
    .collect();
    Ok(FigureEntry {
        id: "fig2".into(),
        title: "Payoffs: complete information, cooperative, symmetric equilibrium, single agent".into(),
        params: params_json(&p),
        series,
    })
}

fn fig3(dir: &Path, grid: usize) -> Result<FigureEntry> {
    let p = fig_params(2);
    let coop = solve_cooperative(&p, 2.0)?;
    let sym = solve_symmetric(&p, 2.0, TIGHT)?;
    let asym = construct_equilibrium(&p, 2, &[], TIGHT)?;
    let prof = asym.profile();
    let rows: Vec<Vec<f64>> = linspace(1.1 * coop.a_star, grid)
        .map(|a| {
            let kc = if a < coop.a_star { 2.0 } else { 0.0 };
            vec![a, kc, prof.intensity(a), 2.0 * k_dagger(&sym, a)]
        })
        .collect();
    let file = "fig3.csv";
    write_csv(dir, file, &["a", "k_coop", "k_asym", "k_sym"], &rows)?;
    let marks = ann(&[
        ("a_tilde", sym.a_tilde),
        ("a_flat", asym.a_flat()),
        ("a_star", coop.a_star),
    ]);
    let series = [
        ("cooperative", "k_coop"),
        ("asymmetric equilibrium", "k_asym"),
        ("symmetric equilibrium", "k_sym"),
    ]
    .iter()
    .map(|&(name, col)| series(name, file, "a", col, ("a", "total intensity K"), marks.clone()))
    .collect();
    Ok(FigureEntry {
        id: "fig3".into(),
        title: "Total exploration intensity: cooperative, asymmetric, symmetric".into(),
        params: params_json(&p),
        series,
    })
}

fn fig4(dir: &Path, grid: usize) -> Result<FigureEntry> {
    let p = fig_params(2);
    let sym = solve_symmetric(&p, 2.0, TIGHT)?;
    let asym = construct_equilibrium(&p, 2, &[], TIGHT)?;
    let rows: Vec<Vec<f64>> = linspace(1.1 * asym.a_flat(), grid)
        .map(|a| {
            vec![
                a,
                asym.average.u_bar.value(a),
                asym.payoffs[0].value(a),
                asym.payoffs[1].value(a),
                sym.value.value(a),
            ]
        })
        .collect();
    let file = "fig4.csv";
    write_csv(dir, file, &["a", "u_bar", "u_0", "u_1", "u_dagger"], &rows)?;
    let mut marks = vec![
        ("a_dagger", sym.a_dagger),
        ("a_tilde", sym.a_tilde),
        ("a_flat", asym.a_flat()),
    ];
    if let Some(s) = asym.switch_points.first() {
        marks.push(("a_bar_F", s.a_m_minus));
        marks.push(("a_bar_E", s.a_m_plus));
    }
    let marks = ann(&marks);
    let series = [
        ("asymmetric average", "u_bar"),
        ("player 0", "u_0"),
        ("player 1", "u_1"),
        ("symmetric equilibrium", "u_dagger"),
    ]
    .iter()
    .map(|&(name, col)| series(name, file, "a", col, ("a", "payoff"), marks.clone()))
    .collect();
    Ok(FigureEntry {
        id: "fig4".into(),
        title: "Asymmetric equilibrium payoffs against the symmetric payoff".into(),
        params: params_json(&p),
        series,
    })
}

/// Team sizes for a fig5 curve: `[1, 0.95·n̂]`, where `n̂` bounds the sizes
/// for which the cooperative payoff is finite.
pub fn fig5_team_sizes(r: f64, grid: usize) -> Result<Vec<f64>> {
    let p = ModelParams::new(r, FIG5_THETA, std::f64::consts::SQRT_2, 1);
    p.check_primitives()?;
    let n_hat = critical_limits(&p)
        .n_hat
        .ok_or_else(|| Error::InvalidPrimitive("no finite bound on team size".into()))?;
    let hi = 0.95 * n_hat;
    if hi <= 1.0 {
        return Err(Error::AssumptionViolated {
            team: 1.0,
            value: p.assumption_index(1.0),
        });
    }
    let m = grid.max(2);
    Ok((0..m).map(|i| 1.0 + (hi - 1.0) * i as f64 / (m - 1) as f64).collect())
}

fn fig5(dir: &Path, r_low: f64, r_high: f64, grid: usize) -> Result<FigureEntry> {
    let mut out = Vec::new();
    for (tag, r) in [("r_low", r_low), ("r_high", r_high)] {
        let ns = fig5_team_sizes(r, grid)?;
        let p = ModelParams::new(r, FIG5_THETA, std::f64::consts::SQRT_2, 1);
        let rows = symmetric_sweep(&p, &SweepAxis::Players(ns), TIGHT);
        if let Some(bad) = rows.iter().find(|row| row.a_tilde.is_infinite()) {
            return Err(Error::ConvergenceFailure(format!(
                "no symmetric equilibrium at r = {r}, N = {}",
                bad.n_players
            )));
        }
        let data: Vec<Vec<f64>> = rows
            .iter()
            .map(|row| {
                vec![
                    row.n_players,
                    row.a_dagger.to_f64(),
                    row.a_tilde.to_f64(),
                    if row.binding { 1.0 } else { 0.0 },
                ]
            })
            .collect();
        let file = format!("fig5_{tag}.csv");
        write_csv(dir, &file, &["n_players", "a_dagger", "a_tilde", "binding"], &data)?;
        let limits = critical_limits(&p);
        let mut marks = vec![("r", r), ("n_hat", limits.n_hat.unwrap_or(f64::NAN))];
        if let Some(r_hat) = limits.r_hat {
            marks.push(("r_hat", r_hat));
        }
        let marks = ann(&marks);
        for col in ["a_dagger", "a_tilde"] {
            out.push(series(
                &format!("{col} at r={r}"),
                &file,
                "n_players",
                col,
                ("N", "threshold"),
                marks.clone(),
            ));
        }
    }
    Ok(FigureEntry {
        id: "fig5".into(),
        title: "Symmetric equilibrium thresholds against team size".into(),
        params: serde_json::json!({ "theta": FIG5_THETA, "sigma": std::f64::consts::SQRT_2, "r": [r_low, r_high] }),
        series: out,
    })
}

/// Reads a CSV written by this crate back as numeric columns (`inf` and
/// booleans included).
pub fn read_csv_columns(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for rec in rdr.records() {
        let rec = rec?;
        for (c, field) in cols.iter_mut().zip(rec.iter()) {
            let x = match field {
                "inf" => f64::INFINITY,
                "true" => 1.0,
                "false" => 0.0,
                s => s
                    .parse()
                    .map_err(|_| Error::InvalidPrimitive(format!("{}: bad number {s:?}", path.display())))?,
            };
            c.push(x);
        }
    }
    Ok((header, cols))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("exploration-eq").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn composite_flags_resolve() {
        let cli = parse(&["solve-coop", "--rho", "2", "--theta", "-1", "--n", "2"]);
        let Command::SolveCoop { params, .. } = &cli.command else { panic!() };
        let p = params.resolve(true).unwrap();
        assert_eq!(p, ModelParams::from_rho_theta(2.0, -1.0, 2));
    }

    #[test]
    fn missing_team_size_is_invalid() {
        let cli = parse(&["solve-coop", "--rho", "2", "--theta", "-1"]);
        let Command::SolveCoop { params, .. } = &cli.command else { panic!() };
        assert_eq!(exit_code(&params.resolve(true).unwrap_err()), 2);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::AssumptionViolated { team: 1.0, value: 1.5 }), 2);
        assert_eq!(exit_code(&Error::MaxIterations(3)), 3);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), 1);
    }

    #[test]
    fn axis_values_are_inclusive() {
        assert_eq!(axis_values(1.0, 8.0, None, None).unwrap(), (1..=8).map(f64::from).collect::<Vec<_>>());
        assert_eq!(axis_values(1.0, 2.0, None, Some(3)).unwrap(), vec![1.0, 1.5, 2.0]);
        assert!(axis_values(2.0, 1.0, None, None).is_err());
        assert!(axis_values(1.0, 2.0, Some(0.0), None).is_err());
    }

    #[test]
    fn shortest_round_trip_numbers() {
        for x in [0.1, 1.0 / 3.0, 2.4930e-7, 1e300, -0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn fig5_requires_both_rates() {
        let dir = tempfile::tempdir().unwrap();
        let err = write_figures(dir.path(), FigureSet::Fig5, Some(1.8), None, 10).unwrap_err();
        assert_eq!(exit_code(&err), 2);
    }
}
