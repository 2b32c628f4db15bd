//! Command-line front end.
//!
//! Every subcommand reads its JSON input from `--config`, writes CSV or
//! JSON artifacts into `--out` and prints a short summary on stdout.
//! Diagnostics go to stderr, filtered by the `CSA_UEP_LOG` variable.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use crate::delay::{mean_delay_class, run_delay_sweep, DelayStats};
use crate::density_evolution::{de_trajectory, multi_edge_threshold, threshold, DeParams};
use crate::error::{Error, Result};
use crate::error_floor::PreparedCatalog;
use crate::model::{users_for_load, ScenarioConfig};
use crate::optimizer::{OptimizationProblem, OptimizationResult, Optimizer};
use crate::presets::{design, TABLE1};
use crate::sim::{run_monte_carlo, run_monte_carlo_traced};
use crate::stopping_set::{enumerate_stopping_sets, StoppingSetCatalog, MAX_DEGREE};

pub const DEFAULT_PLR_TRIALS: u64 = 1_000_000;
pub const DEFAULT_DELAY_TRIALS: u64 = 100_000;

/// Exit status for a design problem with no feasible solution under
/// `--require-feasible`.
pub const EXIT_INFEASIBLE: i32 = 2;
/// Exit status for invalid input and every other failure.
pub const EXIT_ERROR: i32 = 1;

#[derive(Parser, Debug)]
#[command(name = "csa-uep", version, about = "Coded slotted ALOHA with unequal error protection")]
pub struct Cli {
    #[command(flatten)]
    pub opts: Options,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Options {
    /// Scenario JSON (or optimization problem JSON for `optimize`).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory for output artifacts.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Frames per load (defaults: 1e6 for PLR, 1e5 for delay).
    #[arg(long, global = true, value_name = "N")]
    pub trials: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    pub workers: usize,
    /// Load sweep, inclusive of STOP.
    #[arg(long, global = true, value_name = "START:STOP:STEP")]
    pub grid: Option<String>,
    /// Largest stopping-set size in the error-floor catalog.
    #[arg(long, global = true, value_name = "N")]
    pub nu_max: Option<usize>,
    /// Keep only minimal stopping sets.
    #[arg(long, global = true, value_name = "BOOL")]
    pub minimal_only: Option<bool>,
    /// Exit with status 2 when the design problem is infeasible.
    #[arg(long, global = true)]
    pub require_feasible: bool,
    /// Reuse (or create) a stopping-set catalog file in the output directory.
    #[arg(long, global = true)]
    pub catalog_cache: bool,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Monte Carlo packet loss rate per class.
    Simulate {
        /// Also write per-frame unresolved counts as JSON lines.
        #[arg(long)]
        trace: bool,
    },
    /// Asymptotic threshold by density evolution.
    Threshold {
        #[arg(long, default_value_t = crate::density_evolution::DEFAULT_TOL)]
        tol: f64,
        /// Also write the erasure trajectory at this load.
        #[arg(long, value_name = "G")]
        trajectory: Option<f64>,
    },
    /// Error-floor PLR prediction per class.
    Errorfloor,
    /// Degree-distribution design for per-class PLR targets.
    Optimize,
    /// Decoding delay under the slot-by-slot decoder.
    Delay,
    /// Regenerates the published design table or figure data.
    Reproduce {
        #[arg(value_enum)]
        what: Reproduce,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reproduce {
    Table1,
    Fig4,
    Fig56,
}

/// Inclusive load sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("grid must be START:STOP:STEP, got {text:?}"));
        let parts: Vec<f64> =
            text.split(':').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else { return Err(bad()) };
        if step.is_nan() || step <= 0.0 {
            return Err(Error::InvalidConfig("grid step must be > 0".into()));
        }
        if !(start > 0.0 && stop >= start && stop.is_finite()) {
            return Err(Error::InvalidConfig(format!("grid needs 0 < START ≤ STOP, got {text:?}")));
        }
        Ok(Self { start, stop, step })
    }

    /// Loads `start + i·step` up to `stop` (with a small slack), rounded to
    /// nine decimals so they print cleanly.
    pub fn loads(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| ((self.start + i as f64 * self.step) * 1e9).round() / 1e9).collect()
    }
}

enum Status {
    Done,
    Infeasible,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("CSA_UEP_LOG", "warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(Status::Done) => 0,
        Ok(Status::Infeasible) => EXIT_INFEASIBLE,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn execute(cli: &Cli) -> Result<Status> {
    let opts = &cli.opts;
    if opts.trials == Some(0) {
        return Err(Error::InvalidConfig("trials must be ≥ 1".into()));
    }
    let grid = opts.grid.as_deref().map(Grid::parse).transpose()?;
    fs::create_dir_all(&opts.out)?;
    match &cli.command {
        Command::Simulate { trace } => simulate(opts, grid, *trace),
        Command::Threshold { tol, trajectory } => threshold_cmd(opts, *tol, *trajectory),
        Command::Errorfloor => errorfloor(opts, grid),
        Command::Optimize => optimize_cmd(opts),
        Command::Delay => delay_cmd(opts, grid),
        Command::Reproduce { what: Reproduce::Table1 } => table1(opts),
        Command::Reproduce { what: Reproduce::Fig4 } => fig4(opts, grid),
        Command::Reproduce { what: Reproduce::Fig56 } => fig56(opts, grid),
    }
}

fn require_config(opts: &Options) -> Result<&Path> {
    opts.config.as_deref().ok_or_else(|| Error::InvalidConfig("--config is required".into()))
}

fn load_scenario(opts: &Options) -> Result<ScenarioConfig> {
    let path = require_config(opts)?;
    let mut config = ScenarioConfig::from_json(&fs::read_to_string(path)?)?;
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn loads_or(grid: Option<Grid>, fallback: &[f64]) -> Vec<f64> {
    grid.map_or_else(|| fallback.to_vec(), |g| g.loads())
}

fn csv_writer(opts: &Options, name: &str) -> Result<csv::Writer<fs::File>> {
    let path = opts.out.join(name);
    info!("writing {}", path.display());
    Ok(csv::Writer::from_path(path)?)
}

fn write_json<T: Serialize>(opts: &Options, name: &str, value: &T) -> Result<()> {
    let path = opts.out.join(name);
    info!("writing {}", path.display());
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(w.flush()?)
}

#[derive(Serialize)]
struct PlrRow {
    g: f64,
    class: usize,
    users_observed: u64,
    users_unresolved: u64,
    plr: f64,
    ci_halfwidth: f64,
}

fn simulate(opts: &Options, grid: Option<Grid>, trace: bool) -> Result<Status> {
    let config = load_scenario(opts)?;
    config.validate()?;
    let trials = opts.trials.unwrap_or(DEFAULT_PLR_TRIALS);
    let mut out = csv_writer(opts, "simulate.csv")?;
    for g in loads_or(grid, &[config.g]) {
        let scenario = config.at_load(g);
        info!("simulating g = {g} with {trials} frames");
        let outcome = if trace {
            let file = BufWriter::new(fs::File::create(opts.out.join(format!("trace_g{g}.jsonl")))?);
            run_monte_carlo_traced(&scenario, trials, opts.workers, file)?
        } else {
            run_monte_carlo(&scenario, trials, opts.workers)?
        };
        for (k, c) in outcome.per_class.iter().enumerate() {
            println!("g = {g}  class {}: PLR = {:.4e} ± {:.1e}", k + 1, c.plr, c.ci_halfwidth);
            out.serialize(PlrRow {
                g,
                class: k + 1,
                users_observed: c.users_observed,
                users_unresolved: c.users_unresolved,
                plr: c.plr,
                ci_halfwidth: c.ci_halfwidth,
            })?;
        }
    }
    out.flush()?;
    Ok(Status::Done)
}

#[derive(Serialize)]
struct ThresholdReport {
    tol: f64,
    threshold: f64,
    multi_edge_threshold: f64,
}

fn threshold_cmd(opts: &Options, tol: f64, trajectory: Option<f64>) -> Result<Status> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidConfig(format!("tolerance {tol} must lie in (0, 1)")));
    }
    let config = load_scenario(opts)?;
    for class in &config.classes {
        class.validate()?;
    }
    let avg = config.average_distribution()?;
    let single = threshold(&avg, tol);
    let multi = multi_edge_threshold(&config.classes, tol, &DeParams::default());
    let digits = (-tol.log10()).ceil().max(1.0) as usize;
    println!("g* = {:.digits$} ± {tol}", single.threshold);
    write_json(
        opts,
        "threshold.json",
        &ThresholdReport { tol, threshold: single.threshold, multi_edge_threshold: multi.threshold },
    )?;
    if let Some(g) = trajectory {
        let (fp, xi) = de_trajectory(&avg, g, &DeParams::default());
        info!("trajectory at g = {g}: converged = {}", fp.converged);
        let mut out = csv_writer(opts, "de_trajectory.csv")?;
        out.write_record(["iteration", "xi"])?;
        for (i, x) in xi.iter().enumerate() {
            out.write_record([i.to_string(), x.to_string()])?;
        }
        out.flush()?;
    }
    Ok(Status::Done)
}

fn catalog(opts: &Options, nu_max: usize, d_max: usize) -> Result<StoppingSetCatalog> {
    let cached = opts.out.join(format!("catalog_nu{nu_max}_d{d_max}.json"));
    if opts.catalog_cache && cached.exists() {
        let catalog = StoppingSetCatalog::from_json(&fs::read_to_string(&cached)?)?;
        if catalog.nu_max == nu_max && catalog.d_max == d_max {
            info!("loaded {} stopping sets from {}", catalog.len(), cached.display());
            return Ok(catalog);
        }
        warn!("ignoring {}: built for different limits", cached.display());
    }
    let catalog = enumerate_stopping_sets(nu_max, d_max)?;
    info!("enumerated {} stopping sets (nu ≤ {nu_max}, degree ≤ {d_max})", catalog.len());
    if opts.catalog_cache {
        fs::write(&cached, catalog.to_json()?)?;
    }
    Ok(catalog)
}

#[derive(Serialize)]
struct FloorRow {
    g: f64,
    class: usize,
    plr_prediction: f64,
}

fn errorfloor(opts: &Options, grid: Option<Grid>) -> Result<Status> {
    let config = load_scenario(opts)?;
    config.validate()?;
    let d_max = config.classes.iter().map(|c| c.dist.max_degree()).max().unwrap_or(2);
    if d_max > MAX_DEGREE {
        return Err(Error::InvalidConfig(format!("error-floor prediction supports degrees up to {MAX_DEGREE}")));
    }
    let mut cat = catalog(opts, opts.nu_max.unwrap_or(4), d_max)?;
    if opts.minimal_only.unwrap_or(false) {
        cat = cat.minimal_only();
    }
    let mut out = csv_writer(opts, "errorfloor.csv")?;
    for g in loads_or(grid, &[config.g]) {
        let m = users_for_load(g, config.n);
        let predictions = PreparedCatalog::new(&cat, config.n, m).plr_classes(&config.classes)?;
        for (k, p) in predictions.into_iter().enumerate() {
            println!("g = {g}  class {}: predicted PLR = {p:.4e}", k + 1);
            out.serialize(FloorRow { g, class: k + 1, plr_prediction: p })?;
        }
    }
    out.flush()?;
    Ok(Status::Done)
}

fn apply_overrides(opts: &Options, problem: &mut OptimizationProblem) {
    if let Some(nu) = opts.nu_max {
        problem.nu_max = nu;
    }
    if let Some(minimal) = opts.minimal_only {
        problem.minimal_only = minimal;
    }
}

fn solve(opts: &Options, problem: OptimizationProblem) -> Result<OptimizationResult> {
    problem.validate()?;
    let d_max = *problem.allowed_degrees.iter().max().expect("validated");
    let cat = catalog(opts, problem.nu_max, d_max)?;
    let optimizer = Optimizer::with_catalog(problem, &cat)?;
    info!("running {} starts", optimizer.problem().grid_starts().len());
    optimizer.optimize(opts.workers)
}

fn optimize_cmd(opts: &Options) -> Result<Status> {
    let path = require_config(opts)?;
    let mut problem: OptimizationProblem = serde_json::from_str(&fs::read_to_string(path)?)?;
    apply_overrides(opts, &mut problem);
    let result = solve(opts, problem.clone())?;
    write_json(opts, "optimize.json", &result)?;
    print!("{result}\n{}", result.table(&problem.allowed_degrees));
    Ok(if result.feasible || !opts.require_feasible { Status::Done } else { Status::Infeasible })
}

#[derive(Serialize)]
struct PmfRow {
    g: f64,
    class: usize,
    bin_center: f64,
    mass: f64,
}

#[derive(Serialize)]
struct MeanRow {
    g: f64,
    class: usize,
    mean: f64,
    resolved_fraction: f64,
}

fn write_delay(opts: &Options, stats: &[DelayStats]) -> Result<()> {
    let mut pmf = csv_writer(opts, "delay_pmf.csv")?;
    let mut mean = csv_writer(opts, "delay_mean.csv")?;
    for s in stats {
        for (k, c) in s.per_class.iter().enumerate() {
            println!("g = {}  class {}: mean delay = {:.4}", s.load, k + 1, c.mean);
            for (bin_center, mass) in c.pmf() {
                pmf.serialize(PmfRow { g: s.load, class: k + 1, bin_center, mass })?;
            }
            mean.serialize(MeanRow {
                g: s.load,
                class: k + 1,
                mean: c.mean,
                resolved_fraction: c.resolved_fraction(),
            })?;
        }
    }
    pmf.flush()?;
    Ok(mean.flush()?)
}

fn delay_cmd(opts: &Options, grid: Option<Grid>) -> Result<Status> {
    let config = load_scenario(opts)?;
    config.validate()?;
    let trials = opts.trials.unwrap_or(DEFAULT_DELAY_TRIALS);
    let stats = run_delay_sweep(&config, &loads_or(grid, &[config.g]), trials, opts.workers)?;
    write_delay(opts, &stats)?;
    Ok(Status::Done)
}

#[derive(Serialize)]
struct TableEntry<'a> {
    label: &'a str,
    published_threshold: f64,
    result: OptimizationResult,
}

fn table1(opts: &Options) -> Result<Status> {
    let mut entries = Vec::new();
    let mut text = String::new();
    for row in &TABLE1 {
        let mut problem = row.problem();
        apply_overrides(opts, &mut problem);
        info!("optimizing row {}", row.label);
        let result = solve(opts, problem.clone())?;
        let table = result.table(&problem.allowed_degrees);
        if text.is_empty() {
            text.push_str("row | alpha1 | ");
            text.push_str(table.lines().next().unwrap_or_default());
            text.push_str(" | feasible\n");
        }
        let body = table.lines().nth(1).unwrap_or_default();
        text.push_str(&format!("{} | {} | {body} | {}\n", row.label, row.alpha1, result.feasible));
        entries.push(TableEntry { label: row.label, published_threshold: row.threshold, result });
    }
    print!("{text}");
    fs::write(opts.out.join("table1.txt"), &text)?;
    write_json(opts, "table1.json", &entries)?;
    let all_feasible = entries.iter().all(|e| e.result.feasible);
    Ok(if all_feasible || !opts.require_feasible { Status::Done } else { Status::Infeasible })
}

#[derive(Serialize)]
struct Fig4Row<'a> {
    design: &'a str,
    g: f64,
    class: usize,
    plr_sim: f64,
    ci_halfwidth: f64,
    plr_pred: f64,
}

fn fig4(opts: &Options, grid: Option<Grid>) -> Result<Status> {
    let loads = grid.map_or_else(|| Grid { start: 0.1, stop: 1.0, step: 0.05 }.loads(), |g| g.loads());
    let trials = opts.trials.unwrap_or(DEFAULT_PLR_TRIALS);
    let cat = catalog(opts, opts.nu_max.unwrap_or(4), 8)?;
    let cat = if opts.minimal_only.unwrap_or(false) { cat.minimal_only() } else { cat };
    let mut out = csv_writer(opts, "fig4.csv")?;
    for row in TABLE1.iter().filter(|r| r.label.starts_with('b')) {
        for &g in &loads {
            let mut scenario = row.scenario(g);
            if let Some(seed) = opts.seed {
                scenario.seed = seed;
            }
            info!("design {} at g = {g}", row.label);
            let sim = run_monte_carlo(&scenario, trials, opts.workers)?;
            let pred = PreparedCatalog::new(&cat, scenario.n, scenario.m()).plr_classes(&scenario.classes)?;
            for (k, (c, p)) in sim.per_class.iter().zip(pred).enumerate() {
                out.serialize(Fig4Row {
                    design: row.label,
                    g,
                    class: k + 1,
                    plr_sim: c.plr,
                    ci_halfwidth: c.ci_halfwidth,
                    plr_pred: p,
                })?;
            }
        }
    }
    out.flush()?;
    println!("wrote {}", opts.out.join("fig4.csv").display());
    Ok(Status::Done)
}

fn fig56(opts: &Options, grid: Option<Grid>) -> Result<Status> {
    let loads = grid.map_or_else(|| Grid { start: 0.05, stop: 1.0, step: 0.05 }.loads(), |g| g.loads());
    let trials = opts.trials.unwrap_or(DEFAULT_DELAY_TRIALS);
    let row = design("b3").expect("preset row");
    let mut scenario = row.scenario(loads[0]);
    if let Some(seed) = opts.seed {
        scenario.seed = seed;
    }
    for (k, c) in scenario.classes.iter().enumerate() {
        println!("class {}: mean delay as g → 0 = {:.4}", k + 1, mean_delay_class(c));
    }
    let stats = run_delay_sweep(&scenario, &loads, trials, opts.workers)?;
    write_delay(opts, &stats)?;
    Ok(Status::Done)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = Grid::parse("0.1:0.5:0.1").unwrap();
        assert_eq!(g.loads(), vec![0.1, 0.2, 0.3, 0.4, 0.5]);
        assert_eq!(Grid::parse("0.5:0.5:1").unwrap().loads(), vec![0.5]);
        let err = Grid::parse("0.1:0.5:0").unwrap_err().to_string();
        assert!(err.contains("grid step must be > 0"), "{err}");
        assert!(Grid::parse("0.1:0.5").is_err());
        assert!(Grid::parse("0.5:0.1:0.1").is_err());
        assert!(Grid::parse("a:b:c").is_err());
    }

    #[test]
    fn parses_global_flags_after_subcommand() {
        let cli = Cli::try_parse_from([
            "csa-uep",
            "simulate",
            "--config",
            "s.json",
            "--trials",
            "10",
            "--workers",
            "2",
            "--minimal-only",
            "true",
        ])
        .unwrap();
        assert_eq!(cli.opts.trials, Some(10));
        assert_eq!(cli.opts.minimal_only, Some(true));
        assert!(matches!(cli.command, Command::Simulate { trace: false }));
        let cli = Cli::try_parse_from(["csa-uep", "reproduce", "fig56"]).unwrap();
        assert!(matches!(cli.command, Command::Reproduce { what: Reproduce::Fig56 }));
    }
}
