//! Command-line driver: parses a scenario config, dispatches the solvers, and
//! writes CSV tables and figure data.
//!
//! Exit codes: 0 success, 2 validation failure (machine-readable error name
//! on stderr), 3 numerical failure (explosion/divergence).

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigError, ScenarioConfig};
use output::{config_hash, CsvWriter};
use twap_equilibrium::calibrate::{implied_mu1, LambdaCurve};
use twap_equilibrium::equilibrium::{self, EquilibriumSolution};
use twap_equilibrium::exputil::{solve_exp, ExpParams};
use twap_equilibrium::montecarlo::{
    liquidity_premium_stats, twap_deviation_stats, SimConfig, SimTarget,
};
use twap_equilibrium::tables;
use twap_equilibrium::vwap::{psi, solve_vwap, VwapParams};
use twap_equilibrium::{
    resolve_mu1, EquilibriumSelector, Error, Grid, ModelParams, TimeFunction,
};

#[derive(Parser)]
#[command(name = "tweq", about = "Intraday benchmark-tracking equilibria", version)]
struct Cli {
    /// Scenario configuration file (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV files
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the grid size N
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Override the Monte Carlo path count
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Override the simulation seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the equilibrium and dump coefficient curves
    Solve,
    /// Reproduce the welfare tables (all selectors x penalty profiles)
    Tables,
    /// Simulate paths and write figure data
    Simulate,
    /// Solve the stochastic-target (volume-curve) model
    Vwap,
    /// Solve the exponential-utility model
    Exp,
    /// Map an estimated price-impact curve to the implied selector
    Calibrate,
}

enum CmdError {
    Config(ConfigError),
    Core(Error),
    Io(std::io::Error),
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Config(e)
    }
}
impl From<Error> for CmdError {
    fn from(e: Error) -> Self {
        CmdError::Core(e)
    }
}
impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Io(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError::Config(e)) => {
            eprintln!("{}: {}", e.name, e.detail);
            ExitCode::from(2)
        }
        Err(CmdError::Core(e)) => {
            eprintln!("{}: {}", e.name(), e);
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
        Err(CmdError::Io(e)) => {
            eprintln!("IoError: {e}");
            ExitCode::from(2)
        }
    }
}

struct Ctx {
    cfg: ScenarioConfig,
    hash: String,
    out: PathBuf,
    grid: Grid,
    params: ModelParams,
}

fn load(cli: &Cli) -> Result<Ctx, CmdError> {
    let path = cli.config.as_ref().ok_or_else(|| {
        CmdError::Config(ConfigError { name: "InvalidConfig", detail: "--config is required".into() })
    })?;
    let text = std::fs::read_to_string(path)?;
    let cfg = ScenarioConfig::parse(&text)?;
    let hash = config_hash(&text);
    let n = cfg.grid_size(cli.grid);
    if n < 2 {
        return Err(CmdError::Config(ConfigError {
            name: "InvalidConfig",
            detail: "grid must have at least 2 cells".into(),
        }));
    }
    let params = cfg.model_params()?;
    Ok(Ctx { cfg, hash, out: cli.out.clone(), grid: Grid::new(n), params })
}

fn run(cli: &Cli) -> Result<(), CmdError> {
    let ctx = load(cli)?;
    match cli.command {
        Command::Solve => cmd_solve(&ctx),
        Command::Tables => cmd_tables(&ctx),
        Command::Simulate => cmd_simulate(cli, &ctx),
        Command::Vwap => cmd_vwap(&ctx),
        Command::Exp => cmd_exp(&ctx),
        Command::Calibrate => cmd_calibrate(&ctx),
    }
}

fn solve_configured(ctx: &Ctx) -> Result<EquilibriumSolution, CmdError> {
    let kappa = ctx.cfg.kappa(&ctx.grid)?;
    let gamma = ctx.cfg.gamma(&ctx.grid)?;
    let selector = ctx.cfg.selector(&ctx.grid)?;
    let mu1 = resolve_mu1(&selector, &ctx.params, &kappa, &gamma)?;
    Ok(equilibrium::solve(&ctx.params, &kappa, &gamma, &mu1)?)
}

fn cmd_solve(ctx: &Ctx) -> Result<(), CmdError> {
    let sol = solve_configured(ctx)?;
    let n = ctx.grid.n();
    let mut coeff = CsvWriter::create(
        &ctx.out,
        "coefficients.csv",
        &ctx.hash,
        n,
        &["t", "g0", "g", "sigma_w", "mu0", "mu1", "mu2", "mu3", "mu4", "mu5"],
    )?;
    for k in 0..=n {
        coeff.row(&[
            ctx.grid.node(k),
            sol.g0.value(k),
            sol.g.value(k),
            sol.sigma_w.value(k),
            sol.mu0.value(k),
            sol.mu1.value(k),
            sol.mu2.value(k),
            sol.mu3.value(k),
            sol.mu4.value(k),
            sol.mu5.value(k),
        ])?;
    }
    coeff.finish()?;

    let s0 = sol.price(ctx.params.w0, ctx.params.d0, 0.0);
    let mut summary = CsvWriter::create(
        &ctx.out,
        "summary.csv",
        &ctx.hash,
        n,
        &["s0", "g_at_0", "sigma_w_at_0", "second_order_margin"],
    )?;
    summary.row(&[s0, sol.g.value(0), sol.sigma_w.value(0), sol.second_order_margin()])?;
    summary.finish()?;
    Ok(())
}

fn cmd_tables(ctx: &Ctx) -> Result<(), CmdError> {
    let t1 = tables::table_one(&ctx.params, &ctx.grid)?;
    let t2 = tables::table_two(&ctx.params, &ctx.grid)?;
    let n = ctx.grid.n();
    let labels = ["k1", "k2", "k3", "k4"];

    let mut w1 = CsvWriter::create(
        &ctx.out,
        "table1.csv",
        &ctx.hash,
        n,
        &["kappa", "welfare", "radner", "vayanos"],
    )?;
    for (r, label) in labels.iter().enumerate() {
        w1.row_fixed(label, &t1.rows[r], 3)?;
    }
    w1.finish()?;

    let mut w2 = CsvWriter::create(
        &ctx.out,
        "table2.csv",
        &ctx.hash,
        n,
        &["kappa", "welfare", "s0_w0", "trading_profit", "penalty"],
    )?;
    for (r, label) in labels.iter().enumerate() {
        w2.row_fixed(label, &t2.rows[r], 3)?;
    }
    w2.finish()?;
    Ok(())
}

fn cmd_simulate(cli: &Cli, ctx: &Ctx) -> Result<(), CmdError> {
    let kappa = ctx.cfg.kappa(&ctx.grid)?;
    let gamma = ctx.cfg.gamma(&ctx.grid)?;
    let n = ctx.grid.n();

    // comparison curves across the three named selectors
    let selectors = [
        ("welfare", EquilibriumSelector::WelfareMax),
        ("radner", EquilibriumSelector::Radner),
        ("vayanos", EquilibriumSelector::Vayanos),
    ];
    let mut mu1s = Vec::new();
    for (_, sel) in &selectors {
        mu1s.push(resolve_mu1(sel, &ctx.params, &kappa, &gamma)?);
    }
    let sols: Vec<EquilibriumSolution> = mu1s
        .iter()
        .map(|mu1| equilibrium::solve(&ctx.params, &kappa, &gamma, mu1))
        .collect::<Result<_, _>>()?;

    let mut f1 = CsvWriter::create(
        &ctx.out,
        "fig1_mu1.csv",
        &ctx.hash,
        n,
        &["t", "mu1_welfare", "mu1_radner", "mu1_vayanos"],
    )?;
    let mut f2 = CsvWriter::create(
        &ctx.out,
        "fig2_sigmaw.csv",
        &ctx.hash,
        n,
        &["t", "sigma_w_welfare", "sigma_w_radner", "sigma_w_vayanos"],
    )?;
    let mut f3 = CsvWriter::create(
        &ctx.out,
        "fig3_ratio.csv",
        &ctx.hash,
        n,
        &["t", "ratio_welfare", "ratio_radner", "ratio_vayanos"],
    )?;
    for k in 0..=n {
        let t = ctx.grid.node(k);
        f1.row(&[t, mu1s[0].value(k), mu1s[1].value(k), mu1s[2].value(k)])?;
        f2.row(&[
            t,
            sols[0].sigma_w.value(k),
            sols[1].sigma_w.value(k),
            sols[2].sigma_w.value(k),
        ])?;
        let ratio = |mu1: &TimeFunction| {
            2.0 * kappa.value(k) / (2.0 * kappa.value(k) - mu1.value(k))
        };
        f3.row(&[t, ratio(&mu1s[0]), ratio(&mu1s[1]), ratio(&mu1s[2])])?;
    }
    f1.finish()?;
    f2.finish()?;
    f3.finish()?;

    // Monte Carlo overlays for the configured selector
    let sol = solve_configured(ctx)?;
    let sim = SimConfig {
        n_steps: n,
        n_paths: ctx.cfg.paths(cli.paths),
        seed: ctx.cfg.seed(cli.seed),
    };
    let dev = twap_deviation_stats(&sol, &sim, 0)?;
    let mut fd = CsvWriter::create(
        &ctx.out,
        "fig_deviation.csv",
        &ctx.hash,
        n,
        &["t", "empirical_dev_i0", "se", "analytic_dev_i0"],
    )?;
    for k in 0..=n {
        fd.row(&[dev.times[k], dev.emp_mean[k], dev.se_mean[k], dev.analytic_mean[k]])?;
    }
    fd.finish()?;

    let prem = liquidity_premium_stats(&SimTarget::Twap(&sol), &sim)?;
    let mut fp = CsvWriter::create(
        &ctx.out,
        "figD_premium.csv",
        &ctx.hash,
        n,
        &["t", "emp_mean", "emp_sd", "se_mean", "analytic_mean", "analytic_sd"],
    )?;
    for k in 0..=n {
        fp.row(&[
            prem.times[k],
            prem.emp_mean[k],
            prem.emp_sd[k],
            prem.se_mean[k],
            prem.analytic_mean[k],
            prem.analytic_sd[k],
        ])?;
    }
    fp.finish()?;

    // long-format dump of the same statistics for downstream tooling
    let mut long = CsvWriter::create(
        &ctx.out,
        "mc_stats.csv",
        &ctx.hash,
        n,
        &["stat", "t", "value", "stderr"],
    )?;
    let sd_se_factor = (0.5 / (sim.n_paths as f64 - 1.0)).sqrt();
    for k in 0..=n {
        long.row_fixed(
            "premium_mean",
            &[prem.times[k], prem.emp_mean[k], prem.se_mean[k]],
            10,
        )?;
        long.row_fixed(
            "premium_sd",
            &[prem.times[k], prem.emp_sd[k], prem.emp_sd[k] * sd_se_factor],
            10,
        )?;
        long.row_fixed(
            "deviation_mean_i0",
            &[dev.times[k], dev.emp_mean[k], dev.se_mean[k]],
            10,
        )?;
    }
    long.finish()?;
    Ok(())
}

fn cmd_vwap(ctx: &Ctx) -> Result<(), CmdError> {
    let sec = ctx.cfg.vwap.as_ref().ok_or_else(|| {
        CmdError::Config(ConfigError {
            name: "InvalidConfig",
            detail: "vwap command needs a [vwap] section".into(),
        })
    })?;
    let vparams = VwapParams::new(ctx.params.clone(), sec.rho)?;
    let kappa = ctx.cfg.kappa(&ctx.grid)?;
    let gamma = ctx.cfg.gamma(&ctx.grid)?;
    let selector = ctx.cfg.selector(&ctx.grid)?;
    let mu1 = resolve_mu1(&selector, &ctx.params, &kappa, &gamma)?;
    let sol = solve_vwap(&vparams, &kappa, &mu1)?;

    let n = ctx.grid.n();
    let cap = ctx.grid.singular_cap();
    let mut w = CsvWriter::create(
        &ctx.out,
        "vwap_coefficients.csv",
        &ctx.hash,
        n,
        &["t", "sigma_w", "sigma_gamma", "g0", "mu2", "mu3", "mu4", "psi0", "psi1"],
    )?;
    for k in 0..=n {
        let t = ctx.grid.node(k);
        // psi explodes at the close; report it at the capped node instead
        let (p0, p1) = psi(t.min(cap)).expect("capped time is inside the domain");
        w.row(&[
            t,
            sol.sigma_w.value(k),
            sol.sigma_gamma.value(k),
            sol.g0.value(k),
            sol.mu2.value(k),
            sol.mu3.value(k),
            sol.mu4.value(k),
            p0,
            p1,
        ])?;
    }
    w.finish()?;
    Ok(())
}

fn cmd_exp(ctx: &Ctx) -> Result<(), CmdError> {
    let sec = ctx.cfg.exp.as_ref().ok_or_else(|| {
        CmdError::Config(ConfigError {
            name: "InvalidConfig",
            detail: "exp command needs an [exp] section".into(),
        })
    })?;
    let eparams = ExpParams::new(ctx.params.clone(), sec.tau)?;
    let kappa = ctx.cfg.kappa(&ctx.grid)?;
    let gamma = ctx.cfg.gamma(&ctx.grid)?;
    let selector = ctx.cfg.selector(&ctx.grid)?;
    // the exponential second-order condition is weaker than the risk-neutral
    // one, so custom impacts go straight to the solver's post-hoc check
    let mu1 = match selector {
        EquilibriumSelector::Custom(f) => f,
        other => resolve_mu1(&other, &ctx.params, &kappa, &gamma)?,
    };
    let sol = solve_exp(&eparams, &kappa, &gamma, &mu1)?;

    let n = ctx.grid.n();
    let mut w = CsvWriter::create(
        &ctx.out,
        "exp_coefficients.csv",
        &ctx.hash,
        n,
        &[
            "t", "beta4", "sigma_w", "beta0", "beta1", "beta2", "beta3", "beta5", "beta6",
            "beta8", "g", "g0",
        ],
    )?;
    for k in 0..=n {
        w.row(&[
            ctx.grid.node(k),
            sol.beta4.value(k),
            sol.sigma_w.value(k),
            sol.beta0.value(k),
            sol.beta1.value(k),
            sol.beta2.value(k),
            sol.beta3.value(k),
            sol.beta5.value(k),
            sol.beta6.value(k),
            sol.beta8.value(k),
            sol.g.value(k),
            sol.g0.value(k),
        ])?;
    }
    w.finish()?;
    Ok(())
}

fn read_lambda_csv(path: &Path, grid: &Grid) -> Result<TimeFunction, CmdError> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<(f64, f64)> = Vec::new();
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| {
        CmdError::Config(ConfigError { name: "InvalidConfig", detail: "empty lambda CSV".into() })
    })?;
    if header
        .split(',')
        .next()
        .map(|c| c.trim().parse::<f64>().is_ok())
        .unwrap_or(false)
    {
        return Err(CmdError::Config(ConfigError {
            name: "InvalidConfig",
            detail: "lambda CSV must start with a header row".into(),
        }));
    }
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cells = line.split(',');
        let parse = |c: Option<&str>| {
            c.and_then(|v| v.trim().parse::<f64>().ok()).ok_or_else(|| {
                CmdError::Config(ConfigError {
                    name: "InvalidConfig",
                    detail: format!("bad lambda CSV row {}", i + 2),
                })
            })
        };
        let t = parse(cells.next())?;
        let lam = parse(cells.next())?;
        rows.push((t, lam));
    }
    if rows.len() < 2 || rows.first().unwrap().0 > 0.0 || rows.last().unwrap().0 < 1.0 {
        return Err(CmdError::Config(ConfigError {
            name: "InvalidConfig",
            detail: "lambda CSV must cover t in [0, 1]".into(),
        }));
    }
    // linear interpolation onto the grid
    let mut values = Vec::with_capacity(grid.n() + 1);
    let mut j = 0usize;
    for k in 0..=grid.n() {
        let t = grid.node(k);
        while j + 1 < rows.len() - 1 && rows[j + 1].0 <= t {
            j += 1;
        }
        let (t0, v0) = rows[j];
        let (t1, v1) = rows[j + 1];
        let w = if t1 > t0 { ((t - t0) / (t1 - t0)).clamp(0.0, 1.0) } else { 0.0 };
        values.push(v0 + w * (v1 - v0));
    }
    Ok(TimeFunction::from_values(values))
}

fn cmd_calibrate(ctx: &Ctx) -> Result<(), CmdError> {
    let sec = ctx.cfg.calibrate.as_ref().ok_or_else(|| {
        CmdError::Config(ConfigError {
            name: "InvalidConfig",
            detail: "calibrate command needs a [calibrate] section".into(),
        })
    })?;
    let kappa = ctx.cfg.kappa(&ctx.grid)?;
    let lambda = read_lambda_csv(Path::new(&sec.lambda_csv), &ctx.grid)?;
    let (mu1, phi1) = implied_mu1(&LambdaCurve::new(lambda), &ctx.params, &kappa)?;

    let n = ctx.grid.n();
    let mut w = CsvWriter::create(
        &ctx.out,
        "calibration_mu1.csv",
        &ctx.hash,
        n,
        &["t", "mu1", "kappa", "margin"],
    )?;
    for k in 0..=n {
        w.row(&[
            ctx.grid.node(k),
            mu1.value(k),
            kappa.value(k),
            kappa.value(k) - mu1.value(k),
        ])?;
    }
    w.finish()?;

    let mut s = CsvWriter::create(
        &ctx.out,
        "calibration_summary.csv",
        &ctx.hash,
        n,
        &["phi1", "min_margin"],
    )?;
    let min_margin = (0..=n)
        .map(|k| kappa.value(k) - mu1.value(k))
        .fold(f64::INFINITY, f64::min);
    s.row(&[phi1, min_margin])?;
    s.finish()?;
    Ok(())
}
