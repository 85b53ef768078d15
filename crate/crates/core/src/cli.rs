//! Command-line front end. Every subcommand reads a JSON config and writes into `--out`.
//!
//! Exit codes: 0 on success, 2 for usage and configuration errors, 3 for numerical failures.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::action::NormIndex;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::hjdqn::{random_policy_curve, train, write_checkpoint, write_curve_csv};
use crate::lab::{
    compare_p, convergence_from, residual_check, solve_classic_on, solve_ladder, sweep_epsilon, sweep_l_from,
    Cell, ExperimentReport,
};
use crate::rollout::rollout;
use crate::solver::{solve_q_l, QTable, SolveStats};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "lipq", version, about = "Lipschitz-constrained Q-function workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Io {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve Q^L on the configured grid and write q.field.
    Solve(Io),
    /// Solve the classical value on the state grid and write classic.field.
    SolveClassic(Io),
    /// Roll out the action dynamics driven by a solved table.
    Rollout(Io),
    /// Sweep L: sweep_l.csv and conv.csv.
    SweepL(Io),
    /// Penalty sweep over epsilons: eps.csv.
    SweepEps(Io),
    /// Compare exponents p: pcomp.csv.
    CompareP(Io),
    /// PDE residual at random inner nodes: residuals.csv.
    ResidualCheck(Io),
    /// Train p-HJDQN: curve.csv and checkpoint.txt.
    Train(Io),
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    let (io, run): (&Io, fn(&ExperimentConfig, &Path) -> Result<()>) = match &command {
        Command::Solve(io) => (io, cmd_solve),
        Command::SolveClassic(io) => (io, cmd_solve_classic),
        Command::Rollout(io) => (io, cmd_rollout),
        Command::SweepL(io) => (io, cmd_sweep_l),
        Command::SweepEps(io) => (io, cmd_sweep_eps),
        Command::CompareP(io) => (io, cmd_compare_p),
        Command::ResidualCheck(io) => (io, cmd_residual),
        Command::Train(io) => (io, cmd_train),
    };
    let cfg = ExperimentConfig::load(&io.config)?;
    std::fs::create_dir_all(&io.out)?;
    run(&cfg, &io.out)
}

fn write_history(stats: &SolveStats, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sweep", "sup_change"])?;
    for (k, c) in stats.history.iter().enumerate() {
        w.write_record([(k + 1).to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn report_written(report: &ExperimentReport, out: &Path) -> Result<()> {
    report.write_to_dir(out)?;
    println!("wrote {}", out.join(format!("{}.csv", report.kind)).display());
    for c in &report.checks {
        println!("  {} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    Ok(())
}

fn solve_configured(cfg: &ExperimentConfig) -> Result<QTable> {
    let problem = cfg.problem()?;
    let grid = cfg.grid(&problem)?;
    cfg.validate_solver(&problem)?;
    solve_q_l(&problem, &grid, cfg.lipschitz()?, cfg.p(), &cfg.solver)
}

fn cmd_solve(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let q = solve_configured(cfg)?;
    q.write(&out.join("q.field"))?;
    write_history(&q.stats, &out.join("solve.csv"))?;
    println!("solved in {} sweeps, wrote {}", q.stats.sweeps, out.join("q.field").display());
    Ok(())
}

fn cmd_solve_classic(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let problem = cfg.problem()?;
    let grid = cfg.grid(&problem)?;
    cfg.validate_solver(&problem)?;
    let (q, stats) = solve_classic_on(&problem, &grid, &cfg.solver)?;
    let meta = format!("classic {}", serde_json::json!({ "problem": problem.key(), "h": cfg.solver.time_step }));
    q.write_to(std::io::BufWriter::new(std::fs::File::create(out.join("classic.field"))?), &[meta])?;
    write_history(&stats, &out.join("solve.csv"))?;
    println!("solved in {} sweeps, wrote {}", stats.sweeps, out.join("classic.field").display());
    Ok(())
}

fn cmd_rollout(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let problem = cfg.problem()?;
    let spec = cfg.rollout()?;
    cfg.validate_solver(&problem)?;
    let q = match &spec.table {
        Some(path) => QTable::read(Path::new(path))?,
        None => solve_configured(cfg)?,
    };
    let bx = cfg.solver.box_constraint()?;
    let traj = rollout(
        &problem,
        &q,
        &spec.x0,
        &spec.a0,
        q.lipschitz,
        q.p,
        cfg.solver.time_step,
        spec.steps,
        spec.mode,
        bx.as_ref(),
    )?;
    traj.write_csv(std::fs::File::create(out.join("rollout.csv"))?)?;
    println!("discounted return {}, wrote {}", traj.discounted_return, out.join("rollout.csv").display());
    Ok(())
}

fn cmd_sweep_l(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let problem = cfg.problem()?;
    let grid = cfg.grid(&problem)?;
    cfg.validate_solver(&problem)?;
    let ls = &cfg.ls;
    if ls.len() < 2 || ls.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("Ls must hold at least two increasing values".into()));
    }
    let tables = solve_ladder(&problem, &grid, ls, cfg.p(), &cfg.solver)?;
    report_written(&sweep_l_from(ls, &tables)?, out)?;
    let classic = solve_classic_on(&problem, &grid, &cfg.solver)?;
    report_written(&convergence_from(&problem, ls, &tables, classic)?, out)
}

fn cmd_sweep_eps(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let problem = cfg.problem()?;
    let grid = cfg.grid(&problem)?;
    cfg.validate_solver(&problem)?;
    let penalty = cfg.penalty()?;
    let epsilons = if cfg.epsilons.is_empty() { vec![penalty.epsilon] } else { cfg.epsilons.clone() };
    let report = sweep_epsilon(&problem, &grid, cfg.lipschitz()?, cfg.p(), penalty.half_width, &epsilons, &cfg.solver)
        .map_err(config_unless_numerical)?;
    report_written(&report, out)
}

fn cmd_compare_p(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let problem = cfg.problem()?;
    let grid = cfg.grid(&problem)?;
    cfg.validate_solver(&problem)?;
    let ps = if cfg.ps.is_empty() { vec![NormIndex::ONE, NormIndex::TWO, NormIndex::INF] } else { cfg.ps.clone() };
    let report = compare_p(&problem, &grid, cfg.lipschitz()?, &ps, &cfg.solver).map_err(config_unless_numerical)?;
    report_written(&report, out)
}

fn cmd_residual(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let problem = cfg.problem()?;
    let grid = cfg.grid(&problem)?;
    cfg.validate_solver(&problem)?;
    let report = residual_check(&problem, &grid, cfg.lipschitz()?, cfg.p(), &cfg.solver, &cfg.residual)?;
    report_written(&report, out)
}

fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let problem = cfg.problem()?;
    let tcfg = cfg.train()?;
    tcfg.validate(&problem).map_err(config_unless_numerical)?;
    let outcome = train(&problem, tcfg)?;
    let baseline = random_policy_curve(&problem, tcfg)?;
    write_curve_csv(&outcome.curve, std::fs::File::create(out.join("curve.csv"))?)?;
    write_checkpoint(&out.join("checkpoint.txt"), &outcome.params, tcfg)?;

    let tail = 10.min(baseline.len());
    let learned = outcome.mean_last_returns(tail);
    let random = baseline[baseline.len() - tail..].iter().sum::<f64>() / tail as f64;
    let mut report = ExperimentReport::new("train_baseline", &["episode", "random_return"]);
    for (k, r) in baseline.iter().enumerate() {
        report.push_row(vec![Cell::Num(k as f64), Cell::Num(*r)])?;
    }
    let margin = learned - random;
    report.check(
        "beats_random",
        margin >= 0.2 * random.abs(),
        format!("last-{tail} mean return {learned} vs random {random}"),
    );
    report_written(&report, out)?;
    println!("wrote {}", out.join("curve.csv").display());
    Ok(())
}

fn config_unless_numerical(e: Error) -> Error {
    if e.is_numerical() {
        e
    } else {
        Error::Config(e.to_string())
    }
}
