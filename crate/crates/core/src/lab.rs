//! Parameter sweeps over solved Q-tables and the CSV reports they produce.
//!
//! Every report is a rectangular table plus a list of named pass/fail checks. The
//! table goes to `<kind>.csv`; the checks go to `<kind>_checks.csv`.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::action::{BoxConstraint, NormIndex};
use crate::config::ResidualSpec;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::penalty::{penalized_problem, PenaltyConfig};
use crate::problems::ControlProblem;
use crate::solver::{pde_residual, solve_q_classic, solve_q_l, sup_diff, ActionBox, QTable, SolveStats, SolverConfig};

/// Nodewise tolerance for ordering columns.
pub const ORDER_TOL: f64 = 1e-6;
/// Tolerance for monotonicity in `L`.
pub const MONOTONE_TOL: f64 = 1e-8;
/// Central fraction of each axis treated as free of boundary clamping.
pub const INNER_KEEP: f64 = 0.6;
/// Slack allowed above the fitted `C l / (L + l)` envelope.
pub const BOUND_SLACK: f64 = 0.05;
pub const RESIDUAL_BOUND: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Flag(bool),
}

impl Cell {
    pub fn as_f64(&self) -> f64 {
        match *self {
            Cell::Num(v) => v,
            Cell::Flag(b) => f64::from(u8::from(b)),
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "true" => Ok(Cell::Flag(true)),
            "false" => Ok(Cell::Flag(false)),
            _ => s.parse::<f64>().map(Cell::Num).map_err(|_| Error::Parse(format!("bad cell {s:?}"))),
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(v) => write!(f, "{v}"),
            Cell::Flag(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// A converged table kept alongside a report, labelled by the parameter it was solved for.
#[derive(Debug, Clone)]
pub struct Solved {
    pub label: String,
    pub field: ScalarField,
    pub stats: SolveStats,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub kind: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub checks: Vec<Check>,
    pub solves: Vec<Solved>,
}

impl ExperimentReport {
    pub fn new(kind: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            kind: kind.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            checks: Vec::new(),
            solves: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch { expected: self.columns.len(), got: row.len() });
        }
        if row.iter().any(|c| matches!(c, Cell::Num(v) if v.is_nan())) {
            return Err(Error::numerical(format!("NaN in {} report row", self.kind)));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    pub fn find_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k].as_f64()).collect())
    }

    /// Same kind, columns and cells.
    pub fn same_table(&self, other: &Self) -> bool {
        self.kind == other.kind && self.columns == other.columns && self.rows == other.rows
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(kind: impl Into<String>, input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut report = Self { kind: kind.into(), columns, rows: Vec::new(), checks: Vec::new(), solves: Vec::new() };
        for record in r.records() {
            let row = record?.iter().map(Cell::parse).collect::<Result<Vec<_>>>()?;
            report.push_row(row)?;
        }
        Ok(report)
    }

    pub fn write_checks_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["check", "passed", "detail"])?;
        for c in &self.checks {
            w.write_record([c.name.as_str(), if c.passed { "true" } else { "false" }, c.detail.as_str()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<dir>/<kind>.csv` and `<dir>/<kind>_checks.csv`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join(format!("{}.csv", self.kind)))?)?;
        self.write_checks_csv(std::fs::File::create(dir.join(format!("{}_checks.csv", self.kind)))?)?;
        Ok(())
    }
}

/// Spearman rank correlation with average ranks for ties; NaN when either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs equal lengths");
    pearson(&ranks(x), &ranks(y))
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut out = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        let rank = (start + end - 1) as f64 / 2.0 + 1.0;
        for &i in &order[start..end] {
            out[i] = rank;
        }
        start = end;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy / (sxx * syy).sqrt()
}

/// Least-squares slope of `log(gap)` against `log(L)`. Rows with a nonpositive gap are dropped.
pub fn fit_rate(ls: &[f64], gaps: &[f64]) -> Result<f64> {
    if ls.len() != gaps.len() {
        return Err(Error::DimensionMismatch { expected: ls.len(), got: gaps.len() });
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) =
        ls.iter().zip(gaps).filter(|(l, g)| **l > 0.0 && **g > 0.0).map(|(l, g)| (l.ln(), g.ln())).unzip();
    if lx.len() < 2 {
        return Err(Error::invalid("rate fit needs at least two positive gaps"));
    }
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("rate fit needs at least two distinct L"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Smallest `C` with `C w_k >= s_k` for every row: the least-squares fit of `C w` to `s`
/// under the constraint that the fit bounds every measurement.
pub fn fit_bound_constant(weights: &[f64], sup_diffs: &[f64]) -> f64 {
    weights.iter().zip(sup_diffs).map(|(w, s)| if *w > 0.0 { s / w } else { 0.0 }).fold(0.0, f64::max)
}

fn check_increasing(values: &[f64], what: &str, min_len: usize) -> Result<()> {
    if values.len() < min_len {
        return Err(Error::invalid(format!("{what} needs at least {min_len} entries")));
    }
    if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid(format!("{what} must be finite and strictly increasing")));
    }
    Ok(())
}

fn label_err(what: String) -> impl FnOnce(Error) -> Error {
    move |e| match e {
        Error::Numerical(msg) => Error::Numerical(format!("{what}: {msg}")),
        Error::NonConvergence { sweeps, last_change } => {
            Error::Numerical(format!("{what}: no convergence after {sweeps} sweeps (last change {last_change:e})"))
        }
        other => other,
    }
}

/// Solves `Q^L_p` for each `L` in order.
pub fn solve_ladder(
    problem: &ControlProblem,
    grid: &Grid,
    ls: &[f64],
    p: NormIndex,
    cfg: &SolverConfig,
) -> Result<Vec<QTable>> {
    ls.iter().map(|&l| solve_q_l(problem, grid, l, p, cfg).map_err(label_err(format!("L = {l}")))).collect()
}

/// Smallest nodewise `b - a`.
fn min_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| y - x).fold(f64::INFINITY, f64::min)
}

fn solved(label: String, table: &QTable) -> Solved {
    Solved { label, field: table.field.clone(), stats: table.stats.clone() }
}

/// Sup-norm differences of consecutive `Q^L` with a fitted `C l / (L + l)` envelope.
pub fn sweep_l(
    problem: &ControlProblem,
    grid: &Grid,
    ls: &[f64],
    p: NormIndex,
    cfg: &SolverConfig,
) -> Result<ExperimentReport> {
    check_increasing(ls, "Ls", 2)?;
    let tables = solve_ladder(problem, grid, ls, p, cfg)?;
    sweep_l_from(ls, &tables)
}

pub fn sweep_l_from(ls: &[f64], tables: &[QTable]) -> Result<ExperimentReport> {
    check_increasing(ls, "Ls", 2)?;
    let mut report = ExperimentReport::new("sweep_l", &["L_low", "L_high", "sup_diff", "bound_fit"]);
    let mut diffs = Vec::new();
    let mut weights = Vec::new();
    let mut worst_monotone = f64::INFINITY;
    for k in 0..ls.len() - 1 {
        let (lo, hi) = (&tables[k].field, &tables[k + 1].field);
        worst_monotone = worst_monotone.min(min_diff(lo, hi));
        diffs.push(sup_diff(lo, hi)?);
        weights.push((ls[k + 1] - ls[k]) / ls[k + 1]);
    }
    let c = fit_bound_constant(&weights, &diffs);
    for k in 0..diffs.len() {
        report.push_row(vec![
            Cell::Num(ls[k]),
            Cell::Num(ls[k + 1]),
            Cell::Num(diffs[k]),
            Cell::Num(c * weights[k]),
        ])?;
    }
    report.check(
        "monotone_in_L",
        worst_monotone >= -MONOTONE_TOL,
        format!("min nodewise Q^(L+) - Q^L = {worst_monotone:e}"),
    );
    let mids: Vec<f64> = ls[..ls.len() - 1].to_vec();
    let rho = spearman(&mids, &diffs);
    report.check("decreasing_trend", rho < 0.0, format!("spearman(L, sup_diff) = {rho}"));
    let covered = diffs.iter().zip(&weights).all(|(s, w)| *s <= (1.0 + BOUND_SLACK) * c * w);
    report.check("bound_fit", covered, format!("C = {c}"));
    // Fit on the first half of the rows, then check that the envelope still covers the rest.
    let half = diffs.len().div_ceil(2);
    let c_head = fit_bound_constant(&weights[..half], &diffs[..half]);
    let holds = diffs[half..].iter().zip(&weights[half..]).all(|(s, w)| *s <= (1.0 + BOUND_SLACK) * c_head * w);
    report.check("bound_fit_holdout", holds, format!("C fitted on first {half} rows = {c_head}"));
    report.solves = ls.iter().zip(tables).map(|(l, t)| solved(format!("L={l}"), t)).collect();
    Ok(report)
}

/// Classical value on the state grid with the action maximized over the action nodes.
pub fn solve_classic_on(problem: &ControlProblem, grid: &Grid, cfg: &SolverConfig) -> Result<(ScalarField, SolveStats)> {
    let n = problem.state_dim();
    let x_grid = grid.sub_grid(0..n)?;
    let a_grid = grid.sub_grid(n..grid.ndim())?;
    let candidates: Vec<Vec<f64>> = (0..a_grid.node_count()).map(|k| a_grid.node_point(k)).collect();
    solve_q_classic(problem, &x_grid, &candidates, cfg).map_err(label_err("classic solve".into()))
}

/// `sup |Q^L(x, a) - Q(x)|` over inner nodes for each `L`, and the check `Q^L <= Q`.
pub fn convergence_to_classic(
    problem: &ControlProblem,
    grid: &Grid,
    ls: &[f64],
    p: NormIndex,
    cfg: &SolverConfig,
) -> Result<ExperimentReport> {
    check_increasing(ls, "Ls", 2)?;
    let tables = solve_ladder(problem, grid, ls, p, cfg)?;
    let classic = solve_classic_on(problem, grid, cfg)?;
    convergence_from(problem, ls, &tables, classic)
}

pub fn convergence_from(
    problem: &ControlProblem,
    ls: &[f64],
    tables: &[QTable],
    classic: (ScalarField, SolveStats),
) -> Result<ExperimentReport> {
    let (q, q_stats) = classic;
    let n = problem.state_dim();
    let mut report = ExperimentReport::new("conv", &["L", "gap"]);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut gaps = Vec::with_capacity(ls.len());
    for (l, table) in ls.iter().zip(tables) {
        let grid = table.grid();
        let d = grid.ndim();
        let mut multi = vec![0; d];
        let mut gap = 0.0f64;
        for (flat, v) in table.field.values().iter().enumerate() {
            grid.multi_index(flat, &mut multi);
            let qx = q.values()[q.grid().flat_index(&multi[..n])];
            worst_excess = worst_excess.max(v - qx);
            if grid.is_inner(&multi, 0..d, INNER_KEEP) {
                gap = gap.max((v - qx).abs());
            }
        }
        gaps.push(gap);
        report.push_row(vec![Cell::Num(*l), Cell::Num(gap)])?;
    }
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0] + ORDER_TOL);
    report.check("gap_nonincreasing", monotone, format!("gaps = {gaps:?}"));
    report.check("below_classic", worst_excess <= ORDER_TOL, format!("max nodewise Q^L - Q = {worst_excess:e}"));
    match fit_rate(ls, &gaps) {
        Ok(slope) => report.check("rate_slope", slope < 0.0, format!("log-log slope = {slope}")),
        Err(e) => report.check("rate_slope", false, e.to_string()),
    }
    report.solves = ls.iter().zip(tables).map(|(l, t)| solved(format!("L={l}"), t)).collect();
    report.solves.push(Solved { label: "classic".into(), field: q, stats: q_stats });
    Ok(report)
}

/// Nodes whose action coordinates all lie in `[-M, M]`.
fn in_box_mask(grid: &Grid, state_dim: usize, half_width: f64) -> Vec<bool> {
    let slack = 1e-12 * half_width.max(1.0);
    (0..grid.node_count())
        .map(|flat| grid.node_point(flat)[state_dim..].iter().all(|a| a.abs() <= half_width + slack))
        .collect()
}

/// Compares the penalized values `Q^(eps, L)` with the unconstrained `Q^L` and the
/// box-constrained `Q^L` on `[-M, M]^m`, for decreasing `eps`.
#[allow(clippy::too_many_arguments)]
pub fn sweep_epsilon(
    problem: &ControlProblem,
    grid: &Grid,
    lipschitz: f64,
    p: NormIndex,
    half_width: f64,
    epsilons: &[f64],
    cfg: &SolverConfig,
) -> Result<ExperimentReport> {
    if epsilons.is_empty() || epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("epsilons must be nonempty and strictly decreasing"));
    }
    for &eps in epsilons {
        PenaltyConfig::new(half_width, eps)?;
    }
    let m = problem.action_dim();
    let bx = BoxConstraint::cube(m, half_width, cfg.boundary_tolerance)?;
    let free_cfg = SolverConfig { action_box: None, ..cfg.clone() };
    let box_cfg = SolverConfig { action_box: Some(ActionBox { lo: bx.lo.clone(), hi: bx.hi.clone() }), ..cfg.clone() };
    let q_l = solve_q_l(problem, grid, lipschitz, p, &free_cfg).map_err(label_err("unconstrained".into()))?;
    let q_box = solve_q_l(problem, grid, lipschitz, p, &box_cfg).map_err(label_err("box-constrained".into()))?;
    let inside = in_box_mask(grid, problem.state_dim(), half_width);

    let mut report = ExperimentReport::new("eps", &["epsilon", "gap", "ordering_ok"]);
    report.solves.push(solved("unconstrained".into(), &q_l));
    report.solves.push(solved("box".into(), &q_box));
    let mut previous: Option<QTable> = None;
    let mut gaps = Vec::new();
    let mut worst = [f64::INFINITY; 3];
    for &eps in epsilons {
        let pen = penalized_problem(problem, PenaltyConfig::new(half_width, eps)?)?;
        let q_eps = solve_q_l(&pen, grid, lipschitz, p, &free_cfg).map_err(label_err(format!("epsilon = {eps}")))?;
        let (mut gap, mut above_box, mut below_l, mut below_prev) = (0.0f64, f64::INFINITY, f64::INFINITY, f64::INFINITY);
        for flat in 0..grid.node_count() {
            let v = q_eps.field.values()[flat];
            below_l = below_l.min(q_l.field.values()[flat] - v);
            if let Some(prev) = &previous {
                below_prev = below_prev.min(prev.field.values()[flat] - v);
            }
            if inside[flat] {
                above_box = above_box.min(v - q_box.field.values()[flat]);
                gap = gap.max(q_l.field.values()[flat] - v);
            }
        }
        let ok = above_box >= -ORDER_TOL && below_l >= -ORDER_TOL && below_prev >= -ORDER_TOL;
        worst = [worst[0].min(above_box), worst[1].min(below_l), worst[2].min(below_prev)];
        gaps.push(gap);
        report.push_row(vec![Cell::Num(eps), Cell::Num(gap), Cell::Flag(ok)])?;
        report.solves.push(solved(format!("epsilon={eps}"), &q_eps));
        previous = Some(q_eps);
    }
    let all_ok = report.rows.iter().all(|r| r[2] == Cell::Flag(true));
    report.check(
        "ordering",
        all_ok,
        format!(
            "min Q^eps - Q_box = {:e}, min Q^L - Q^eps = {:e}, min Q^eps_prev - Q^eps = {:e}",
            worst[0], worst[1], worst[2]
        ),
    );
    let nonincreasing = gaps.windows(2).all(|w| w[1] <= w[0] + ORDER_TOL);
    report.check("gap_nonincreasing", nonincreasing, format!("gaps = {gaps:?}"));
    Ok(report)
}

/// `Q^L_p` for each exponent with summary statistics and the nodewise ordering in `p`.
pub fn compare_p(
    problem: &ControlProblem,
    grid: &Grid,
    lipschitz: f64,
    ps: &[NormIndex],
    cfg: &SolverConfig,
) -> Result<ExperimentReport> {
    if ps.is_empty() || ps.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("ps must be nonempty and strictly increasing"));
    }
    let mut report = ExperimentReport::new("pcomp", &["p", "q_mean", "q_min", "q_max", "ordering_ok"]);
    let mut previous: Option<QTable> = None;
    let mut worst = f64::INFINITY;
    for &p in ps {
        let q = solve_q_l(problem, grid, lipschitz, p, cfg).map_err(label_err(format!("p = {p}")))?;
        let vals = q.field.values();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let step = previous.as_ref().map_or(f64::INFINITY, |prev| min_diff(&prev.field, &q.field));
        worst = worst.min(step);
        report.push_row(vec![
            Cell::Num(p.value()),
            Cell::Num(mean),
            Cell::Num(min),
            Cell::Num(max),
            Cell::Flag(step >= -ORDER_TOL),
        ])?;
        report.solves.push(solved(format!("p={p}"), &q));
        previous = Some(q);
    }
    report.check("p_ordering", worst >= -ORDER_TOL, format!("min nodewise Q_p2 - Q_p1 = {worst:e}"));
    Ok(report)
}

/// PDE residual of a converged table at randomly chosen inner nodes.
pub fn residual_check(
    problem: &ControlProblem,
    grid: &Grid,
    lipschitz: f64,
    p: NormIndex,
    cfg: &SolverConfig,
    spec: &ResidualSpec,
) -> Result<ExperimentReport> {
    if !(spec.keep > 0.0 && spec.keep < 1.0) {
        return Err(Error::invalid("residual keep fraction must lie in (0, 1)"));
    }
    let q = solve_q_l(problem, grid, lipschitz, p, cfg)?;
    let (n, m) = (problem.state_dim(), problem.action_dim());
    let mut columns: Vec<String> = (1..=n).map(|i| format!("x_{i}")).collect();
    columns.extend((1..=m).map(|i| format!("a_{i}")));
    columns.push("residual".into());
    let names: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut report = ExperimentReport::new("residuals", &names);

    let d = grid.ndim();
    let mut multi = vec![0; d];
    let mut inner: Vec<usize> = (0..grid.node_count())
        .filter(|&flat| {
            grid.multi_index(flat, &mut multi);
            grid.is_inner(&multi, 0..d, spec.keep)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    inner.shuffle(&mut rng);
    inner.truncate(spec.points);
    let mut abs = Vec::with_capacity(inner.len());
    for flat in inner {
        let z = grid.node_point(flat);
        let res = pde_residual(&q, problem, lipschitz, p, &z)?;
        abs.push(res.abs());
        let mut row: Vec<Cell> = z.into_iter().map(Cell::Num).collect();
        row.push(Cell::Num(res));
        report.push_row(row)?;
    }
    if abs.is_empty() {
        return Err(Error::invalid("no inner nodes to evaluate the residual at"));
    }
    let max = abs.iter().copied().fold(0.0, f64::max);
    report.check("residual_bound", max <= RESIDUAL_BOUND, format!("max |residual| = {max}, median = {}", median(&abs)));
    report.solves.push(solved(format!("L={lipschitz}"), &q));
    Ok(report)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        return f64::NAN;
    }
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;
    use crate::problems::{make_constant, make_decay_toy};

    fn square(nx: usize, na: usize) -> Grid {
        Grid::new(vec![Axis::new(-2.0, 2.0, nx).unwrap(), Axis::new(-2.0, 2.0, na).unwrap()]).unwrap()
    }

    fn fast_cfg() -> SolverConfig {
        SolverConfig { time_step: 0.05, stop_tol: 1e-9, ..SolverConfig::default() }
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 4.0, 9.0, 16.0]) - 1.0).abs() < 1e-15);
        assert!(spearman(&[1.0, 2.0], &[5.0, 5.0]).is_nan());
        assert_eq!(ranks(&[2.0, 1.0, 2.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn fit_rate_examples() {
        let ls = [1.0, 2.0, 4.0, 8.0, 16.0];
        let inv: Vec<f64> = ls.iter().map(|l| 3.0 / l).collect();
        assert!((fit_rate(&ls, &inv).unwrap() + 1.0).abs() < 1e-9);
        assert!(fit_rate(&ls, &[0.5; 5]).unwrap().abs() < 1e-12);
        assert!((fit_rate(&ls, &[0.0, 0.5, 0.25, 0.125, -1.0]).unwrap() + 1.0).abs() < 1e-9);
        assert!(fit_rate(&ls, &[0.0; 5]).is_err());
    }

    #[test]
    fn bound_constant_is_tight_envelope() {
        let w = [0.5, 0.5, 0.5];
        let s = [0.4, 0.2, 0.1];
        let c = fit_bound_constant(&w, &s);
        assert_eq!(c, 0.8);
        assert!(s.iter().zip(&w).all(|(s, w)| *s <= c * w));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut r = ExperimentReport::new("pcomp", &["p", "q_mean", "ordering_ok"]);
        r.push_row(vec![Cell::Num(1.0), Cell::Num(0.1 + 0.2), Cell::Flag(true)]).unwrap();
        r.push_row(vec![Cell::Num(f64::INFINITY), Cell::Num(-1.0 / 3.0), Cell::Flag(false)]).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let back = ExperimentReport::read_csv("pcomp", buf.as_slice()).unwrap();
        assert!(back.same_table(&r));
        assert!(r.push_row(vec![Cell::Num(f64::NAN), Cell::Num(0.0), Cell::Flag(true)]).is_err());
        assert!(r.push_row(vec![Cell::Num(0.0)]).is_err());
    }

    #[test]
    fn constant_reward_sweeps_are_flat() {
        let problem = make_constant(1.5, 2.0, 1, 1).unwrap();
        let grid = square(9, 9);
        let rep = sweep_l(&problem, &grid, &[1.0, 2.0, 4.0], NormIndex::TWO, &fast_cfg()).unwrap();
        assert!(rep.column("sup_diff").unwrap().iter().all(|d| *d < 1e-8));
        let conv = convergence_to_classic(&problem, &grid, &[1.0, 2.0], NormIndex::TWO, &fast_cfg()).unwrap();
        assert!(conv.column("gap").unwrap().iter().all(|g| *g < 1e-8));
    }

    #[test]
    fn decay_sweep_reports() {
        let problem = make_decay_toy();
        let grid = square(21, 21);
        let rep = sweep_l(&problem, &grid, &[1.0, 2.0, 4.0, 8.0], NormIndex::TWO, &fast_cfg()).unwrap();
        assert_eq!(rep.columns, ["L_low", "L_high", "sup_diff", "bound_fit"]);
        assert_eq!(rep.rows.len(), 3);
        assert!(rep.find_check("monotone_in_L").unwrap().passed);
        assert!(rep.find_check("bound_fit").unwrap().passed);
        assert_eq!(rep.solves.len(), 4);
    }

    #[test]
    fn p_comparison_in_one_action_dimension_is_flat() {
        let problem = make_decay_toy();
        let grid = square(15, 15);
        let ps = [NormIndex::ONE, NormIndex::TWO, NormIndex::INF];
        let rep = compare_p(&problem, &grid, 2.0, &ps, &fast_cfg()).unwrap();
        let means = rep.column("q_mean").unwrap();
        assert!(means.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12));
        assert!(rep.all_passed());
        let zero = compare_p(&problem, &grid, 0.0, &ps, &fast_cfg()).unwrap();
        let means = zero.column("q_mean").unwrap();
        assert!(means.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn epsilon_sweep_with_inactive_penalty() {
        let problem = make_decay_toy();
        let grid = Grid::new(vec![Axis::new(-2.0, 2.0, 15).unwrap(), Axis::new(-1.0, 1.0, 11).unwrap()]).unwrap();
        let rep = sweep_epsilon(&problem, &grid, 2.0, NormIndex::TWO, 1.0, &[0.5, 0.1], &fast_cfg()).unwrap();
        assert!(rep.column("gap").unwrap().iter().all(|g| g.abs() < 1e-12));
        assert!(rep.all_passed(), "{:?}", rep.checks);
    }

    #[test]
    fn argument_validation() {
        let problem = make_decay_toy();
        let grid = square(9, 9);
        let cfg = fast_cfg();
        assert!(sweep_l(&problem, &grid, &[1.0], NormIndex::TWO, &cfg).is_err());
        assert!(sweep_l(&problem, &grid, &[2.0, 1.0], NormIndex::TWO, &cfg).is_err());
        assert!(sweep_epsilon(&problem, &grid, 1.0, NormIndex::TWO, 1.0, &[0.1, 0.5], &cfg).is_err());
        assert!(compare_p(&problem, &grid, 1.0, &[NormIndex::INF, NormIndex::ONE], &cfg).is_err());
    }

    #[test]
    fn residual_report_shape() {
        let problem = make_decay_toy();
        let grid = square(21, 21);
        let spec = ResidualSpec { points: 10, seed: 3, keep: 0.6 };
        let rep = residual_check(&problem, &grid, 1.0, NormIndex::TWO, &fast_cfg(), &spec).unwrap();
        assert_eq!(rep.columns, ["x_1", "a_1", "residual"]);
        assert_eq!(rep.rows.len(), 10);
        let again = residual_check(&problem, &grid, 1.0, NormIndex::TWO, &fast_cfg(), &spec).unwrap();
        assert!(rep.same_table(&again));
    }
}
