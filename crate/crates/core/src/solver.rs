//! Semi-Lagrangian fixed-point solver for the Lipschitz-constrained Q-function.
//!
//! One sweep maps a table `Q` on the product grid over `(x, a)` to
//!
//! ```text
//! Q'(x, a) = h r(x, a) + (1 - gamma h) max_b Q(x + h f(x, a), a + h b)
//! ```
//!
//! where `b` ranges over a candidate set inside the `l_p` ball of radius `L`. The
//! candidate set is fixed for a given `(grid, L, p, h)` apart from one optional
//! gradient-driven direction, so the sweep is a monotone `(1 - gamma h)`-contraction
//! whenever that direction is disabled (or redundant, as for one action coordinate).
//!
//! Candidates:
//! - `b = 0` and `±L e_i`;
//! - every offset that lands exactly on an action node inside the ball, which makes
//!   the maximum exact for a single action coordinate (the interpolant is piecewise
//!   linear along the segment);
//! - `K` seeded directions scaled onto the `l_p` sphere, taken for `p` and for each
//!   of the reference exponents `1, 2, inf` below `p` so that candidate sets are nested
//!   in `p`;
//! - the closed-form maximizer for the interpolated action gradient at the landing
//!   point (only when `m > 1`).

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{
    clip_in_place, cone_project_in_place, hamiltonian_maximizer_into, lp_norm, BoxConstraint, NormIndex,
};
use crate::error::{check_dim, Error, Result};
use crate::grid::{Grid, ScalarField, MAX_AXES};
use crate::problems::ControlProblem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub time_step: f64,
    pub stop_tol: f64,
    pub max_sweeps: usize,
    /// Seeded sphere directions per exponent (`K`).
    pub extra_direction_samples: usize,
    /// Restricts directions to the tangent cone of this box and keeps landings inside it.
    pub action_box: Option<ActionBox>,
    pub boundary_tolerance: f64,
    /// Adds the closed-form maximizer of the interpolated action gradient (`m > 1`).
    pub gradient_candidate: bool,
    /// Adds every offset landing on an action node inside the ball.
    pub node_candidates: bool,
    pub sample_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            time_step: 0.01,
            stop_tol: 1e-8,
            max_sweeps: 100_000,
            extra_direction_samples: 8,
            action_box: None,
            boundary_tolerance: 1e-9,
            gradient_candidate: true,
            node_candidates: true,
            sample_seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, discount: f64) -> Result<()> {
        let h = self.time_step;
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid(format!("time step must be positive, got {h}")));
        }
        if discount * h >= 1.0 {
            return Err(Error::invalid(format!("gamma*h = {} must be < 1", discount * h)));
        }
        if !(self.stop_tol > 0.0) {
            return Err(Error::invalid("stop_tol must be positive"));
        }
        if self.max_sweeps == 0 {
            return Err(Error::invalid("max_sweeps must be positive"));
        }
        if let Some(bx) = &self.action_box {
            self.box_constraint_from(bx)?;
        }
        Ok(())
    }

    fn box_constraint_from(&self, bx: &ActionBox) -> Result<BoxConstraint> {
        BoxConstraint::new(bx.lo.clone(), bx.hi.clone(), self.boundary_tolerance)
    }

    pub fn box_constraint(&self) -> Result<Option<BoxConstraint>> {
        self.action_box.as_ref().map(|b| self.box_constraint_from(b)).transpose()
    }

    /// Distance to the fixed point guaranteed once a sweep changes less than `stop_tol`.
    pub fn fixed_point_error(&self, discount: f64) -> f64 {
        let gh = discount * self.time_step;
        self.stop_tol * (1.0 - gh) / gh
    }
}

/// Convergence record of a fixed-point solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub sweeps: usize,
    /// Sup-norm change of every sweep, in order.
    pub history: Vec<f64>,
    pub converged: bool,
}

impl SolveStats {
    /// Largest ratio of consecutive sup changes over sweeps whose previous change is at
    /// least `floor`. Below the floor, rounding of the stored values dominates.
    pub fn max_contraction_ratio(&self, floor: f64) -> Option<f64> {
        self.history
            .windows(2)
            .filter(|w| w[0] >= floor)
            .map(|w| w[1] / w[0])
            .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))))
    }
}

/// A Q-function on the product grid, state axes first.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub field: ScalarField,
    pub problem_key: String,
    pub state_dim: usize,
    pub lipschitz: f64,
    pub p: NormIndex,
    pub time_step: f64,
    pub stats: SolveStats,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QTableHeader {
    problem: String,
    state_dim: usize,
    #[serde(rename = "L")]
    lipschitz: f64,
    p: NormIndex,
    h: f64,
}

impl QTable {
    pub fn zeros(problem: &ControlProblem, grid: Grid, lipschitz: f64, p: NormIndex, time_step: f64) -> Result<Self> {
        check_dim(problem.state_dim() + problem.action_dim(), grid.ndim())?;
        Ok(Self {
            field: ScalarField::constant(grid, 0.0),
            problem_key: problem.key().to_string(),
            state_dim: problem.state_dim(),
            lipschitz,
            p,
            time_step,
            stats: SolveStats::default(),
        })
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    pub fn action_dim(&self) -> usize {
        self.grid().ndim() - self.state_dim
    }

    pub fn value(&self, x: &[f64], a: &[f64]) -> Result<f64> {
        check_dim(self.state_dim, x.len())?;
        check_dim(self.action_dim(), a.len())?;
        let mut z = [0.0; MAX_AXES];
        z[..x.len()].copy_from_slice(x);
        z[x.len()..x.len() + a.len()].copy_from_slice(a);
        Ok(self.field.interpolate_unchecked(&z[..x.len() + a.len()]))
    }

    /// Numerical `D_a Q` at `(x, a)`.
    pub fn action_gradient(&self, x: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.state_dim, x.len())?;
        check_dim(self.action_dim(), a.len())?;
        let z: Vec<f64> = x.iter().chain(a).copied().collect();
        Ok((self.state_dim..z.len()).map(|k| self.field.partial_unchecked(&z, k)).collect())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let header = QTableHeader {
            problem: self.problem_key.clone(),
            state_dim: self.state_dim,
            lipschitz: self.lipschitz,
            p: self.p,
            h: self.time_step,
        };
        let meta = serde_json::to_string(&header).map_err(|e| Error::Parse(e.to_string()))?;
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        self.field.write_to(&mut out, &[format!("qtable {meta}")])?;
        out.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(std::fs::File::open(path)?))
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let (field, comments) = ScalarField::read_from(input)?;
        let meta = comments
            .iter()
            .find_map(|c| c.strip_prefix("qtable "))
            .ok_or_else(|| Error::Parse("missing qtable metadata comment".into()))?;
        let header: QTableHeader = serde_json::from_str(meta).map_err(|e| Error::Parse(e.to_string()))?;
        if header.state_dim >= field.grid().ndim() {
            return Err(Error::Parse("state_dim leaves no action axes".into()));
        }
        Ok(Self {
            field,
            problem_key: header.problem,
            state_dim: header.state_dim,
            lipschitz: header.lipschitz,
            p: header.p,
            time_step: header.h,
            stats: SolveStats::default(),
        })
    }
}

/// Per-node data that does not depend on the table.
struct NodeTerms {
    reward: f64,
    x_cells: [(usize, f64); MAX_AXES],
}

/// Precomputed sweep operator for one `(problem, grid, L, p, cfg)`.
pub struct SweepPlan {
    grid: Grid,
    n: usize,
    m: usize,
    h: f64,
    decay: f64,
    lipschitz: f64,
    p: NormIndex,
    nodes: Vec<NodeTerms>,
    /// Fixed landing cells per action node (indexed by the action part of the flat index).
    landings: Vec<Vec<[(usize, f64); MAX_AXES]>>,
    action_grid: Grid,
    box_constraint: Option<BoxConstraint>,
    gradient_candidate: bool,
}

/// Fixed candidate directions in the `l_p` ball of radius `lip`.
pub fn candidate_directions(
    action_grid: &Grid,
    lip: f64,
    p: NormIndex,
    cfg: &SolverConfig,
) -> Result<Vec<Vec<f64>>> {
    let m = action_grid.ndim();
    let h = cfg.time_step;
    let mut out: Vec<Vec<f64>> = vec![vec![0.0; m]];
    if lip > 0.0 {
        for i in 0..m {
            for s in [1.0, -1.0] {
                let mut b = vec![0.0; m];
                b[i] = s * lip;
                out.push(b);
            }
        }
        if cfg.node_candidates {
            let radius: Vec<i64> = action_grid
                .axes()
                .iter()
                .map(|ax| (h * lip / ax.spacing() + 1e-9).floor() as i64)
                .collect();
            let total: i64 = radius.iter().map(|r| 2 * r + 1).product();
            if total > 200_000 {
                return Err(Error::invalid(format!(
                    "{total} node offsets per action node; reduce L*h or coarsen the action grid"
                )));
            }
            let mut k: Vec<i64> = radius.iter().map(|r| -r).collect();
            'odometer: loop {
                let b: Vec<f64> =
                    k.iter().zip(action_grid.axes()).map(|(&ki, ax)| ki as f64 * ax.spacing() / h).collect();
                if lp_norm(&b, p) <= lip * (1.0 + 1e-12) {
                    out.push(b);
                }
                for j in (0..m).rev() {
                    if k[j] < radius[j] {
                        k[j] += 1;
                        continue 'odometer;
                    }
                    k[j] = -radius[j];
                }
                break;
            }
        }
        if cfg.extra_direction_samples > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.sample_seed);
            let dirs: Vec<Vec<f64>> = (0..cfg.extra_direction_samples)
                .map(|_| loop {
                    let u: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
                    if lp_norm(&u, NormIndex::TWO) > 1e-12 {
                        break u;
                    }
                })
                .collect();
            let mut exponents: Vec<NormIndex> =
                [NormIndex::ONE, NormIndex::TWO, NormIndex::INF].into_iter().filter(|e| *e <= p).collect();
            if !exponents.contains(&p) {
                exponents.push(p);
            }
            for e in exponents {
                for u in &dirs {
                    let n = lp_norm(u, e);
                    out.push(u.iter().map(|x| lip * x / n).collect());
                }
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite candidates"));
    out.dedup();
    Ok(out)
}

impl SweepPlan {
    pub fn new(problem: &ControlProblem, grid: &Grid, lipschitz: f64, p: NormIndex, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate(problem.discount())?;
        let n = problem.state_dim();
        let m = problem.action_dim();
        check_dim(n + m, grid.ndim())?;
        if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
            return Err(Error::invalid(format!("L must be finite and >= 0, got {lipschitz}")));
        }
        let box_constraint = cfg.box_constraint()?;
        if let Some(bx) = &box_constraint {
            check_dim(m, bx.dim())?;
        }
        let h = cfg.time_step;
        let action_grid = grid.sub_grid(n..n + m)?;
        let state_axes = &grid.axes()[..n];

        let mut multi = vec![0usize; n + m];
        let mut fx = vec![0.0; n];
        let mut nodes = Vec::with_capacity(grid.node_count());
        for flat in 0..grid.node_count() {
            grid.multi_index(flat, &mut multi);
            let z: Vec<f64> = multi.iter().zip(grid.axes()).map(|(&i, ax)| ax.coord(i)).collect();
            let (x, a) = z.split_at(n);
            problem.dynamics_into(x, a, &mut fx);
            let reward = problem.reward(x, a);
            if !reward.is_finite() || fx.iter().any(|v| !v.is_finite()) {
                return Err(Error::numerical(format!("non-finite dynamics or reward at node {z:?}")));
            }
            let mut x_cells = [(0usize, 0.0); MAX_AXES];
            for k in 0..n {
                x_cells[k] = state_axes[k].locate(x[k] + h * fx[k]);
            }
            nodes.push(NodeTerms { reward, x_cells });
        }

        let dirs = candidate_directions(&action_grid, lipschitz, p, cfg)?;
        let mut landings = Vec::with_capacity(action_grid.node_count());
        let mut b = vec![0.0; m];
        let mut a_next = vec![0.0; m];
        for j in 0..action_grid.node_count() {
            let a = action_grid.node_point(j);
            let a_ref = match &box_constraint {
                Some(bx) => {
                    let mut c = a.clone();
                    clip_in_place(&mut c, bx);
                    c
                }
                None => a.clone(),
            };
            let mut cells: Vec<[(usize, f64); MAX_AXES]> = Vec::with_capacity(dirs.len());
            for d in &dirs {
                b.copy_from_slice(d);
                if let Some(bx) = &box_constraint {
                    cone_project_in_place(&mut b, &a_ref, bx);
                }
                for i in 0..m {
                    a_next[i] = a[i] + h * b[i];
                }
                if let Some(bx) = &box_constraint {
                    clip_in_place(&mut a_next, bx);
                }
                let mut c = [(0usize, 0.0); MAX_AXES];
                for i in 0..m {
                    c[i] = action_grid.axes()[i].locate(a_next[i]);
                }
                cells.push(c);
            }
            cells.sort_by(|x, y| {
                x.iter().zip(y).map(|(a, b)| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1))).find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            cells.dedup();
            landings.push(cells);
        }

        Ok(Self {
            grid: grid.clone(),
            n,
            m,
            h,
            decay: 1.0 - problem.discount() * h,
            lipschitz,
            p,
            nodes,
            landings,
            action_grid,
            box_constraint,
            gradient_candidate: cfg.gradient_candidate && m > 1 && lipschitz > 0.0,
        })
    }

    /// Number of distinct landing points per action node, for diagnostics.
    pub fn max_landings(&self) -> usize {
        self.landings.iter().map(Vec::len).max().unwrap_or(0)
    }

    fn node_value(&self, q: &ScalarField, flat: usize) -> f64 {
        let node = &self.nodes[flat];
        let a_index = flat % self.action_grid.node_count();
        let d = self.n + self.m;
        let mut cells = [(0usize, 0.0); MAX_AXES];
        cells[..self.n].copy_from_slice(&node.x_cells[..self.n]);
        let mut best = f64::NEG_INFINITY;
        for landing in &self.landings[a_index] {
            cells[self.n..d].copy_from_slice(&landing[..self.m]);
            let v = q.interpolate_located(&cells[..d]);
            if v > best {
                best = v;
            }
        }
        if self.gradient_candidate {
            if let Some(v) = self.gradient_candidate_value(q, node, a_index) {
                best = best.max(v);
            }
        }
        self.h * node.reward + self.decay * best
    }

    fn gradient_candidate_value(&self, q: &ScalarField, node: &NodeTerms, a_index: usize) -> Option<f64> {
        let (n, m) = (self.n, self.m);
        let d = n + m;
        let a = self.action_grid.node_point(a_index);
        let mut z = [0.0; MAX_AXES];
        for k in 0..n {
            let ax = &self.grid.axes()[k];
            let (i, t) = node.x_cells[k];
            z[k] = (1.0 - t) * ax.coord(i) + t * ax.coord(i + 1);
        }
        z[n..d].copy_from_slice(&a);
        let mut g = [0.0; MAX_AXES];
        for i in 0..m {
            g[i] = q.partial_unchecked(&z[..d], n + i);
        }
        let mut b = [0.0; MAX_AXES];
        hamiltonian_maximizer_into(&g[..m], self.lipschitz, self.p, &mut b[..m]).ok()?;
        if let Some(bx) = &self.box_constraint {
            let mut a_ref = a.clone();
            clip_in_place(&mut a_ref, bx);
            cone_project_in_place(&mut b[..m], &a_ref, bx);
        }
        let mut cells = [(0usize, 0.0); MAX_AXES];
        cells[..n].copy_from_slice(&node.x_cells[..n]);
        let mut a_next = [0.0; MAX_AXES];
        for i in 0..m {
            a_next[i] = a[i] + self.h * b[i];
        }
        if let Some(bx) = &self.box_constraint {
            clip_in_place(&mut a_next[..m], bx);
        }
        for i in 0..m {
            cells[n + i] = self.action_grid.axes()[i].locate(a_next[i]);
        }
        Some(q.interpolate_located(&cells[..d]))
    }

    /// Applies the operator to `old`, writing into `new`. Returns the sup-norm change.
    pub fn apply(&self, old: &ScalarField, new: &mut ScalarField) -> Result<f64> {
        if old.grid() != &self.grid || new.grid() != &self.grid {
            return Err(Error::GridMismatch("table grid differs from the plan grid".into()));
        }
        new.values_mut().par_iter_mut().enumerate().for_each(|(flat, out)| {
            *out = self.node_value(old, flat);
        });
        let mut change = 0.0f64;
        for (i, (a, b)) in new.values().iter().zip(old.values()).enumerate() {
            if !a.is_finite() {
                return Err(Error::numerical(format!("non-finite value at node {i}")));
            }
            change = change.max((a - b).abs());
        }
        Ok(change)
    }
}

/// One sweep of the operator applied to `q`.
pub fn bellman_sweep(
    q: &QTable,
    problem: &ControlProblem,
    lipschitz: f64,
    p: NormIndex,
    cfg: &SolverConfig,
) -> Result<(QTable, f64)> {
    let plan = SweepPlan::new(problem, q.grid(), lipschitz, p, cfg)?;
    let mut next = q.clone();
    let change = plan.apply(&q.field, &mut next.field)?;
    next.lipschitz = lipschitz;
    next.p = p;
    next.time_step = cfg.time_step;
    next.stats.sweeps += 1;
    next.stats.history.push(change);
    Ok((next, change))
}

fn iterate<F>(field: &mut ScalarField, cfg: &SolverConfig, mut apply: F) -> Result<SolveStats>
where
    F: FnMut(&ScalarField, &mut ScalarField) -> Result<f64>,
{
    let mut stats = SolveStats::default();
    let mut scratch = field.clone();
    while stats.sweeps < cfg.max_sweeps {
        let change = apply(field, &mut scratch)?;
        std::mem::swap(field, &mut scratch);
        stats.sweeps += 1;
        stats.history.push(change);
        if change < cfg.stop_tol {
            stats.converged = true;
            return Ok(stats);
        }
    }
    let last = stats.history.last().copied().unwrap_or(f64::INFINITY);
    if last > 100.0 * cfg.stop_tol {
        return Err(Error::NonConvergence { sweeps: stats.sweeps, last_change: last });
    }
    Ok(stats)
}

/// Fixed point of the sweep operator, iterated from `Q = 0`.
pub fn solve_q_l(
    problem: &ControlProblem,
    grid: &Grid,
    lipschitz: f64,
    p: NormIndex,
    cfg: &SolverConfig,
) -> Result<QTable> {
    let plan = SweepPlan::new(problem, grid, lipschitz, p, cfg)?;
    let mut table = QTable::zeros(problem, grid.clone(), lipschitz, p, cfg.time_step)?;
    table.stats = iterate(&mut table.field, cfg, |old, new| plan.apply(old, new))?;
    Ok(table)
}

/// Classical value `Q(x)` with the action maximized pointwise over `action_candidates`.
pub fn solve_q_classic(
    problem: &ControlProblem,
    x_grid: &Grid,
    action_candidates: &[Vec<f64>],
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveStats)> {
    cfg.validate(problem.discount())?;
    let n = problem.state_dim();
    check_dim(n, x_grid.ndim())?;
    if action_candidates.is_empty() {
        return Err(Error::invalid("classic solve needs at least one action candidate"));
    }
    for a in action_candidates {
        check_dim(problem.action_dim(), a.len())?;
    }
    let h = cfg.time_step;
    let decay = 1.0 - problem.discount() * h;
    // Per (node, candidate): reward and landing cells.
    let mut terms: Vec<Vec<(f64, [(usize, f64); MAX_AXES])>> = Vec::with_capacity(x_grid.node_count());
    let mut fx = vec![0.0; n];
    for flat in 0..x_grid.node_count() {
        let x = x_grid.node_point(flat);
        let mut row = Vec::with_capacity(action_candidates.len());
        for a in action_candidates {
            problem.dynamics_into(&x, a, &mut fx);
            let r = problem.reward(&x, a);
            if !r.is_finite() || fx.iter().any(|v| !v.is_finite()) {
                return Err(Error::numerical(format!("non-finite dynamics or reward at x={x:?}, a={a:?}")));
            }
            let mut cells = [(0usize, 0.0); MAX_AXES];
            for k in 0..n {
                cells[k] = x_grid.axes()[k].locate(x[k] + h * fx[k]);
            }
            row.push((r, cells));
        }
        terms.push(row);
    }
    let mut field = ScalarField::constant(x_grid.clone(), 0.0);
    let stats = iterate(&mut field, cfg, |old, new| {
        new.values_mut().par_iter_mut().enumerate().for_each(|(flat, out)| {
            *out = terms[flat]
                .iter()
                .map(|(r, cells)| h * r + decay * old.interpolate_located(&cells[..n]))
                .fold(f64::NEG_INFINITY, f64::max);
        });
        let mut change = 0.0f64;
        for (a, b) in new.values().iter().zip(old.values()) {
            if !a.is_finite() {
                return Err(Error::numerical("non-finite value in classic solve"));
            }
            change = change.max((a - b).abs());
        }
        Ok(change)
    })?;
    Ok((field, stats))
}

/// `gamma Q - D_x Q . f - L |D_a Q|_q - r` at `point = (x, a)` using grid differences.
pub fn pde_residual(
    q: &QTable,
    problem: &ControlProblem,
    lipschitz: f64,
    p: NormIndex,
    point: &[f64],
) -> Result<f64> {
    let n = problem.state_dim();
    check_dim(q.grid().ndim(), point.len())?;
    check_dim(n, q.state_dim)?;
    if !q.grid().contains(point) {
        return Err(Error::invalid(format!("residual point {point:?} lies outside the grid")));
    }
    let (x, a) = point.split_at(n);
    let grad = q.field.gradient(point)?;
    let f = problem.dynamics(x, a);
    let drift: f64 = grad[..n].iter().zip(&f).map(|(g, v)| g * v).sum();
    let ham = lipschitz * lp_norm(&grad[n..], p.dual());
    let value = q.field.interpolate(point)?;
    Ok(problem.discount() * value - drift - ham - problem.reward(x, a))
}

pub fn sup_diff(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch("fields live on different grids".into()));
    }
    Ok(a.values().iter().zip(b.values()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())))
}

/// Maximum over nodes in the central `keep` fraction of `|D_x Q|_2` and `L |D_a Q|_2`.
pub fn gradient_bounds(q: &QTable, keep: f64) -> (f64, f64) {
    let grid = q.grid();
    let n = q.state_dim;
    let d = grid.ndim();
    let mut multi = vec![0; d];
    let (mut gx, mut ga) = (0.0f64, 0.0f64);
    for flat in 0..grid.node_count() {
        grid.multi_index(flat, &mut multi);
        if !grid.is_inner(&multi, 0..d, keep) {
            continue;
        }
        let z = grid.node_point(flat);
        let g = q.field.gradient(&z).expect("dimension checked");
        gx = gx.max(lp_norm(&g[..n], NormIndex::TWO));
        ga = ga.max(q.lipschitz * lp_norm(&g[n..], NormIndex::TWO));
    }
    (gx, ga)
}
