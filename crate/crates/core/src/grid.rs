//! Rectangular tensor grids and node-valued scalar fields.
//!
//! Values are stored row-major (last axis fastest). Interpolation is multilinear and
//! clamps out-of-box coordinates to the boundary, so it is a convex combination of
//! node values and therefore monotone in the field.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Upper bound on axis count for interpolation (2^6 corners).
pub const MAX_AXES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        let axis = Self { lo, hi, count };
        axis.validate()?;
        Ok(axis)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::invalid(format!("axis needs lo < hi, got [{}, {}]", self.lo, self.hi)));
        }
        if self.count < 2 {
            return Err(Error::invalid(format!("axis needs at least 2 nodes, got {}", self.count)));
        }
        Ok(())
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.count - 1) as f64
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * (i as f64) / ((self.count - 1) as f64)
        }
    }

    /// Cell index and fractional offset of `c`, clamped into `[lo, hi]`.
    #[inline]
    pub fn locate(&self, c: f64) -> (usize, f64) {
        let s = (c.clamp(self.lo, self.hi) - self.lo) / self.spacing();
        let last = self.count - 2;
        let i = (s.floor() as usize).min(last);
        let t = (s - i as f64).clamp(0.0, 1.0);
        (i, t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > MAX_AXES {
            return Err(Error::invalid(format!("grid needs 1..={MAX_AXES} axes, got {}", axes.len())));
        }
        for axis in &axes {
            axis.validate()?;
        }
        let mut strides = vec![1; axes.len()];
        for k in (0..axes.len() - 1).rev() {
            strides[k] = strides[k + 1] * axes[k + 1].count;
        }
        Ok(Self { axes, strides })
    }

    /// Product grid with the axes of `first` followed by those of `second`.
    pub fn product(first: &Grid, second: &Grid) -> Result<Self> {
        let mut axes = first.axes.clone();
        axes.extend_from_slice(&second.axes);
        Self::new(axes)
    }

    /// Grid over the axes `range` of `self`.
    pub fn sub_grid(&self, range: std::ops::Range<usize>) -> Result<Self> {
        Self::new(self.axes[range].to_vec())
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for (k, stride) in self.strides.iter().enumerate() {
            out[k] = flat / stride;
            flat %= stride;
        }
    }

    pub fn node_point(&self, flat: usize) -> Vec<f64> {
        let mut multi = vec![0; self.ndim()];
        self.multi_index(flat, &mut multi);
        multi.iter().zip(&self.axes).map(|(&i, ax)| ax.coord(i)).collect()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.iter().zip(&self.axes).all(|(&c, ax)| c >= ax.lo && c <= ax.hi)
    }

    /// True if the node's coordinates on `axes` lie in the central `keep` fraction of
    /// each of those axes.
    pub fn is_inner(&self, multi: &[usize], axes: std::ops::Range<usize>, keep: f64) -> bool {
        axes.into_iter().all(|k| {
            let ax = &self.axes[k];
            let c = ax.coord(multi[k]);
            let mid = 0.5 * (ax.lo + ax.hi);
            let half = 0.5 * (ax.hi - ax.lo) * keep;
            (c - mid).abs() <= half + 1e-12 * (ax.hi - ax.lo)
        })
    }
}

/// Node values on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        check_dim(grid.node_count(), values.len())?;
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::numerical(format!("non-finite field value at node {bad}")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        let values = vec![value; grid.node_count()];
        Self { grid, values }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.node_count()).map(|i| f(&grid.node_point(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn interpolate(&self, point: &[f64]) -> Result<f64> {
        check_dim(self.grid.ndim(), point.len())?;
        Ok(self.interpolate_unchecked(point))
    }

    #[inline]
    pub fn interpolate_unchecked(&self, point: &[f64]) -> f64 {
        let mut cells = [(0usize, 0.0f64); MAX_AXES];
        for (k, (&c, ax)) in point.iter().zip(&self.grid.axes).enumerate() {
            cells[k] = ax.locate(c);
        }
        self.interpolate_located(&cells[..point.len()])
    }

    /// Multilinear interpolation from per-axis `(cell, fraction)` pairs.
    #[inline]
    pub fn interpolate_located(&self, cells: &[(usize, f64)]) -> f64 {
        let d = cells.len();
        let mut base = 0;
        for (k, &(i, _)) in cells.iter().enumerate() {
            base += i * self.grid.strides[k];
        }
        let mut corners = [0.0f64; 1 << MAX_AXES];
        let n = 1usize << d;
        for (c, slot) in corners.iter_mut().enumerate().take(n) {
            let mut offset = base;
            for k in 0..d {
                if c >> (d - 1 - k) & 1 == 1 {
                    offset += self.grid.strides[k];
                }
            }
            *slot = self.values[offset];
        }
        // Reduce the last axis first; corner bit (d-1-k) belongs to axis k.
        let mut len = n;
        for k in (0..d).rev() {
            let t = cells[k].1;
            let s = 1.0 - t;
            len /= 2;
            for j in 0..len {
                corners[j] = s * corners[2 * j] + t * corners[2 * j + 1];
            }
        }
        corners[0]
    }

    /// Central differences of the interpolant with one grid spacing per axis,
    /// one-sided where a full step would leave the box.
    pub fn gradient(&self, point: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.grid.ndim(), point.len())?;
        Ok((0..point.len()).map(|k| self.partial_unchecked(point, k)).collect())
    }

    pub(crate) fn partial_unchecked(&self, point: &[f64], k: usize) -> f64 {
        let ax = &self.grid.axes[k];
        let step = ax.spacing();
        let c = point[k].clamp(ax.lo, ax.hi);
        let mut probe = [0.0f64; MAX_AXES];
        probe[..point.len()].copy_from_slice(point);
        let probe = &mut probe[..point.len()];
        let eps = 1e-12 * (ax.hi - ax.lo);
        let (lo_c, hi_c) = if c - step < ax.lo - eps {
            (c, c + step)
        } else if c + step > ax.hi + eps {
            (c - step, c)
        } else {
            (c - step, c + step)
        };
        probe[k] = hi_c;
        let up = self.interpolate_unchecked(probe);
        probe[k] = lo_c;
        let down = self.interpolate_unchecked(probe);
        (up - down) / (hi_c - lo_c)
    }

    /// Writes the `FIELD v1` text format. `comments` are emitted first as `# ` lines.
    pub fn write_to<W: Write>(&self, mut out: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "FIELD v1")?;
        writeln!(out, "{}", self.grid.ndim())?;
        for ax in &self.grid.axes {
            writeln!(out, "{:?} {:?} {}", ax.lo, ax.hi, ax.count)?;
        }
        let row = self.grid.axes.last().map(|a| a.count).unwrap_or(1);
        let mut line = String::new();
        for chunk in self.values.chunks(row) {
            line.clear();
            for (j, v) in chunk.iter().enumerate() {
                if j > 0 {
                    line.push(' ');
                }
                write!(line, "{v:.16e}").expect("write to String");
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Parses the `FIELD v1` format, returning the field and any leading `#` comments.
    pub fn read_from<R: BufRead>(input: R) -> Result<(Self, Vec<String>)> {
        let mut comments = Vec::new();
        let mut lines = input.lines();
        let header = loop {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("missing FIELD header".into()))??;
            let trimmed = line.trim();
            if let Some(c) = trimmed.strip_prefix('#') {
                comments.push(c.trim().to_string());
            } else if !trimmed.is_empty() {
                break trimmed.to_string();
            }
        };
        if header != "FIELD v1" {
            return Err(Error::Parse(format!("unexpected header {header:?}")));
        }
        let mut rest = String::new();
        for line in lines {
            rest.push_str(&line?);
            rest.push('\n');
        }
        let mut tokens = rest.split_whitespace();
        let mut next = |what: &str| {
            tokens.next().ok_or_else(|| Error::Parse(format!("unexpected end of input reading {what}")))
        };
        let ndim: usize = parse_token(next("axis count")?)?;
        let mut axes = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let lo = parse_token(next("axis lo")?)?;
            let hi = parse_token(next("axis hi")?)?;
            let count = parse_token(next("axis count")?)?;
            axes.push(Axis { lo, hi, count });
        }
        let grid = Grid::new(axes)?;
        let mut values = Vec::with_capacity(grid.node_count());
        for _ in 0..grid.node_count() {
            values.push(parse_token(next("node value")?)?);
        }
        if let Ok(extra) = next("") {
            return Err(Error::Parse(format!("trailing token {extra:?}")));
        }
        Ok((Self::new(grid, values)?, comments))
    }
}

fn parse_token<T: std::str::FromStr>(tok: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse(format!("cannot parse {tok:?}")))
}
