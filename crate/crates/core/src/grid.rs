//! Uniform grids on `[a, b]` that carry `0` as an exact node, and sampled
//! functions on them.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

const NODE_TOL: f64 = 1e-9;

/// Uniform grid `a = x_0 < ... < x_n = b` with `x_zero = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    a: f64,
    b: f64,
    h: f64,
    zero: usize,
    intervals: usize,
}

fn whole(len: f64, h: f64, what: &str) -> Result<usize> {
    let ratio = len / h;
    let n = ratio.round();
    if (ratio - n).abs() > NODE_TOL * ratio.max(1.0) {
        return Err(LabError::Grid(format!(
            "{what} = {len} is not an integer multiple of h = {h}"
        )));
    }
    Ok(n as usize)
}

impl Grid {
    /// Grid over `[a, b]` with `a < 0 < b`; both `-a/h` and `b/h` must be integers.
    pub fn new(a: f64, b: f64, h: f64) -> Result<Self> {
        if !(a < 0.0 && b > 0.0) {
            return Err(LabError::Grid(format!("need a < 0 < b, got a = {a}, b = {b}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(LabError::Grid(format!("step must be positive, got {h}")));
        }
        let left = whole(-a, h, "-a")?;
        let right = whole(b, h, "b")?;
        if left < 3 || right < 3 {
            return Err(LabError::Grid(format!(
                "need at least three intervals on each side of 0 (have {left} and {right})"
            )));
        }
        let intervals = left + right;
        Ok(Self {
            a,
            b,
            h: (b - a) / intervals as f64,
            zero: left,
            intervals,
        })
    }

    /// Grid over `[0, b]`, used by the half-line generators of the odd/even split.
    pub fn half(b: f64, h: f64) -> Result<Self> {
        if !(b > 0.0) || !(h > 0.0) {
            return Err(LabError::Grid(format!("need b > 0 and h > 0, got b = {b}, h = {h}")));
        }
        let intervals = whole(b, h, "b")?;
        if intervals < 3 {
            return Err(LabError::Grid("need at least three intervals".into()));
        }
        Ok(Self {
            a: 0.0,
            b,
            h: b / intervals as f64,
            zero: 0,
            intervals,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Index of the node at `x = 0`.
    pub fn zero_index(&self) -> usize {
        self.zero
    }

    pub fn last(&self) -> usize {
        self.intervals
    }

    pub fn is_symmetric(&self) -> bool {
        self.zero * 2 == self.intervals && (self.a + self.b).abs() <= 1e-12 * self.b
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == 0 {
            self.a
        } else if i == self.intervals {
            self.b
        } else {
            (i as f64 - self.zero as f64) * self.h
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.x(i))
    }

    /// Same interval, step divided by `factor`.
    pub fn refine(&self, factor: usize) -> Grid {
        let factor = factor.max(1);
        Grid {
            a: self.a,
            b: self.b,
            h: self.h / factor as f64,
            zero: self.zero * factor,
            intervals: self.intervals * factor,
        }
    }

    pub fn same_nodes(&self, other: &Grid) -> bool {
        self.intervals == other.intervals
            && self.zero == other.zero
            && (self.a - other.a).abs() <= 1e-12
            && (self.b - other.b).abs() <= 1e-12
    }
}

/// Values of a continuous function at the nodes of a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::Grid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &Grid, f: impl FnMut(f64) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn at_zero(&self) -> f64 {
        self.values[self.grid.zero_index()]
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self.grid.nodes().zip(&self.values).map(|(x, &v)| f(x, v)).collect();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Pointwise combination with another function on the same nodes.
    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert!(self.grid.same_nodes(&other.grid));
        let values = self.values.iter().zip(&other.values).map(|(&u, &v)| f(u, v)).collect();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max_i |self_i - other_i|`; grids must share their nodes.
    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        debug_assert!(self.grid.same_nodes(&other.grid));
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (u, v)| m.max((u - v).abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Keep every `factor`-th node; `coarse` must be this grid coarsened by `factor`.
    pub fn downsample(&self, coarse: &Grid) -> Result<GridFunction> {
        let factor = self.grid.intervals / coarse.intervals;
        if factor == 0 || coarse.refine(factor) != self.grid {
            return Err(LabError::Grid("target grid is not a coarsening of this grid".into()));
        }
        let values = (0..coarse.len()).map(|i| self.values[i * factor]).collect();
        Ok(GridFunction {
            grid: coarse.clone(),
            values,
        })
    }
}

/// Running trapezoid integral `∫_{x_0}^{x_i} f`.
pub fn cumulative_trapezoid(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Running trapezoid integral `∫_{x_i}^{x_n} f`.
pub fn cumulative_trapezoid_rev(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n.saturating_sub(1)).rev() {
        acc += 0.5 * h * (values[i] + values[i + 1]);
        out[i] = acc;
    }
    out
}

/// One-sided stencils on samples `v[0], v[1], ...` spaced `h` apart, looking
/// away from `v[0]`. Negate `h` when the samples run leftwards.
pub(crate) mod stencil {
    /// Second-order one-sided first derivative at `v[0]`.
    pub fn first(v: [f64; 3], h: f64) -> f64 {
        (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    }

    /// Second-order one-sided second derivative at `v[0]`.
    pub fn second(v: [f64; 4], h: f64) -> f64 {
        (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h)
    }
}

impl GridFunction {
    fn rightward<const N: usize>(&self, i: usize) -> [f64; N] {
        std::array::from_fn(|k| self.values[i + k])
    }

    fn leftward<const N: usize>(&self, i: usize) -> [f64; N] {
        std::array::from_fn(|k| self.values[i - k])
    }

    /// `f'(x_i+)` from nodes `i, i+1, i+2`.
    pub fn right_derivative(&self, i: usize) -> f64 {
        stencil::first(self.rightward(i), self.grid.h)
    }

    /// `f'(x_i-)` from nodes `i, i-1, i-2`.
    pub fn left_derivative(&self, i: usize) -> f64 {
        stencil::first(self.leftward(i), -self.grid.h)
    }

    /// `f''(x_i+)` from nodes `i..=i+3`.
    pub fn right_second(&self, i: usize) -> f64 {
        stencil::second(self.rightward(i), self.grid.h)
    }

    /// `f''(x_i-)` from nodes `i-3..=i`.
    pub fn left_second(&self, i: usize) -> f64 {
        stencil::second(self.leftward(i), self.grid.h)
    }

    /// Central second difference at an interior node.
    pub fn central_second(&self, i: usize) -> f64 {
        let h = self.grid.h;
        (self.values[i - 1] - 2.0 * self.values[i] + self.values[i + 1]) / (h * h)
    }
}
