//! Discrete model of the weighted curve space.
//!
//! A [`Curve`] stores values on the uniform grid `x_j = j dx`, `j = 0..=J`,
//! and is interpreted as the piecewise-linear interpolant on `[0, J dx]`
//! continued by the constant `values[J]` beyond. The last node is therefore
//! also the value at infinity. On this class the shift by a whole number of
//! cells is exact, and with a closed-form antiderivative of `w` so are the
//! norms.

use std::ops::{Add, Index, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weight::WeightFunction;

/// Element of the truncated state space `U = R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HilbertPoint(pub Vec<f64>);

impl HilbertPoint {
    pub fn zero(dim: usize) -> Self {
        HilbertPoint(vec![0.0; dim])
    }

    pub fn splat(dim: usize, value: f64) -> Self {
        HilbertPoint(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &HilbertPoint) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, c: f64) -> HilbertPoint {
        HilbertPoint(self.0.iter().map(|v| c * v).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for HilbertPoint {
    fn from(v: Vec<f64>) -> Self {
        HilbertPoint(v)
    }
}

impl Index<usize> for HilbertPoint {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &HilbertPoint {
    type Output = HilbertPoint;
    fn add(self, rhs: &HilbertPoint) -> HilbertPoint {
        HilbertPoint(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &HilbertPoint {
    type Output = HilbertPoint;
    fn sub(self, rhs: &HilbertPoint) -> HilbertPoint {
        HilbertPoint(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Grid geometry shared by curves and curve operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dx: f64,
    /// Index of the last node, `J`.
    pub cells: usize,
}

impl Grid {
    pub fn new(dx: f64, cells: usize) -> Result<Self> {
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::InvalidCurve(format!("grid step must be positive, got {dx}")));
        }
        if cells < 1 {
            return Err(Error::InvalidCurve("grid needs at least one cell".into()));
        }
        Ok(Grid { dx, cells })
    }

    /// Smallest grid with step `dx` whose end is at least `x_max`.
    pub fn covering(dx: f64, x_max: f64) -> Result<Self> {
        let cells = ((x_max / dx) - 1e-9).ceil().max(1.0) as usize;
        Grid::new(dx, cells)
    }

    pub fn nodes(&self) -> usize {
        self.cells + 1
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.dx
    }

    pub fn end(&self) -> f64 {
        self.node(self.cells)
    }
}

/// Piecewise-linear curve with constant tail.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    grid: Grid,
    dim: usize,
    /// Node-major storage, `(J + 1) * dim` entries.
    data: Vec<f64>,
}

impl Curve {
    pub fn zero(grid: Grid, dim: usize) -> Self {
        assert!(dim >= 1, "curve dimension must be positive");
        Curve {
            grid,
            dim,
            data: vec![0.0; grid.nodes() * dim],
        }
    }

    pub fn constant(grid: Grid, u: &HilbertPoint) -> Self {
        let data = (0..grid.nodes()).flat_map(|_| u.0.iter().copied()).collect();
        Curve {
            grid,
            dim: u.dim(),
            data,
        }
    }

    /// Samples `f` at every node. The last node becomes the tail.
    pub fn from_fn<F>(grid: Grid, dim: usize, mut f: F) -> Self
    where
        F: FnMut(f64, &mut [f64]),
    {
        let mut c = Curve::zero(grid, dim);
        for j in 0..grid.nodes() {
            let x = grid.node(j);
            f(x, &mut c.data[j * dim..(j + 1) * dim]);
        }
        c
    }

    /// Scalar curve sampled from `f`.
    pub fn scalar_fn<F: Fn(f64) -> f64>(grid: Grid, f: F) -> Self {
        Curve::from_fn(grid, 1, |x, out| out[0] = f(x))
    }

    pub fn from_values(grid: Grid, values: &[HilbertPoint]) -> Result<Self> {
        if values.len() != grid.nodes() {
            return Err(Error::InvalidCurve(format!(
                "expected {} node values, got {}",
                grid.nodes(),
                values.len()
            )));
        }
        let dim = values[0].dim();
        if dim == 0 || values.iter().any(|v| v.dim() != dim) {
            return Err(Error::InvalidCurve("inconsistent node dimensions".into()));
        }
        Curve::from_flat(grid, dim, values.iter().flat_map(|v| v.0.iter().copied()).collect())
    }

    pub fn from_flat(grid: Grid, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() != grid.nodes() * dim {
            return Err(Error::InvalidCurve(format!(
                "flat data of length {} does not fit {} nodes of dimension {dim}",
                data.len(),
                grid.nodes()
            )));
        }
        let c = Curve { grid, dim, data };
        c.check_finite()?;
        Ok(c)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx
    }

    pub fn cells(&self) -> usize {
        self.grid.cells
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn node_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn values(&self) -> Vec<HilbertPoint> {
        self.data
            .chunks_exact(self.dim)
            .map(|c| HilbertPoint(c.to_vec()))
            .collect()
    }

    pub fn tail(&self) -> &[f64] {
        self.node(self.grid.cells)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::InvalidCurve(format!(
                "non-finite value at node {}",
                i / self.dim
            ))),
        }
    }

    pub fn same_layout(&self, other: &Curve) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "grids {:?} and {:?} differ",
                self.grid, other.grid
            )));
        }
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Curve {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Curve) -> Result<()> {
        self.same_layout(other)?;
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += c * b);
        Ok(())
    }

    pub fn try_add(&self, other: &Curve) -> Result<Curve> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn try_sub(&self, other: &Curve) -> Result<Curve> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }
}

/// Lifted diffusion coefficient: one `d x m` matrix per node, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveOperator {
    grid: Grid,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CurveOperator {
    pub fn zero(grid: Grid, rows: usize, cols: usize) -> Self {
        CurveOperator {
            grid,
            rows,
            cols,
            data: vec![0.0; grid.nodes() * rows * cols],
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn matrix(&self, j: usize) -> &[f64] {
        let n = self.rows * self.cols;
        &self.data[j * n..(j + 1) * n]
    }

    pub fn matrix_mut(&mut self, j: usize) -> &mut [f64] {
        let n = self.rows * self.cols;
        &mut self.data[j * n..(j + 1) * n]
    }

    pub fn tail_matrix(&self) -> &[f64] {
        self.matrix(self.grid.cells)
    }

    /// The curve `x -> B(x) v`.
    pub fn apply(&self, v: &[f64]) -> Result<Curve> {
        let mut out = Curve::zero(self.grid, self.rows);
        self.apply_add(v, 1.0, &mut out)?;
        Ok(out)
    }

    /// `out += c * B v`.
    pub fn apply_add(&self, v: &[f64], c: f64, out: &mut Curve) -> Result<()> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: v.len(),
            });
        }
        if out.grid != self.grid || out.dim != self.rows {
            return Err(Error::GridMismatch("operator and curve layouts differ".into()));
        }
        let n = self.rows * self.cols;
        for (mat, node) in self
            .data
            .chunks_exact(n)
            .zip(out.data.chunks_exact_mut(self.rows))
        {
            for (row, o) in mat.chunks_exact(self.cols).zip(node.iter_mut()) {
                *o += c * dot(row, v);
            }
        }
        Ok(())
    }
}

/// Per-grid quantities of a weight: cell masses `int_cell w` and `V` at
/// every node. Build once and reuse in hot loops.
#[derive(Debug, Clone)]
pub struct GridMetric {
    grid: Grid,
    cell_mass: Vec<f64>,
    inv_at_node: Vec<f64>,
    inv_total: f64,
}

impl GridMetric {
    pub fn new(w: &WeightFunction, grid: Grid) -> Self {
        let cell_mass = (0..grid.cells)
            .map(|j| w.cell_mass(grid.node(j), grid.node(j + 1)))
            .collect();
        let inv_at_node = if w.has_exact_antiderivative() {
            (0..grid.nodes()).map(|j| w.inv_integral(grid.node(j))).collect()
        } else {
            let mut acc = 0.0;
            let mut v = Vec::with_capacity(grid.nodes());
            v.push(0.0);
            for j in 0..grid.cells {
                acc += w.inv_cell_mass(grid.node(j), grid.node(j + 1));
                v.push(acc);
            }
            v
        };
        GridMetric {
            grid,
            cell_mass,
            inv_at_node,
            inv_total: w.inv_integral_total(),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn cell_masses(&self) -> &[f64] {
        &self.cell_mass
    }

    /// `V(x_j)`.
    pub fn inv_integral_at_node(&self, j: usize) -> f64 {
        self.inv_at_node[j]
    }

    pub fn inv_integral_total(&self) -> f64 {
        self.inv_total
    }

    fn check(&self, h: &Curve) -> Result<()> {
        if h.grid != self.grid {
            return Err(Error::GridMismatch(format!(
                "curve grid {:?} differs from metric grid {:?}",
                h.grid, self.grid
            )));
        }
        Ok(())
    }

    /// `int_0^inf w <g', h'>`.
    pub fn derivative_inner(&self, g: &Curve, h: &Curve) -> Result<f64> {
        self.check(g)?;
        g.same_layout(h)?;
        Ok(self.derivative_inner_unchecked(g, h))
    }

    fn derivative_inner_unchecked(&self, g: &Curve, h: &Curve) -> f64 {
        let d = g.dim;
        let inv_dx2 = 1.0 / (self.grid.dx * self.grid.dx);
        let mut total = 0.0;
        for (j, mass) in self.cell_mass.iter().enumerate() {
            let mut s = 0.0;
            for k in 0..d {
                let dg = g.data[(j + 1) * d + k] - g.data[j * d + k];
                let dh = h.data[(j + 1) * d + k] - h.data[j * d + k];
                s += dg * dh;
            }
            total += s * mass;
        }
        total * inv_dx2
    }

    pub fn inner(&self, g: &Curve, h: &Curve) -> Result<f64> {
        self.check(g)?;
        g.same_layout(h)?;
        Ok(dot(g.node(0), h.node(0)) + self.derivative_inner_unchecked(g, h))
    }

    pub fn norm(&self, h: &Curve) -> Result<f64> {
        self.check(h)?;
        h.check_finite()?;
        let sq = dot(h.node(0), h.node(0)) + self.derivative_inner_unchecked(h, h);
        Ok(sq.max(0.0).sqrt())
    }

    /// Same as [`GridMetric::norm`] without validation, for the solver loop.
    pub(crate) fn norm_fast(&self, h: &Curve) -> f64 {
        (dot(h.node(0), h.node(0)) + self.derivative_inner_unchecked(h, h))
            .max(0.0)
            .sqrt()
    }

    pub fn inner_inf(&self, g: &Curve, h: &Curve) -> Result<f64> {
        self.check(g)?;
        g.same_layout(h)?;
        Ok(dot(g.tail(), h.tail()) + self.derivative_inner_unchecked(g, h))
    }

    pub fn norm_inf(&self, h: &Curve) -> Result<f64> {
        self.check(h)?;
        h.check_finite()?;
        Ok((dot(h.tail(), h.tail()) + self.derivative_inner_unchecked(h, h))
            .max(0.0)
            .sqrt())
    }

    /// Seminorm `(int w |h'|^2)^(1/2)`, i.e. the weighted derivative part.
    pub fn seminorm(&self, h: &Curve) -> Result<f64> {
        self.check(h)?;
        h.check_finite()?;
        Ok(self.derivative_inner_unchecked(h, h).max(0.0).sqrt())
    }

    /// `V(x)` for `0 <= x <= J dx`, interpolating the per-cell integral.
    fn inv_integral_at(&self, w: &WeightFunction, x: f64) -> f64 {
        if w.has_exact_antiderivative() {
            return w.inv_integral(x);
        }
        let j = ((x / self.grid.dx).floor() as usize).min(self.grid.cells);
        let xj = self.grid.node(j);
        if x <= xj {
            self.inv_at_node[j]
        } else {
            self.inv_at_node[j] + w.inv_cell_mass(xj, x)
        }
    }

    /// Curve representing `delta_x^* u`: node values `(1 + V(x_j ∧ x)) u`.
    pub fn adjoint_delta(&self, w: &WeightFunction, u: &HilbertPoint, x: f64) -> Result<Curve> {
        if x < 0.0 {
            return Err(Error::NegativeArgument(x));
        }
        if x > self.grid.end() * (1.0 + 1e-12) {
            return Err(Error::BeyondGrid {
                x,
                end: self.grid.end(),
            });
        }
        let vx = self.inv_integral_at(w, x);
        Ok(Curve::from_fn(self.grid, u.dim(), |xj, out| {
            let c = if xj < x {
                1.0 + self.inv_integral_at(w, xj)
            } else {
                1.0 + vx
            };
            out.iter_mut().zip(&u.0).for_each(|(o, ui)| *o = c * ui);
        }))
    }

    /// Representer of `delta_0` on tail-zero curves under the `(w, inf)`
    /// inner product: `x -> (int_x^inf 1/w) u`, cut to zero at the grid end.
    pub fn tail_zero_representer(&self, w: &WeightFunction, u: &HilbertPoint) -> Curve {
        let exact = w.has_exact_antiderivative();
        let cells = self.grid.cells;
        Curve::from_fn(self.grid, u.dim(), |xj, out| {
            let j = (xj / self.grid.dx).round() as usize;
            let c = if j >= cells {
                0.0
            } else if exact {
                w.inv_integral_tail(xj)
            } else {
                self.inv_total - self.inv_at_node[j]
            };
            out.iter_mut().zip(&u.0).for_each(|(o, ui)| *o = c * ui);
        })
    }

    /// Representer of `delta_0` on all curves under the `(w, inf)` inner
    /// product: `x -> (1 + int_x^inf 1/w) u`.
    pub fn inf_representer(&self, w: &WeightFunction, u: &HilbertPoint) -> Curve {
        let psi = self.tail_zero_representer(w, u);
        let mut one = Curve::constant(self.grid, u);
        one.axpy(1.0, &psi).expect("same layout");
        one
    }
}

/// `||h||_w`.
pub fn norm_w(h: &Curve, w: &WeightFunction) -> Result<f64> {
    GridMetric::new(w, h.grid).norm(h)
}

/// `<g, h>_w`.
pub fn inner_w(g: &Curve, h: &Curve, w: &WeightFunction) -> Result<f64> {
    g.same_layout(h)?;
    GridMetric::new(w, g.grid).inner(g, h)
}

/// `||h||_{w,inf}`: the norm with `h(0)` replaced by the value at infinity.
pub fn norm_w_infinity(h: &Curve, w: &WeightFunction) -> Result<f64> {
    GridMetric::new(w, h.grid).norm_inf(h)
}

pub fn inner_w_infinity(g: &Curve, h: &Curve, w: &WeightFunction) -> Result<f64> {
    g.same_layout(h)?;
    GridMetric::new(w, g.grid).inner_inf(g, h)
}

/// Point evaluation `delta_x h`, linear between nodes, tail beyond the grid.
pub fn eval(h: &Curve, x: f64) -> Result<HilbertPoint> {
    if x < 0.0 || x.is_nan() {
        return Err(Error::NegativeArgument(x));
    }
    let pos = x / h.grid.dx;
    let j = pos.floor();
    if j >= h.grid.cells as f64 {
        return Ok(HilbertPoint(h.tail().to_vec()));
    }
    let j = j as usize;
    let theta = pos - j as f64;
    let (a, b) = (h.node(j), h.node(j + 1));
    Ok(HilbertPoint(
        a.iter()
            .zip(b)
            .map(|(l, r)| if theta == 0.0 { *l } else { l + theta * (r - l) })
            .collect(),
    ))
}

/// Adjoint of point evaluation with respect to `<.,.>_w`.
pub fn adjoint_delta(
    u: &HilbertPoint,
    x: f64,
    w: &WeightFunction,
    grid: Grid,
) -> Result<Curve> {
    GridMetric::new(w, grid).adjoint_delta(w, u, x)
}

/// Exact shift by `k` cells: `(S_{k dx} h)(x) = h(x + k dx)`.
pub fn shift(h: &Curve, k: usize) -> Curve {
    let mut out = h.clone();
    shift_in_place(&mut out, k);
    out
}

pub(crate) fn shift_in_place(h: &mut Curve, k: usize) {
    if k == 0 {
        return;
    }
    let d = h.dim;
    let cells = h.grid.cells;
    if k >= cells {
        let tail = h.tail().to_vec();
        for j in 0..cells {
            h.data[j * d..(j + 1) * d].copy_from_slice(&tail);
        }
        return;
    }
    h.data.copy_within(k * d.., 0);
    let tail = h.tail().to_vec();
    for j in cells - k + 1..cells {
        h.data[j * d..(j + 1) * d].copy_from_slice(&tail);
    }
}

/// Shift by an arbitrary `t >= 0` using linear interpolation between nodes.
/// Only exact when `t` is a multiple of the grid step.
pub fn shift_approx(h: &Curve, t: f64) -> Result<Curve> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeArgument(t));
    }
    let mut out = h.clone();
    for j in 0..=h.grid.cells {
        let v = eval(h, h.grid.node(j) + t)?;
        out.node_mut(j).copy_from_slice(&v.0);
    }
    Ok(out)
}

/// `delta_inf h`, the value of the constant tail.
pub fn delta_infinity(h: &Curve) -> HilbertPoint {
    HilbertPoint(h.tail().to_vec())
}

/// `pi_0`: the constant curve at the value at infinity.
pub fn project_const(h: &Curve) -> Curve {
    Curve::constant(h.grid, &delta_infinity(h))
}

/// `pi_1 = id - pi_0`: the tail-zero part.
pub fn project_h0(h: &Curve) -> Curve {
    let tail = h.tail().to_vec();
    let mut out = h.clone();
    for node in out.data.chunks_exact_mut(h.dim) {
        node.iter_mut().zip(&tail).for_each(|(v, t)| *v -= t);
    }
    out
}
