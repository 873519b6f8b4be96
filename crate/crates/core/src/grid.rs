//! Rectangular N-dimensional grids, nodal scalar fields, discrete
//! differential and integral calculus, mollification, balls and the two
//! cutoff constructions used by the estimate harness.
//!
//! Grids and fields are immutable after construction. Every reduction runs
//! in a fixed (node-index) order, so results are reproducible run to run.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{abs, exp, pos, powf, sqrt};
use crate::{Error, Result};

/// Axis-aligned rectangular grid with at least 3 nodes per axis.
///
/// Nodes are stored row-major with the last axis contiguous. Node `k` along
/// an axis sits at `origin + k * spacing`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    origin: Vec<f64>,
    extent: Vec<f64>,
    shape: Vec<usize>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(origin: Vec<f64>, extent: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        let dim = shape.len();
        if dim == 0 {
            return Err(Error::Argument("grid dimension must be >= 1"));
        }
        if origin.len() != dim || extent.len() != dim {
            return Err(Error::Argument("origin/extent/shape lengths must agree"));
        }
        for k in 0..dim {
            if !origin[k].is_finite() {
                return Err(Error::Argument("grid origin must be finite"));
            }
            if !(extent[k] > 0.0) || !extent[k].is_finite() {
                return Err(Error::Argument("grid extent must be positive and finite"));
            }
            if shape[k] < 3 {
                return Err(Error::Argument("grids need at least 3 nodes per axis"));
            }
        }
        let spacing: Vec<f64> = (0..dim).map(|k| extent[k] / (shape[k] - 1) as f64).collect();
        let mut strides = vec![0usize; dim];
        let mut acc = 1usize;
        for k in (0..dim).rev() {
            strides[k] = acc;
            acc = acc
                .checked_mul(shape[k])
                .ok_or(Error::Argument("grid node count overflows"))?;
        }
        Ok(Grid { origin, extent, shape, spacing, strides })
    }

    /// Uniform grid on `[0, 1]^dim` with `nodes` nodes per axis.
    pub fn unit(dim: usize, nodes: usize) -> Result<Self> {
        Grid::new(vec![0.0; dim], vec![1.0; dim], vec![nodes; dim])
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub(crate) fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(0.0, f64::max)
    }

    pub fn node_count(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn cell_count(&self) -> usize {
        self.shape.iter().map(|n| n - 1).product()
    }

    /// Volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Total volume of the covered rectangle.
    pub fn domain_volume(&self) -> f64 {
        self.extent.iter().product()
    }

    pub fn domain_diameter(&self) -> f64 {
        sqrt(self.extent.iter().map(|e| e * e).sum())
    }

    #[inline]
    pub fn index_of(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(m, s)| m * s).sum()
    }

    #[inline]
    pub fn axis_pos(&self, idx: usize, axis: usize) -> usize {
        (idx / self.strides[axis]) % self.shape[axis]
    }

    pub fn decompose(&self, idx: usize, out: &mut [usize]) {
        for k in 0..self.dim() {
            out[k] = self.axis_pos(idx, k);
        }
    }

    /// Physical coordinates of a node, written into `out`.
    pub fn coord(&self, idx: usize, out: &mut [f64]) {
        for k in 0..self.dim() {
            out[k] = self.origin[k] + self.axis_pos(idx, k) as f64 * self.spacing[k];
        }
    }

    pub fn node_coord(&self, idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.coord(idx, &mut out);
        out
    }

    /// Number of node layers between this node and the grid boundary
    /// (zero for boundary nodes).
    pub fn boundary_depth(&self, idx: usize) -> usize {
        (0..self.dim())
            .map(|k| {
                let p = self.axis_pos(idx, k);
                p.min(self.shape[k] - 1 - p)
            })
            .min()
            .unwrap_or(0)
    }

    #[inline]
    pub fn is_boundary(&self, idx: usize) -> bool {
        self.boundary_depth(idx) == 0
    }

    /// Trapezoidal quadrature weight of a node (halved at axis endpoints).
    pub fn trapezoid_weight(&self, idx: usize) -> f64 {
        let mut w = 1.0;
        for k in 0..self.dim() {
            let p = self.axis_pos(idx, k);
            w *= self.spacing[k];
            if p == 0 || p == self.shape[k] - 1 {
                w *= 0.5;
            }
        }
        w
    }

    /// True when the closed ball lies strictly inside the grid rectangle.
    pub fn contains_ball(&self, center: &[f64], radius: f64) -> bool {
        if center.len() != self.dim() || !(radius > 0.0) {
            return false;
        }
        (0..self.dim()).all(|k| {
            center[k] - radius > self.origin[k]
                && center[k] + radius < self.origin[k] + self.extent[k]
        })
    }

    /// Calls `f(node_index, squared_distance)` for every node whose center
    /// lies in the closed ball, in increasing node-index order within the
    /// bounding box. Returns the number of nodes visited.
    pub(crate) fn for_each_ball_node(
        &self,
        center: &[f64],
        radius: f64,
        mut f: impl FnMut(usize),
    ) -> Result<usize> {
        if center.len() != self.dim() {
            return Err(Error::Argument("ball center dimension mismatch"));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Argument("ball radius must be positive and finite"));
        }
        let dim = self.dim();
        let mut lo = vec![0usize; dim];
        let mut hi = vec![0usize; dim];
        for k in 0..dim {
            let a = (center[k] - radius - self.origin[k]) / self.spacing[k];
            let b = (center[k] + radius - self.origin[k]) / self.spacing[k];
            let last = (self.shape[k] - 1) as f64;
            if b < 0.0 || a > last {
                return Ok(0);
            }
            lo[k] = if a <= 0.0 { 0 } else { (a - 1e-12).ceil_to_usize() };
            hi[k] = if b >= last { self.shape[k] - 1 } else { (b + 1e-12).floor_to_usize() };
            if lo[k] > hi[k] {
                return Ok(0);
            }
        }
        let r2 = radius * radius;
        let mut multi = lo.clone();
        let mut count = 0usize;
        'outer: loop {
            let mut d2 = 0.0;
            for k in 0..dim {
                let x = self.origin[k] + multi[k] as f64 * self.spacing[k] - center[k];
                d2 += x * x;
            }
            if d2 <= r2 * (1.0 + 1e-14) {
                f(self.index_of(&multi));
                count += 1;
            }
            let mut k = dim;
            loop {
                if k == 0 {
                    break 'outer;
                }
                k -= 1;
                if multi[k] < hi[k] {
                    multi[k] += 1;
                    break;
                }
                multi[k] = lo[k];
            }
        }
        Ok(count)
    }
}

trait FloatIndex {
    fn ceil_to_usize(self) -> usize;
    fn floor_to_usize(self) -> usize;
}

impl FloatIndex for f64 {
    fn ceil_to_usize(self) -> usize {
        let c = libm::ceil(self);
        if c < 0.0 {
            0
        } else {
            c as usize
        }
    }
    fn floor_to_usize(self) -> usize {
        let fl = libm::floor(self);
        if fl < 0.0 {
            0
        } else {
            fl as usize
        }
    }
}

/// Nodal scalar field on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    /// Validates the value count and finiteness of every entry.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Argument("value count must equal the grid node count"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("grid function values must be finite"));
        }
        Ok(GridFunction { grid, values })
    }

    pub(crate) fn from_values_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        GridFunction { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.node_count();
        GridFunction { grid, values: vec![0.0; n] }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        let n = grid.node_count();
        GridFunction { grid, values: vec![c; n] }
    }

    /// Samples `f` at every node coordinate.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let n = grid.node_count();
        let mut coord = vec![0.0; grid.dim()];
        let mut values = Vec::with_capacity(n);
        for idx in 0..n {
            grid.coord(idx, &mut coord);
            values.push(f(&coord));
        }
        GridFunction { grid, values }
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

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Nodewise map onto the same grid.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Nodewise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &GridFunction, mut f: impl FnMut(f64, f64) -> f64) -> Result<GridFunction> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("zip_map requires identical grids"));
        }
        Ok(GridFunction {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(abs(v)))
    }
}

/// Discrete partial derivative along `axis`: central differences at interior
/// nodes, second-order one-sided stencils at the two boundary layers. Exact
/// on affine fields.
pub fn partial(u: &GridFunction, axis: usize) -> Result<GridFunction> {
    let grid = u.grid();
    if axis >= grid.dim() {
        return Err(Error::Argument("axis index out of range"));
    }
    let n = grid.shape()[axis];
    let s = grid.strides[axis];
    let h = grid.spacing()[axis];
    let inv2h = 1.0 / (2.0 * h);
    let v = u.values();
    let mut out = vec![0.0; v.len()];
    for idx in 0..v.len() {
        let p = grid.axis_pos(idx, axis);
        out[idx] = if p == 0 {
            (-3.0 * v[idx] + 4.0 * v[idx + s] - v[idx + 2 * s]) * inv2h
        } else if p == n - 1 {
            (3.0 * v[idx] - 4.0 * v[idx - s] + v[idx - 2 * s]) * inv2h
        } else {
            (v[idx + s] - v[idx - s]) * inv2h
        };
    }
    Ok(GridFunction::from_values_unchecked(grid.clone(), out))
}

/// Per-cell forward-difference gradient: component `k` is the forward
/// difference across the cell averaged over the `2^(N-1)` parallel edges.
/// Exact on affine fields.
pub fn cell_gradient(u: &GridFunction, cell: &[usize]) -> Result<Vec<f64>> {
    let grid = u.grid();
    let dim = grid.dim();
    if cell.len() != dim {
        return Err(Error::Argument("cell index dimension mismatch"));
    }
    for k in 0..dim {
        if cell[k] + 1 >= grid.shape()[k] {
            return Err(Error::Argument("cell index out of range"));
        }
    }
    let base = grid.index_of(cell);
    let corners = corner_offsets(grid);
    let mut out = vec![0.0; dim];
    cell_gradient_into(grid, u.values(), base, &corners, &mut out);
    Ok(out)
}

/// Node-index offsets of the `2^N` corners of a cell; bit `k` of the corner
/// id means one step along axis `k`.
pub(crate) fn corner_offsets(grid: &Grid) -> Vec<usize> {
    let dim = grid.dim();
    let mut out = Vec::with_capacity(1 << dim);
    for bits in 0..(1usize << dim) {
        let mut off = 0usize;
        for k in 0..dim {
            if bits >> k & 1 == 1 {
                off += grid.strides[k];
            }
        }
        out.push(off);
    }
    out
}

#[inline]
pub(crate) fn cell_gradient_into(
    grid: &Grid,
    values: &[f64],
    base: usize,
    corners: &[usize],
    out: &mut [f64],
) {
    let dim = grid.dim();
    let scale = 1.0 / (1usize << (dim - 1)) as f64;
    for k in 0..dim {
        let mut acc = 0.0;
        for (bits, &off) in corners.iter().enumerate() {
            let v = values[base + off];
            if bits >> k & 1 == 1 {
                acc += v;
            } else {
                acc -= v;
            }
        }
        out[k] = acc * scale / grid.spacing()[k];
    }
}

/// Iterates cells in row-major order, calling `f(base_node_index)`.
pub(crate) fn for_each_cell(grid: &Grid, mut f: impl FnMut(usize)) {
    let dim = grid.dim();
    let mut multi = vec![0usize; dim];
    let mut base = 0usize;
    loop {
        f(base);
        let mut k = dim;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            if multi[k] + 1 < grid.shape()[k] - 1 {
                multi[k] += 1;
                base += grid.strides[k];
                break;
            }
            base -= multi[k] * grid.strides[k];
            multi[k] = 0;
        }
    }
}

/// Discrete mollification: convolution with the normalized compactly
/// supported bump `exp(-1 / (1 - |x/eps|^2))` sampled at node offsets of
/// length `< eps` and renormalized to unit discrete mass node by node.
///
/// Preserves constants exactly and obeys the discrete maximum principle.
/// When `eps` is below the grid spacing the field is returned unchanged and
/// the flag is `false`.
pub fn mollify(u: &GridFunction, eps: f64) -> Result<(GridFunction, bool)> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Argument("mollification radius must be positive and finite"));
    }
    let grid = u.grid();
    if eps < grid.min_spacing() {
        return Ok((u.clone(), false));
    }
    let dim = grid.dim();
    let mut reach = vec![0isize; dim];
    for k in 0..dim {
        reach[k] = (eps / grid.spacing()[k]) as isize;
    }
    // kernel entries: (multi offset, weight)
    let mut offsets: Vec<Vec<isize>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut off = reach.iter().map(|r| -r).collect::<Vec<_>>();
    'outer: loop {
        let mut rho2 = 0.0;
        for k in 0..dim {
            let x = off[k] as f64 * grid.spacing()[k] / eps;
            rho2 += x * x;
        }
        if rho2 < 1.0 {
            let w = exp(-1.0 / (1.0 - rho2));
            if w > 0.0 {
                offsets.push(off.clone());
                weights.push(w);
            }
        }
        let mut k = dim;
        loop {
            if k == 0 {
                break 'outer;
            }
            k -= 1;
            if off[k] < reach[k] {
                off[k] += 1;
                break;
            }
            off[k] = -reach[k];
        }
    }
    if offsets.len() <= 1 {
        return Ok((u.clone(), false));
    }
    let v = u.values();
    let n = grid.node_count();
    let mut out = vec![0.0; n];
    let mut multi = vec![0usize; dim];
    for idx in 0..n {
        grid.decompose(idx, &mut multi);
        let mut wsum = 0.0;
        let mut vsum = 0.0;
        'entries: for (e, w) in offsets.iter().zip(&weights) {
            let mut target = 0usize;
            for k in 0..dim {
                let p = multi[k] as isize + e[k];
                if p < 0 || p >= grid.shape()[k] as isize {
                    continue 'entries;
                }
                target += p as usize * grid.strides[k];
            }
            wsum += w;
            vsum += w * v[target];
        }
        out[idx] = vsum / wsum;
    }
    Ok((GridFunction::from_values_unchecked(grid.clone(), out), true))
}

/// Nodal L^q norm over a ball: `(sum |u|^q vol)^(1/q)`, or the averaged form
/// `(mean |u|^q)^(1/q)` when `averaged` is set. Membership is by node-center
/// inclusion; the quadrature weight is the plain cell volume.
pub fn lp_norm_on_ball(
    u: &GridFunction,
    center: &[f64],
    radius: f64,
    q: f64,
    averaged: bool,
) -> Result<f64> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::Argument("norm exponent must be finite and >= 1"));
    }
    let grid = u.grid();
    let v = u.values();
    let mut max = 0.0f64;
    let count = grid.for_each_ball_node(center, radius, |idx| {
        max = max.max(abs(v[idx]));
    })?;
    if count == 0 {
        return Err(Error::EmptyBall);
    }
    if max == 0.0 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    grid.for_each_ball_node(center, radius, |idx| {
        acc += powf(abs(v[idx]) / max, q);
    })?;
    let inner = if averaged {
        acc / count as f64
    } else {
        acc * grid.cell_volume()
    };
    Ok(max * powf(inner, 1.0 / q))
}

/// Maximum of `|u|` over the nodes of a ball.
pub fn sup_norm_on_ball(u: &GridFunction, center: &[f64], radius: f64) -> Result<f64> {
    let grid = u.grid();
    let v = u.values();
    let mut max = 0.0f64;
    let count = grid.for_each_ball_node(center, radius, |idx| {
        max = max.max(abs(v[idx]));
    })?;
    if count == 0 {
        return Err(Error::EmptyBall);
    }
    Ok(max)
}

/// `int_ball |u|^q dx` by nodal quadrature (cell volume weights).
pub fn integral_abs_pow_on_ball(u: &GridFunction, center: &[f64], radius: f64, q: f64) -> Result<f64> {
    let grid = u.grid();
    let v = u.values();
    let mut acc = 0.0;
    let count = grid.for_each_ball_node(center, radius, |idx| {
        acc += powf(abs(v[idx]), q);
    })?;
    if count == 0 {
        return Err(Error::EmptyBall);
    }
    Ok(acc * grid.cell_volume())
}

/// Ball average of `|u|^q`.
pub fn mean_abs_pow_on_ball(u: &GridFunction, center: &[f64], radius: f64, q: f64) -> Result<f64> {
    let grid = u.grid();
    let v = u.values();
    let mut acc = 0.0;
    let count = grid.for_each_ball_node(center, radius, |idx| {
        acc += powf(abs(v[idx]), q);
    })?;
    if count == 0 {
        return Err(Error::EmptyBall);
    }
    Ok(acc / count as f64)
}

/// Whole-domain L^q norm with trapezoidal quadrature weights.
pub fn lp_norm(u: &GridFunction, q: f64) -> Result<f64> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::Argument("norm exponent must be finite and >= 1"));
    }
    let grid = u.grid();
    let max = u.max_abs();
    if max == 0.0 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for (idx, &v) in u.values().iter().enumerate() {
        acc += grid.trapezoid_weight(idx) * powf(abs(v) / max, q);
    }
    Ok(max * powf(acc, 1.0 / q))
}

/// Whole-domain trapezoidal integral of `u`.
pub fn integral(u: &GridFunction) -> f64 {
    u.values()
        .iter()
        .enumerate()
        .map(|(idx, &v)| u.grid().trapezoid_weight(idx) * v)
        .sum()
}

/// Piecewise-linear radial cutoff: 1 on the inner ball, 0 outside the outer
/// ball, linear ramp in between, so the Lipschitz constant is `1/(R - r)`.
pub fn cutoff_eta(grid: &Grid, center: &[f64], r: f64, big_r: f64) -> Result<GridFunction> {
    if !(r > 0.0 && r < big_r) {
        return Err(Error::Argument("cutoff radii must satisfy 0 < r < R"));
    }
    if center.len() != grid.dim() {
        return Err(Error::Argument("cutoff center dimension mismatch"));
    }
    if !grid.contains_ball(center, big_r) {
        return Err(Error::Argument("outer cutoff ball must lie inside the grid"));
    }
    let inv = 1.0 / (big_r - r);
    Ok(GridFunction::from_fn(grid.clone(), |x| {
        let d = dist(x, center);
        (pos(big_r - d) * inv).min(1.0)
    }))
}

/// Smooth radial cutoff `zeta = chi^4`, `chi` the cubic smoothstep of the
/// radial coordinate mapped from `[r0, R0]` onto `[1, 0]`. The fourth power
/// makes `|grad zeta|^2 <= C zeta / (R0 - r0)^2` hold pointwise; the second
/// differences obey `|D2 zeta| <= C / (R0 - r0)^2` with the same reported
/// constant. Returns the field together with that constant `C`.
pub fn cutoff_zeta(grid: &Grid, center: &[f64], r0: f64, big_r0: f64) -> Result<(GridFunction, f64)> {
    if !(r0 > 0.0 && r0 < big_r0) {
        return Err(Error::Argument("cutoff radii must satisfy 0 < r0 < R0"));
    }
    if center.len() != grid.dim() {
        return Err(Error::Argument("cutoff center dimension mismatch"));
    }
    if !grid.contains_ball(center, big_r0) {
        return Err(Error::Argument("outer cutoff ball must lie inside the grid"));
    }
    let inv = 1.0 / (big_r0 - r0);
    let field = GridFunction::from_fn(grid.clone(), |x| {
        let d = dist(x, center);
        let t = ((big_r0 - d) * inv).clamp(0.0, 1.0);
        let chi = t * t * (3.0 - 2.0 * t);
        let chi2 = chi * chi;
        chi2 * chi2
    });
    // Profile constants: sup 16 (chi chi')^2 < 15.7 for the gradient bound and
    // sup |4 (3 chi^2 chi'^2 + chi^3 chi'')| = 24 for the radial second
    // derivative; off-diagonal curvature contributes at most
    // ~2.8 (R0 - r0) / r0 in the same units. The 1.5 factor absorbs the
    // discretization error of the scans.
    let c = 1.5 * (24.0f64).max(2.8 * (big_r0 - r0) / r0);
    Ok((field, c))
}

fn dist(x: &[f64], c: &[f64]) -> f64 {
    sqrt(x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_basics() {
        let g = Grid::unit(2, 5).unwrap();
        assert_eq!(g.node_count(), 25);
        assert_eq!(g.cell_count(), 16);
        assert_eq!(g.spacing(), &[0.25, 0.25]);
        assert_eq!(g.index_of(&[1, 2]), 7);
        assert_eq!(g.axis_pos(7, 0), 1);
        assert_eq!(g.axis_pos(7, 1), 2);
        assert!(g.is_boundary(0));
        assert!(!g.is_boundary(g.index_of(&[2, 2])));
        assert_eq!(g.boundary_depth(g.index_of(&[2, 2])), 2);
        assert!(Grid::unit(2, 2).is_err());
    }

    #[test]
    fn trapezoid_weights_sum_to_volume() {
        let g = Grid::new(vec![0.0, 1.0], vec![2.0, 3.0], vec![5, 7]).unwrap();
        let total: f64 = (0..g.node_count()).map(|i| g.trapezoid_weight(i)).sum();
        assert!((total - 6.0).abs() < 1e-12);
    }

    #[test]
    fn partial_exact_on_affine() {
        let g = Grid::unit(2, 9).unwrap();
        let u = GridFunction::from_fn(g.clone(), |x| 3.0 * x[0] + 2.0 * x[1] - 0.7);
        let dx = partial(&u, 0).unwrap();
        let dy = partial(&u, 1).unwrap();
        for i in 0..u.len() {
            assert!((dx.values()[i] - 3.0).abs() < 1e-12);
            assert!((dy.values()[i] - 2.0).abs() < 1e-12);
        }
        let c = GridFunction::constant(g, 4.2);
        let dc = partial(&c, 0).unwrap();
        assert!(dc.values().iter().all(|&v| v.abs() < 1e-12));
        assert!(partial(&c, 2).is_err());
    }

    #[test]
    fn partial_central_on_quadratic() {
        let g = Grid::new(vec![0.0], vec![1.0], vec![5]).unwrap();
        let u = GridFunction::from_fn(g, |x| x[0] * x[0]);
        let d = partial(&u, 0).unwrap();
        // interior node x = 0.5 has derivative 1 exactly
        assert!((d.values()[2] - 1.0).abs() < 1e-12);
        // the one-sided second-order stencil is exact on quadratics too
        assert!((d.values()[0] - 0.0).abs() < 1e-12);
        assert!((d.values()[4] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cell_gradient_values() {
        let g = Grid::new(vec![0.0], vec![2.0], vec![3]).unwrap();
        let u = GridFunction::new(g, vec![0.0, 1.0, 4.0]).unwrap();
        assert_eq!(cell_gradient(&u, &[0]).unwrap(), vec![1.0]);
        assert_eq!(cell_gradient(&u, &[1]).unwrap(), vec![3.0]);
        assert!(cell_gradient(&u, &[2]).is_err());

        let g2 = Grid::unit(2, 4).unwrap();
        let a = GridFunction::from_fn(g2.clone(), |x| 1.5 * x[0] - 0.5 * x[1]);
        for cx in 0..3 {
            for cy in 0..3 {
                let grad = cell_gradient(&a, &[cx, cy]).unwrap();
                assert!((grad[0] - 1.5).abs() < 1e-12);
                assert!((grad[1] + 0.5).abs() < 1e-12);
            }
        }
        let z = GridFunction::zeros(g2);
        assert_eq!(cell_gradient(&z, &[1, 1]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn mollify_preserves_constants_and_flags() {
        let g = Grid::unit(2, 17).unwrap();
        let c = GridFunction::constant(g.clone(), 3.25);
        let (m, applied) = mollify(&c, 3.0 / 16.0).unwrap();
        assert!(applied);
        assert!(m.values().iter().all(|&v| (v - 3.25).abs() < 1e-12));

        let u = GridFunction::from_fn(g, |x| x[0] * x[1]);
        let (same, applied) = mollify(&u, 1.0 / 64.0).unwrap();
        assert!(!applied);
        assert_eq!(same.values(), u.values());
    }

    #[test]
    fn ball_norms() {
        let g = Grid::unit(2, 33).unwrap();
        let two = GridFunction::constant(g.clone(), 2.0);
        let c = [0.5, 0.5];
        let avg = lp_norm_on_ball(&two, &c, 0.3, 7.0, true).unwrap();
        assert!((avg - 2.0).abs() < 1e-12);
        let z = GridFunction::zeros(g.clone());
        assert_eq!(lp_norm_on_ball(&z, &c, 0.3, 2.0, false).unwrap(), 0.0);
        assert_eq!(sup_norm_on_ball(&two, &c, 0.3).unwrap(), 2.0);
        // a ball far outside the grid holds no nodes
        assert!(lp_norm_on_ball(&two, &[5.0, 5.0], 0.1, 2.0, true).is_err());
    }

    #[test]
    fn cutoff_eta_profile() {
        let g = Grid::unit(2, 65).unwrap();
        let c = [0.5, 0.5];
        // node-aligned radii: 8h and 24h, so the ramp midpoint 16h is a node
        let (r, big_r) = (0.125, 0.375);
        let eta = cutoff_eta(&g, &c, r, big_r).unwrap();
        let at = |x: f64, y: f64| {
            let i = ((x * 64.0).round()) as usize;
            let j = ((y * 64.0).round()) as usize;
            eta.values()[g.index_of(&[i, j])]
        };
        assert_eq!(at(0.5, 0.5), 1.0);
        assert_eq!(at(0.5625, 0.5), 1.0);
        assert_eq!(at(0.5, 0.96875), 0.0);
        let mid = at(0.75, 0.5);
        assert!((mid - 0.5).abs() < 1e-12);
        assert!(cutoff_eta(&g, &c, 0.3, 0.1).is_err());
    }

    #[test]
    fn cutoff_zeta_profile() {
        let g = Grid::unit(2, 65).unwrap();
        let c = [0.5, 0.5];
        let (zeta, cbound) = cutoff_zeta(&g, &c, 0.15, 0.35).unwrap();
        assert!(cbound > 0.0);
        let at = |x: f64, y: f64| {
            let i = ((x * 64.0).round()) as usize;
            let j = ((y * 64.0).round()) as usize;
            zeta.values()[g.index_of(&[i, j])]
        };
        assert_eq!(at(0.5, 0.5), 1.0);
        assert_eq!(at(0.5 + 0.1, 0.5), 1.0);
        assert_eq!(at(0.5 + 0.4, 0.5), 0.0);
        assert!(zeta.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
