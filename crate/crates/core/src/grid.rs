//! Tensor-product discretisation of the standard Gaussian measure on ℝ^m.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature;

/// Maximum number of grid nodes (all axes combined) unless overridden.
pub const DEFAULT_NODE_BUDGET: usize = 1 << 22;
/// Largest Hermite degree accepted by [`hermite_eval`].
pub const MAX_HERMITE_DEGREE: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    GaussHermite,
    UniformTruncated,
}

impl Scheme {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gauss_hermite" => Ok(Scheme::GaussHermite),
            "uniform_truncated" => Ok(Scheme::UniformTruncated),
            other => invalid(format!("unknown grid scheme `{other}`")),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::GaussHermite => "gauss_hermite",
            Scheme::UniformTruncated => "uniform_truncated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dimension: usize,
    pub nodes_per_axis: usize,
    pub scheme: Scheme,
    /// Only read by the uniform scheme.
    pub truncation_radius: f64,
}

impl GridSpec {
    pub fn gauss_hermite(dimension: usize, nodes_per_axis: usize) -> Self {
        Self {
            dimension,
            nodes_per_axis,
            scheme: Scheme::GaussHermite,
            truncation_radius: 6.0,
        }
    }

    pub fn uniform(dimension: usize, nodes_per_axis: usize, radius: f64) -> Self {
        Self {
            dimension,
            nodes_per_axis,
            scheme: Scheme::UniformTruncated,
            truncation_radius: radius,
        }
    }

    pub fn node_count(&self) -> Option<usize> {
        let mut total: usize = 1;
        for _ in 0..self.dimension {
            total = total.checked_mul(self.nodes_per_axis)?;
        }
        Some(total)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return invalid("grid dimension must be at least 1");
        }
        if self.nodes_per_axis < 2 {
            return invalid("at least two nodes per axis are required");
        }
        if !(self.truncation_radius > 0.0 && self.truncation_radius.is_finite()) {
            return invalid("truncation radius must be positive");
        }
        Ok(())
    }
}

/// Nodes and weights of one axis together with the edge quantities used
/// by the difference operators.
#[derive(Debug, Clone)]
pub struct Axis {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `h_j = x_{j+1} - x_j`, length `n - 1`.
    pub spacing: Vec<f64>,
    /// Gaussian flux through the edge `(x_j, x_{j+1})`: the mass-weighted
    /// first moment `Σ_{k>j} x_k w_k`, length `n - 1`.
    pub flux: Vec<f64>,
    /// Measure carried by the one-sided difference stored at node `j`,
    /// length `n`. Sums to `Σ w x²`.
    pub cell: Vec<f64>,
}

impl Axis {
    fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Self {
        let n = nodes.len();
        let spacing: Vec<f64> = nodes.windows(2).map(|p| p[1] - p[0]).collect();
        // prefix on the left half, suffix on the right half: both sides are
        // sums of same-signed terms, so neither cancels.
        let mut prefix = vec![0.0; n];
        let mut acc = 0.0;
        for j in 0..n {
            acc -= nodes[j] * weights[j];
            prefix[j] = acc;
        }
        let mut suffix = vec![0.0; n];
        let mut acc = 0.0;
        for j in (0..n).rev() {
            acc += nodes[j] * weights[j];
            suffix[j] = acc;
        }
        let flux: Vec<f64> = (0..n - 1)
            .map(|j| {
                if nodes[j] + nodes[j + 1] <= 0.0 {
                    prefix[j]
                } else {
                    suffix[j + 1]
                }
            })
            .collect();
        let mut cell = vec![0.0; n];
        for j in 0..n - 1 {
            cell[j] = flux[j] * spacing[j];
        }
        // the last node reuses the last edge (backward difference), so the
        // edge measure is shared between its two users.
        let last = flux[n - 2] * spacing[n - 2];
        cell[n - 2] = 0.5 * last;
        cell[n - 1] = 0.5 * last;
        Self {
            nodes,
            weights,
            spacing,
            flux,
            cell,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Edge used by the one-sided difference at node `j`.
    pub fn edge_of(&self, j: usize) -> usize {
        j.min(self.len() - 2)
    }

    pub fn edge_length(&self, j: usize) -> f64 {
        self.spacing[self.edge_of(j)]
    }

    /// Ratio of difference measure to node weight.
    pub fn cell_ratio(&self, j: usize) -> f64 {
        self.cell[j] / self.weights[j]
    }
}

/// Tensor grid with quadrature weights for the standard Gaussian measure.
#[derive(Debug)]
pub struct GaussianGrid {
    spec: GridSpec,
    axes: Vec<Axis>,
    weights: Vec<f64>,
    strides: Vec<usize>,
    len: usize,
}

impl GaussianGrid {
    /// Builds the grid described by `spec` with the default node budget.
    pub fn build(spec: &GridSpec) -> Result<Arc<Self>> {
        Self::build_with_budget(spec, DEFAULT_NODE_BUDGET)
    }

    pub fn build_with_budget(spec: &GridSpec, budget: usize) -> Result<Arc<Self>> {
        spec.validate()?;
        let len = spec
            .node_count()
            .filter(|&c| c <= budget)
            .ok_or_else(|| {
                Error::Resource(format!(
                    "{}^{} nodes exceed the budget of {budget}",
                    spec.nodes_per_axis, spec.dimension
                ))
            })?;
        let (nodes, weights) = match spec.scheme {
            Scheme::GaussHermite => quadrature::gauss_hermite(spec.nodes_per_axis),
            Scheme::UniformTruncated => {
                quadrature::uniform_truncated(spec.nodes_per_axis, spec.truncation_radius)
            }
        };
        let axis = Axis::new(nodes, weights);
        let axes = vec![axis; spec.dimension];
        let m = spec.dimension;
        let n = spec.nodes_per_axis;
        let mut strides = vec![1; m];
        for d in (0..m.saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * n;
        }
        let mut weights = vec![1.0; len];
        for (i, w) in weights.iter_mut().enumerate() {
            for (d, axis) in axes.iter().enumerate() {
                *w *= axis.weights[(i / strides[d]) % n];
            }
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_normal()) {
            return Err(Error::Resource(
                "tensor weights underflow double precision; use fewer nodes per axis".into(),
            ));
        }
        Ok(Arc::new(Self {
            spec: spec.clone(),
            axes,
            weights,
            strides,
            len,
        }))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.spec.nodes_per_axis
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn axis(&self, d: usize) -> &Axis {
        &self.axes[d]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn stride(&self, d: usize) -> usize {
        self.strides[d]
    }

    pub fn is_uniform(&self) -> bool {
        self.spec.scheme == Scheme::UniformTruncated
    }

    /// Index of node `i` along axis `d`.
    #[inline]
    pub fn axis_index(&self, i: usize, d: usize) -> usize {
        (i / self.strides[d]) % self.spec.nodes_per_axis
    }

    pub fn multi_index(&self, i: usize) -> Vec<usize> {
        (0..self.dimension()).map(|d| self.axis_index(i, d)).collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    #[inline]
    pub fn coordinate(&self, i: usize, d: usize) -> f64 {
        self.axes[d].nodes[self.axis_index(i, d)]
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        (0..self.dimension()).map(|d| self.coordinate(i, d)).collect()
    }

    /// Measure paired with component `d` of a vector field at node `i`:
    /// the difference measure on axis `d` times node weights elsewhere.
    #[inline]
    pub fn dual_weight(&self, i: usize, d: usize) -> f64 {
        let j = self.axis_index(i, d);
        self.weights[i] * self.axes[d].cell_ratio(j)
    }

    /// Total mass of the grid.
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Largest spacing on any axis.
    pub fn max_spacing(&self) -> f64 {
        self.axes
            .iter()
            .flat_map(|a| a.spacing.iter().copied())
            .fold(0.0, f64::max)
    }

    /// Same grid object or an identical specification.
    pub fn same_as(&self, other: &GaussianGrid) -> bool {
        std::ptr::eq(self, other) || self.spec == other.spec
    }
}

/// Convenience wrapper matching the operation name used in configs.
pub fn build_grid(spec: &GridSpec) -> Result<Arc<GaussianGrid>> {
    GaussianGrid::build(spec)
}

/// Real values on the grid nodes.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<GaussianGrid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<GaussianGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("field values must be finite");
        }
        Ok(Self { grid, values })
    }

    /// Builds a field without the finiteness check; callers guarantee it.
    pub(crate) fn from_vec(grid: Arc<GaussianGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn from_fn(grid: &Arc<GaussianGrid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; grid.dimension()];
        let values = (0..grid.len())
            .map(|i| {
                for (d, xd) in x.iter_mut().enumerate() {
                    *xd = grid.coordinate(i, d);
                }
                f(&x)
            })
            .collect();
        Self::from_vec(grid.clone(), values)
    }

    pub fn constant(grid: &Arc<GaussianGrid>, c: f64) -> Self {
        Self::from_vec(grid.clone(), vec![c; grid.len()])
    }

    /// The coordinate function `x_d`.
    pub fn coordinate(grid: &Arc<GaussianGrid>, d: usize) -> Self {
        Self::from_fn(grid, |x| x[d])
    }

    pub fn grid(&self) -> &Arc<GaussianGrid> {
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

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        check_same(&self.grid, &other.grid)?;
        Ok(Self::from_vec(
            self.grid.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    /// Weighted ℓ²(γ) norm.
    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.weights())
            .map(|(v, w)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Multilinear interpolation; points outside the hull are clamped.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let grid = &self.grid;
        let m = grid.dimension();
        let mut base = 0;
        let mut frac = Vec::with_capacity(m);
        for (d, &xd) in x.iter().enumerate().take(m) {
            let nodes = &grid.axis(d).nodes;
            let n = nodes.len();
            let xd = xd.clamp(nodes[0], nodes[n - 1]);
            let j = nodes.partition_point(|&v| v <= xd).clamp(1, n - 1) - 1;
            let t = (xd - nodes[j]) / (nodes[j + 1] - nodes[j]);
            base += j * grid.stride(d);
            frac.push(t);
        }
        let mut total = 0.0;
        for corner in 0..(1usize << m) {
            let mut weight = 1.0;
            let mut index = base;
            for (d, t) in frac.iter().enumerate() {
                if corner >> d & 1 == 1 {
                    weight *= t;
                    index += grid.stride(d);
                } else {
                    weight *= 1.0 - t;
                }
            }
            if weight != 0.0 {
                total += weight * self.values[index];
            }
        }
        total
    }
}

/// `m` components per node, stored node-major.
#[derive(Debug, Clone)]
pub struct VectorField {
    grid: Arc<GaussianGrid>,
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: Arc<GaussianGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() * grid.dimension() {
            return invalid("vector field length must be m × node count");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("vector field values must be finite");
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec(grid: Arc<GaussianGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len() * grid.dimension());
        Self { grid, values }
    }

    pub fn zeros(grid: &Arc<GaussianGrid>) -> Self {
        Self::from_vec(grid.clone(), vec![0.0; grid.len() * grid.dimension()])
    }

    /// Constant field equal to `v` at every node.
    pub fn constant(grid: &Arc<GaussianGrid>, v: &[f64]) -> Result<Self> {
        if v.len() != grid.dimension() {
            return invalid("constant vector has the wrong dimension");
        }
        let values = (0..grid.len()).flat_map(|_| v.iter().copied()).collect();
        Ok(Self::from_vec(grid.clone(), values))
    }

    pub fn from_fn(grid: &Arc<GaussianGrid>, f: impl Fn(&[f64], &mut [f64])) -> Self {
        let m = grid.dimension();
        let mut values = vec![0.0; grid.len() * m];
        let mut x = vec![0.0; m];
        for i in 0..grid.len() {
            for (d, xd) in x.iter_mut().enumerate() {
                *xd = grid.coordinate(i, d);
            }
            f(&x, &mut values[i * m..(i + 1) * m]);
        }
        Self::from_vec(grid.clone(), values)
    }

    pub fn grid(&self) -> &Arc<GaussianGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, i: usize) -> &[f64] {
        let m = self.grid.dimension();
        &self.values[i * m..(i + 1) * m]
    }

    /// One component as a scalar field.
    pub fn component(&self, d: usize) -> ScalarField {
        let m = self.grid.dimension();
        ScalarField::from_vec(
            self.grid.clone(),
            (0..self.grid.len()).map(|i| self.values[i * m + d]).collect(),
        )
    }

    /// Norm induced by the vector pairing.
    pub fn norm(&self) -> f64 {
        let m = self.grid.dimension();
        let mut s = 0.0;
        for i in 0..self.grid.len() {
            for d in 0..m {
                let v = self.values[i * m + d];
                s += self.grid.dual_weight(i, d) * v * v;
            }
        }
        s.sqrt()
    }
}

pub(crate) fn check_same(a: &Arc<GaussianGrid>, b: &Arc<GaussianGrid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a.same_as(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// `Σ w_i f_i`.
pub fn integrate(f: &ScalarField) -> f64 {
    f.values.iter().zip(f.grid.weights()).map(|(v, w)| v * w).sum()
}

/// Weighted pairing of two fields of the same kind.
pub trait Pairing {
    fn pair(&self, other: &Self) -> Result<f64>;
}

impl Pairing for ScalarField {
    fn pair(&self, other: &Self) -> Result<f64> {
        check_same(&self.grid, &other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.grid.weights())
            .map(|((a, b), w)| w * a * b)
            .sum())
    }
}

impl Pairing for VectorField {
    /// Component `d` is weighted by the difference measure of axis `d`,
    /// which makes the Gaussian divergence an exact adjoint of the
    /// gradient.
    fn pair(&self, other: &Self) -> Result<f64> {
        check_same(&self.grid, &other.grid)?;
        let m = self.grid.dimension();
        let mut s = 0.0;
        for i in 0..self.grid.len() {
            for d in 0..m {
                let k = i * m + d;
                s += self.grid.dual_weight(i, d) * self.values[k] * other.values[k];
            }
        }
        Ok(s)
    }
}

pub fn inner_product<T: Pairing>(a: &T, b: &T) -> Result<f64> {
    a.pair(b)
}

/// Probabilists' Hermite polynomial `He_k` of the first coordinate.
pub fn hermite_eval(k: usize, grid: &Arc<GaussianGrid>) -> Result<ScalarField> {
    hermite_eval_axis(k, grid, 0)
}

pub fn hermite_eval_axis(k: usize, grid: &Arc<GaussianGrid>, axis: usize) -> Result<ScalarField> {
    if k > MAX_HERMITE_DEGREE {
        return invalid(format!("Hermite degree {k} exceeds {MAX_HERMITE_DEGREE}"));
    }
    if axis >= grid.dimension() {
        return invalid("Hermite axis out of range");
    }
    let values: Vec<f64> = (0..grid.len())
        .map(|i| hermite(k, grid.coordinate(i, axis)))
        .collect();
    ScalarField::new(grid.clone(), values)
        .map_err(|_| Error::Validation(format!("He_{k} overflows on this grid")))
}

/// `He_k(x)` by the three-term recurrence.
pub fn hermite(k: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for j in 0..k {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `He_k(x)/√(k!)`, all degrees `0..=kmax`; stays in range far longer
/// than the raw recurrence.
pub fn hermite_normalized(kmax: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(kmax + 1);
    out.push(1.0);
    if kmax >= 1 {
        out.push(x);
    }
    for k in 1..kmax {
        let kf = k as f64;
        let next = (x * out[k] - kf.sqrt() * out[k - 1]) / (kf + 1.0).sqrt();
        out.push(next);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_and_cells_1d() {
        let g = GaussianGrid::build(&GridSpec::gauss_hermite(1, 2)).unwrap();
        let a = g.axis(0);
        assert!((a.flux[0] - 0.5).abs() < 1e-15);
        assert!((a.cell[0] - 0.5).abs() < 1e-15 && (a.cell[1] - 0.5).abs() < 1e-15);
        for spec in [GridSpec::gauss_hermite(1, 129), GridSpec::uniform(1, 257, 6.0)] {
            let g = GaussianGrid::build(&spec).unwrap();
            let a = g.axis(0);
            assert!(a.flux.iter().all(|&q| q > 0.0));
            let second: f64 = a.nodes.iter().zip(&a.weights).map(|(x, w)| w * x * x).sum();
            let cells: f64 = a.cell.iter().sum();
            assert!((cells - second).abs() < 1e-13);
        }
    }

    #[test]
    fn strides_are_row_major() {
        let g = GaussianGrid::build(&GridSpec::gauss_hermite(2, 3)).unwrap();
        assert_eq!(g.multi_index(5), vec![1, 2]);
        assert_eq!(g.flat_index(&[2, 1]), 7);
    }

    #[test]
    fn budget_enforced() {
        let spec = GridSpec::gauss_hermite(3, 200);
        assert!(matches!(
            GaussianGrid::build_with_budget(&spec, 1000),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn hermite_recurrence() {
        assert_eq!(hermite(2, 2.0), 3.0);
        assert_eq!(hermite(3, 2.0), 2.0);
        let v = hermite_normalized(4, 1.5);
        assert!((v[3] - hermite(3, 1.5) / 6f64.sqrt()).abs() < 1e-14);
    }
}
