//! Periodic space-time lattices and scalar samples on them.
//!
//! Space is a flat torus `T^d` (`d ∈ {1, 2}`) with `N` nodes per axis and
//! period `L`; time is `[0, 1]` sampled at `Nt` layers. Layers `0` and
//! `Nt - 1` hold Dirichlet data. The torus is flat, so no curvature terms
//! appear anywhere in the discrete operators.

mod io;
mod stencil;

pub use io::{read_binary, read_csv, write_binary, write_csv};
pub use stencil::{
    d_t, d_t_boundary, d_tt, grad_norm_sq, grad_t, gradient, inf, laplacian, sup, sup_norm,
};

use std::f64::consts::PI;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIN_NODES_PER_AXIS: usize = 8;
pub const MIN_TIME_NODES: usize = 5;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("spatial dimension must be 1 or 2, got {0}")]
    Dimension(usize),
    #[error("need at least {MIN_NODES_PER_AXIS} nodes per axis, got {0}")]
    TooFewNodes(usize),
    #[error("need at least {MIN_TIME_NODES} time nodes, got {0}")]
    TooFewLayers(usize),
    #[error("spatial period must be positive and finite, got {0}")]
    Period(f64),
    #[error("expected {expected} values, got {found}")]
    Length { expected: usize, found: usize },
    #[error("non-finite value at layer {layer}, node {node}")]
    NonFinite { layer: usize, node: usize },
    #[error("grid mismatch: {0}")]
    Mismatch(String),
    #[error("malformed field data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Uniform periodic lattice in space crossed with a uniform time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    spatial_dim: usize,
    nodes_per_axis: usize,
    spatial_period: f64,
    time_nodes: usize,
}

impl GridSpec {
    /// Grid with the default period `2π`.
    pub fn new(spatial_dim: usize, nodes_per_axis: usize, time_nodes: usize) -> Result<Self, MeshError> {
        Self::with_period(spatial_dim, nodes_per_axis, time_nodes, 2.0 * PI)
    }

    pub fn with_period(
        spatial_dim: usize,
        nodes_per_axis: usize,
        time_nodes: usize,
        spatial_period: f64,
    ) -> Result<Self, MeshError> {
        if !(1..=2).contains(&spatial_dim) {
            return Err(MeshError::Dimension(spatial_dim));
        }
        if nodes_per_axis < MIN_NODES_PER_AXIS {
            return Err(MeshError::TooFewNodes(nodes_per_axis));
        }
        if time_nodes < MIN_TIME_NODES {
            return Err(MeshError::TooFewLayers(time_nodes));
        }
        if !(spatial_period.is_finite() && spatial_period > 0.0) {
            return Err(MeshError::Period(spatial_period));
        }
        Ok(Self { spatial_dim, nodes_per_axis, spatial_period, time_nodes })
    }

    pub fn spatial_dim(&self) -> usize {
        self.spatial_dim
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn spatial_period(&self) -> f64 {
        self.spatial_period
    }

    pub fn time_nodes(&self) -> usize {
        self.time_nodes
    }

    pub fn hx(&self) -> f64 {
        self.spatial_period / self.nodes_per_axis as f64
    }

    pub fn ht(&self) -> f64 {
        1.0 / (self.time_nodes - 1) as f64
    }

    /// Number of spatial nodes in one time layer, `N^d`.
    pub fn layer_len(&self) -> usize {
        self.nodes_per_axis.pow(self.spatial_dim as u32)
    }

    pub fn interior_layers(&self) -> Range<usize> {
        1..self.time_nodes - 1
    }

    pub fn interior_len(&self) -> usize {
        (self.time_nodes - 2) * self.layer_len()
    }

    pub fn time(&self, layer: usize) -> f64 {
        layer as f64 * self.ht()
    }

    /// Coordinates `(x, y)` of a spatial node; `y = 0` on `T^1`.
    pub fn coords(&self, node: usize) -> (f64, f64) {
        let n = self.nodes_per_axis;
        let h = self.hx();
        match self.spatial_dim {
            1 => (node as f64 * h, 0.0),
            _ => ((node % n) as f64 * h, (node / n) as f64 * h),
        }
    }

    /// Periodic neighbour of `node` shifted by `offset` along `axis`.
    #[inline]
    pub fn neighbor(&self, node: usize, axis: usize, offset: isize) -> usize {
        let n = self.nodes_per_axis;
        let stride = n.pow(axis as u32);
        let coord = (node / stride) % n;
        let shifted = (coord as isize + offset).rem_euclid(n as isize) as usize;
        node - coord * stride + shifted * stride
    }

    /// Same discretisation shape (period compared to rounding).
    pub fn same_shape(&self, other: &GridSpec) -> bool {
        self.spatial_dim == other.spatial_dim
            && self.nodes_per_axis == other.nodes_per_axis
            && self.time_nodes == other.time_nodes
            && (self.spatial_period - other.spatial_period).abs() <= 1e-12 * self.spatial_period
    }
}

/// Which time layers a [`ScalarField`] stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layers {
    /// Layers `0..Nt`, boundary layers included.
    All,
    /// Layers `1..Nt-1`; produced by operators with a time stencil.
    Interior,
}

/// Samples on space-time: one value per (time layer, spatial node).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    layers: Layers,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self { grid, layers: Layers::All, values: vec![value; grid.time_nodes * grid.layer_len()] }
    }

    /// Samples `func(x, y, t)` at every node of every layer.
    pub fn from_fn(grid: GridSpec, func: impl Fn(f64, f64, f64) -> f64) -> Self {
        let m = grid.layer_len();
        let mut values = Vec::with_capacity(grid.time_nodes * m);
        for k in 0..grid.time_nodes {
            let t = grid.time(k);
            for node in 0..m {
                let (x, y) = grid.coords(node);
                values.push(func(x, y, t));
            }
        }
        Self { grid, layers: Layers::All, values }
    }

    /// Wraps raw values, checking the length and finiteness invariants.
    pub fn from_values(grid: GridSpec, layers: Layers, values: Vec<f64>) -> Result<Self, MeshError> {
        let field = Self { grid, layers, values };
        let expected = field.layer_count() * grid.layer_len();
        if field.values.len() != expected {
            return Err(MeshError::Length { expected, found: field.values.len() });
        }
        if let Some(i) = field.values.iter().position(|v| !v.is_finite()) {
            let m = grid.layer_len();
            return Err(MeshError::NonFinite { layer: field.first_layer() + i / m, node: i % m });
        }
        Ok(field)
    }

    pub(crate) fn from_parts(grid: GridSpec, layers: Layers, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), Self::count_for(&grid, layers) * grid.layer_len());
        Self { grid, layers, values }
    }

    fn count_for(grid: &GridSpec, layers: Layers) -> usize {
        match layers {
            Layers::All => grid.time_nodes,
            Layers::Interior => grid.time_nodes - 2,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn layers(&self) -> Layers {
        self.layers
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

    /// Global index of the first stored layer.
    pub fn first_layer(&self) -> usize {
        match self.layers {
            Layers::All => 0,
            Layers::Interior => 1,
        }
    }

    pub fn layer_count(&self) -> usize {
        Self::count_for(&self.grid, self.layers)
    }

    /// Global indices of the stored layers.
    pub fn layer_range(&self) -> Range<usize> {
        self.first_layer()..self.first_layer() + self.layer_count()
    }

    /// Values of global layer `k`.
    pub fn layer(&self, k: usize) -> &[f64] {
        let m = self.grid.layer_len();
        let local = k - self.first_layer();
        &self.values[local * m..(local + 1) * m]
    }

    pub fn layer_mut(&mut self, k: usize) -> &mut [f64] {
        let m = self.grid.layer_len();
        let local = k - self.first_layer();
        &mut self.values[local * m..(local + 1) * m]
    }

    /// Value at global layer `k`, spatial node `node`.
    #[inline]
    pub fn at(&self, k: usize, node: usize) -> f64 {
        self.values[(k - self.first_layer()) * self.grid.layer_len() + node]
    }

    #[inline]
    pub fn set(&mut self, k: usize, node: usize, value: f64) {
        let m = self.grid.layer_len();
        let first = self.first_layer();
        self.values[(k - first) * m + node] = value;
    }

    /// Location `(layer, node)` of flat storage index `i`.
    pub fn locate(&self, i: usize) -> (usize, usize) {
        let m = self.grid.layer_len();
        (self.first_layer() + i / m, i % m)
    }

    /// Restriction to interior layers.
    pub fn interior(&self) -> ScalarField {
        match self.layers {
            Layers::Interior => self.clone(),
            Layers::All => {
                let m = self.grid.layer_len();
                let values = self.values[m..self.values.len() - m].to_vec();
                Self::from_parts(self.grid, Layers::Interior, values)
            }
        }
    }

    /// Boundary layer 0 as a spatial field.
    pub fn initial(&self) -> SpaceField {
        SpaceField::from_parts(self.grid, self.layer(0).to_vec())
    }

    /// Boundary layer `Nt - 1` as a spatial field.
    pub fn terminal(&self) -> SpaceField {
        SpaceField::from_parts(self.grid, self.layer(self.grid.time_nodes - 1).to_vec())
    }

    /// Pointwise combination with a field over the same layers.
    pub fn zip_with(&self, other: &ScalarField, op: impl Fn(f64, f64) -> f64) -> ScalarField {
        assert_eq!(self.layers, other.layers, "layer span mismatch");
        assert!(self.grid.same_shape(&other.grid), "grid mismatch");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| op(a, b)).collect();
        Self::from_parts(self.grid, self.layers, values)
    }

    pub fn map(&self, op: impl Fn(f64) -> f64) -> ScalarField {
        Self::from_parts(self.grid, self.layers, self.values.iter().map(|&v| op(v)).collect())
    }

    /// `α·self + β·other`.
    pub fn axpby(&self, alpha: f64, other: &ScalarField, beta: f64) -> ScalarField {
        self.zip_with(other, |a, b| alpha * a + beta * b)
    }

    /// Sup-norm of `self - other`.
    pub fn sup_distance(&self, other: &ScalarField) -> f64 {
        assert_eq!(self.layers, other.layers, "layer span mismatch");
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// One value per spatial node: coefficients and boundary data.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl SpaceField {
    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self { grid, values: vec![value; grid.layer_len()] }
    }

    pub fn from_fn(grid: GridSpec, func: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.layer_len())
            .map(|node| {
                let (x, y) = grid.coords(node);
                func(x, y)
            })
            .collect();
        Self { grid, values }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self, MeshError> {
        if values.len() != grid.layer_len() {
            return Err(MeshError::Length { expected: grid.layer_len(), found: values.len() });
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(MeshError::NonFinite { layer: 0, node });
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_parts(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.layer_len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn zip_with(&self, other: &SpaceField, op: impl Fn(f64, f64) -> f64) -> SpaceField {
        assert!(self.grid.same_shape(&other.grid), "grid mismatch");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| op(a, b)).collect();
        Self::from_parts(self.grid, values)
    }

    pub fn map(&self, op: impl Fn(f64) -> f64) -> SpaceField {
        Self::from_parts(self.grid, self.values.iter().map(|&v| op(v)).collect())
    }
}

/// Anything stored as a stack of spatial layers; lets the spatial stencils
/// act on both [`ScalarField`] and [`SpaceField`].
pub trait Layered: Sized {
    fn grid(&self) -> &GridSpec;
    fn values(&self) -> &[f64];
    /// Same shape, new values.
    fn with_values(&self, values: Vec<f64>) -> Self;
}

impl Layered for ScalarField {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn values(&self) -> &[f64] {
        &self.values
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self::from_parts(self.grid, self.layers, values)
    }
}

impl Layered for SpaceField {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn values(&self) -> &[f64] {
        &self.values
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self::from_parts(self.grid, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(matches!(GridSpec::new(3, 16, 9), Err(MeshError::Dimension(3))));
        assert!(matches!(GridSpec::new(1, 4, 9), Err(MeshError::TooFewNodes(4))));
        assert!(matches!(GridSpec::new(1, 16, 3), Err(MeshError::TooFewLayers(3))));
        assert!(matches!(GridSpec::with_period(1, 16, 9, -1.0), Err(MeshError::Period(_))));
    }

    #[test]
    fn spacings() {
        let g = GridSpec::new(1, 64, 33).unwrap();
        assert!((g.hx() - 2.0 * PI / 64.0).abs() < 1e-15);
        assert_eq!(g.ht(), 1.0 / 32.0);
        assert_eq!(g.interior_layers(), 1..32);
    }

    #[test]
    fn neighbours_wrap_on_every_axis() {
        let g = GridSpec::new(2, 8, 5).unwrap();
        // node (i=0, j=3)
        let node = 3 * 8;
        assert_eq!(g.neighbor(node, 0, -1), 3 * 8 + 7);
        assert_eq!(g.neighbor(node, 0, 1), 3 * 8 + 1);
        assert_eq!(g.neighbor(7, 1, -1), 7 * 8 + 7);
        assert_eq!(g.neighbor(7 * 8 + 2, 1, 1), 2);
    }

    #[test]
    fn field_length_invariant() {
        let g = GridSpec::new(2, 8, 5).unwrap();
        let f = ScalarField::zeros(g);
        assert_eq!(f.values().len(), 5 * 64);
        assert_eq!(f.interior().values().len(), 3 * 64);
        let err = ScalarField::from_values(g, Layers::All, vec![0.0; 10]).unwrap_err();
        assert!(matches!(err, MeshError::Length { expected: 320, found: 10 }));
        let mut vals = vec![0.0; 320];
        vals[70] = f64::NAN;
        let err = ScalarField::from_values(g, Layers::All, vals).unwrap_err();
        assert!(matches!(err, MeshError::NonFinite { layer: 1, node: 6 }));
    }

    #[test]
    fn layer_addressing_respects_span() {
        let g = GridSpec::new(1, 8, 6).unwrap();
        let f = ScalarField::from_fn(g, |x, _, t| x + 10.0 * t);
        let inner = f.interior();
        assert_eq!(inner.at(1, 3), f.at(1, 3));
        assert_eq!(inner.layer(4), f.layer(4));
        assert_eq!(inner.locate(9), (2, 1));
    }
}
