//! Second-order central difference stencils with periodic wrap in space.

use super::{Layered, Layers, ScalarField, SpaceField};

fn laplacian_layer(grid: &super::GridSpec, src: &[f64], dst: &mut [f64]) {
    let inv_h2 = 1.0 / (grid.hx() * grid.hx());
    for (node, out) in dst.iter_mut().enumerate() {
        let centre = src[node];
        let mut acc = 0.0;
        for axis in 0..grid.spatial_dim() {
            acc += src[grid.neighbor(node, axis, 1)] - 2.0 * centre + src[grid.neighbor(node, axis, -1)];
        }
        *out = acc * inv_h2;
    }
}

fn derivative_layer(grid: &super::GridSpec, axis: usize, src: &[f64], dst: &mut [f64]) {
    let inv_2h = 0.5 / grid.hx();
    for (node, out) in dst.iter_mut().enumerate() {
        *out = (src[grid.neighbor(node, axis, 1)] - src[grid.neighbor(node, axis, -1)]) * inv_2h;
    }
}

/// Discrete Laplacian, each time layer independently.
pub fn laplacian<F: Layered>(field: &F) -> F {
    let grid = *field.grid();
    let m = grid.layer_len();
    let mut out = vec![0.0; field.values().len()];
    for (src, dst) in field.values().chunks(m).zip(out.chunks_mut(m)) {
        laplacian_layer(&grid, src, dst);
    }
    field.with_values(out)
}

/// Central-difference gradient, one field per spatial axis.
pub fn gradient<F: Layered>(field: &F) -> Vec<F> {
    let grid = *field.grid();
    let m = grid.layer_len();
    (0..grid.spatial_dim())
        .map(|axis| {
            let mut out = vec![0.0; field.values().len()];
            for (src, dst) in field.values().chunks(m).zip(out.chunks_mut(m)) {
                derivative_layer(&grid, axis, src, dst);
            }
            field.with_values(out)
        })
        .collect()
}

/// `|∇v|²` with the central-difference gradient.
pub fn grad_norm_sq<F: Layered>(field: &F) -> F {
    let grads = gradient(field);
    let mut out = vec![0.0; field.values().len()];
    for g in &grads {
        for (o, v) in out.iter_mut().zip(g.values()) {
            *o += v * v;
        }
    }
    field.with_values(out)
}

fn full_layers(field: &ScalarField) {
    assert_eq!(field.layers(), Layers::All, "time stencils need boundary layers");
}

/// `(v_{k+1} - 2 v_k + v_{k-1}) / ht²` on interior layers.
pub fn d_tt(field: &ScalarField) -> ScalarField {
    full_layers(field);
    let grid = *field.grid();
    let m = grid.layer_len();
    let inv_ht2 = 1.0 / (grid.ht() * grid.ht());
    let v = field.values();
    let mut out = Vec::with_capacity(grid.interior_len());
    for k in grid.interior_layers() {
        for node in 0..m {
            out.push((v[(k + 1) * m + node] - 2.0 * v[k * m + node] + v[(k - 1) * m + node]) * inv_ht2);
        }
    }
    ScalarField::from_parts(grid, Layers::Interior, out)
}

/// `(v_{k+1} - v_{k-1}) / (2 ht)` on interior layers.
pub fn d_t(field: &ScalarField) -> ScalarField {
    full_layers(field);
    let grid = *field.grid();
    let m = grid.layer_len();
    let inv_2ht = 0.5 / grid.ht();
    let v = field.values();
    let mut out = Vec::with_capacity(grid.interior_len());
    for k in grid.interior_layers() {
        for node in 0..m {
            out.push((v[(k + 1) * m + node] - v[(k - 1) * m + node]) * inv_2ht);
        }
    }
    ScalarField::from_parts(grid, Layers::Interior, out)
}

/// Second-order one-sided `v_t` on the two boundary layers.
pub fn d_t_boundary(field: &ScalarField) -> (SpaceField, SpaceField) {
    full_layers(field);
    let grid = *field.grid();
    let last = grid.time_nodes() - 1;
    let inv_2ht = 0.5 / grid.ht();
    let (l0, l1, l2) = (field.layer(0), field.layer(1), field.layer(2));
    let start = (0..grid.layer_len()).map(|i| (-3.0 * l0[i] + 4.0 * l1[i] - l2[i]) * inv_2ht).collect();
    let (e0, e1, e2) = (field.layer(last), field.layer(last - 1), field.layer(last - 2));
    let end = (0..grid.layer_len()).map(|i| (3.0 * e0[i] - 4.0 * e1[i] + e2[i]) * inv_2ht).collect();
    (SpaceField::from_parts(grid, start), SpaceField::from_parts(grid, end))
}

/// `∇v_t` on interior layers.
pub fn grad_t(field: &ScalarField) -> Vec<ScalarField> {
    gradient(&d_t(field))
}

/// `max |v|`.
pub fn sup_norm<F: Layered>(field: &F) -> f64 {
    field.values().iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// `max v`.
pub fn sup<F: Layered>(field: &F) -> f64 {
    field.values().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `min v`.
pub fn inf<F: Layered>(field: &F) -> f64 {
    field.values().iter().copied().fold(f64::INFINITY, f64::min)
}
