//! Field dumps.
//!
//! CSV: one row per time layer, spatial nodes in row-major order, values
//! printed in shortest round-trip decimal form.
//!
//! Binary: three little-endian `u64` (spatial dimension, nodes per axis,
//! time nodes), then every value as a little-endian `f64` in CSV order.

use std::io::{BufRead, Read, Write};

use super::{GridSpec, Layers, MeshError, ScalarField};

pub fn write_csv<W: Write>(field: &ScalarField, mut out: W) -> Result<(), MeshError> {
    let m = field.grid().layer_len();
    for row in field.values().chunks(m) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Reads a full-layer CSV dump; the grid supplies the expected shape.
pub fn read_csv<R: BufRead>(grid: GridSpec, input: R) -> Result<ScalarField, MeshError> {
    let mut values = Vec::with_capacity(grid.time_nodes() * grid.layer_len());
    let mut rows = 0;
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let before = values.len();
        for cell in line.split(',') {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| MeshError::Format(format!("line {}: bad number {cell:?}", lineno + 1)))?;
            values.push(v);
        }
        if values.len() - before != grid.layer_len() {
            return Err(MeshError::Mismatch(format!(
                "line {} has {} columns, grid expects {}",
                lineno + 1,
                values.len() - before,
                grid.layer_len()
            )));
        }
        rows += 1;
    }
    if rows != grid.time_nodes() {
        return Err(MeshError::Mismatch(format!("{rows} time layers, grid expects {}", grid.time_nodes())));
    }
    ScalarField::from_values(grid, Layers::All, values)
}

pub fn write_binary<W: Write>(field: &ScalarField, mut out: W) -> Result<(), MeshError> {
    let g = field.grid();
    for dim in [g.spatial_dim(), g.nodes_per_axis(), field.layer_count()] {
        out.write_all(&(dim as u64).to_le_bytes())?;
    }
    for v in field.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a binary dump and checks its header against `grid`.
pub fn read_binary<R: Read>(grid: GridSpec, mut input: R) -> Result<ScalarField, MeshError> {
    let mut word = [0u8; 8];
    let mut header = [0u64; 3];
    for h in &mut header {
        input.read_exact(&mut word)?;
        *h = u64::from_le_bytes(word);
    }
    let expected = [grid.spatial_dim() as u64, grid.nodes_per_axis() as u64, grid.time_nodes() as u64];
    if header != expected {
        return Err(MeshError::Mismatch(format!("dump header {header:?}, grid expects {expected:?}")));
    }
    let count = grid.time_nodes() * grid.layer_len();
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        input
            .read_exact(&mut word)
            .map_err(|_| MeshError::Format(format!("truncated dump after {} values", values.len())))?;
        values.push(f64::from_le_bytes(word));
    }
    if input.read(&mut word)? != 0 {
        return Err(MeshError::Format("trailing bytes after last value".into()));
    }
    ScalarField::from_values(grid, Layers::All, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn dumps_round_trip_bit_exactly(seed in proptest::collection::vec(-1e6f64..1e6, 1..8), dim in 1usize..=2) {
            let g = GridSpec::new(dim, 8, 5).unwrap();
            let f = ScalarField::from_fn(g, |x, y, t| {
                seed.iter().enumerate().map(|(i, c)| c * ((i as f64 + 1.0) * x + y - t).sin() / 3.0).sum()
            });
            let mut csv = Vec::new();
            write_csv(&f, &mut csv).unwrap();
            prop_assert_eq!(&read_csv(g, csv.as_slice()).unwrap(), &f);
            let mut bin = Vec::new();
            write_binary(&f, &mut bin).unwrap();
            prop_assert_eq!(bin.len(), 24 + 8 * f.values().len());
            prop_assert_eq!(&read_binary(g, bin.as_slice()).unwrap(), &f);
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let g = GridSpec::new(1, 8, 5).unwrap();
        let f = ScalarField::constant(g, 1.0);
        let mut bin = Vec::new();
        write_binary(&f, &mut bin).unwrap();
        let other = GridSpec::new(1, 16, 5).unwrap();
        assert!(matches!(read_binary(other, bin.as_slice()), Err(MeshError::Mismatch(_))));
        let mut csv = Vec::new();
        write_csv(&f, &mut csv).unwrap();
        assert!(matches!(read_csv(other, csv.as_slice()), Err(MeshError::Mismatch(_))));
        let taller = GridSpec::new(1, 8, 6).unwrap();
        assert!(matches!(read_csv(taller, csv.as_slice()), Err(MeshError::Mismatch(_))));
    }

    #[test]
    fn csv_rejects_garbage() {
        let g = GridSpec::new(1, 8, 5).unwrap();
        let text = "1,2,3,4,5,6,7,x\n";
        assert!(matches!(read_csv(g, text.as_bytes()), Err(MeshError::Format(_))));
    }
}
