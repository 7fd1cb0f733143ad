//! Plain CSV tables for external plotting.

use std::io::{self, Write};

use qgeo::estimates::WeakC2;
use qgeo::solver::{ContinuationPoint, TraceRecord};

pub fn write_weak_c2<W: Write>(rows: &[(f64, WeakC2)], mut out: W) -> io::Result<()> {
    writeln!(out, "eps,sup_utt,sup_lap_u,sup_grad_ut")?;
    for (eps, w) in rows {
        writeln!(out, "{eps:e},{:e},{:e},{:e}", w.sup_utt, w.sup_lap_u, w.sup_grad_ut)?;
    }
    Ok(())
}

/// Residual against a running count of Newton iterates across all phases.
pub fn write_newton<W: Write>(trace: &[TraceRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "iteration,residual")?;
    for (i, r) in trace.iter().enumerate() {
        writeln!(out, "{i},{:e}", r.residual)?;
    }
    Ok(())
}

pub fn write_continuation<W: Write>(points: &[ContinuationPoint], mut out: W) -> io::Result<()> {
    writeln!(out, "s,residual")?;
    for p in points {
        writeln!(out, "{:e},{:e}", p.s, p.residual)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use qgeo::solver::Phase;

    fn weak(v: f64) -> WeakC2 {
        WeakC2 {
            sup_utt: v,
            at_utt: (1, 0),
            sup_lap_u: 2.0 * v,
            at_lap_u: (1, 0),
            sup_grad_ut: 3.0 * v,
            at_grad_ut: (1, 0),
            sup_grad_u: 0.0,
            at_grad_u: (1, 0),
            sup_lap_dev: 0.0,
        }
    }

    #[test]
    fn weak_c2_table_has_one_row_per_rung() {
        let rows: Vec<_> = [1.0, 1e-1, 1e-2, 1e-3].iter().map(|&e| (e, weak(e))).collect();
        let mut buf = Vec::new();
        write_weak_c2(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "eps,sup_utt,sup_lap_u,sup_grad_ut");
        let cells: Vec<f64> = lines[2].split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells, vec![0.1, 0.1, 0.2, 0.30000000000000004]);
    }

    #[test]
    fn empty_inputs_give_header_only() {
        let mut buf = Vec::new();
        write_newton(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iteration,residual\n");
        let mut buf = Vec::new();
        write_continuation(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "s,residual\n");
        let mut buf = Vec::new();
        write_weak_c2(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "eps,sup_utt,sup_lap_u,sup_grad_ut\n");
    }

    #[test]
    fn newton_rows_count_iterates() {
        let rec = |residual| TraceRecord {
            phase: Phase::S,
            param: 1.0,
            iteration: 0,
            residual,
            min_utt: 1.0,
            min_b: 1.0,
            min_q: 1.0,
            alpha: 1.0,
        };
        let mut buf = Vec::new();
        write_newton(&[rec(1.0), rec(0.5)], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iteration,residual\n0,1e0\n1,5e-1\n");
    }
}
