//! JSON reports and CSV tables written by the command line front end.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::assembly::FieldGrid;
use crate::beam::BeamSolution;
use crate::error::{CgoError, Result};
use crate::geometry::Tube;
use crate::linalg::min_sym_eigenvalue;
use crate::verify::SweepResult;

/// Header plus rows of already formatted cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row.into_iter().map(cell).collect());
    }
}

/// Shortest round-trip representation; empty for missing values.
fn cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CgoError {
    CgoError::Io(format!("{}: {e}", path.display()))
}

/// Output directory, created on first use.
#[derive(Debug, Clone)]
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| io_err(&root, e))?;
        Ok(Self { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(&path, e))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_err(&path, e))
    }

    pub fn write_table(&self, name: &str, table: &Table) -> Result<()> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
        w.write_record(&table.header).map_err(|e| io_err(&path, e))?;
        for row in &table.rows {
            w.write_record(row).map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))
    }
}

/// Time node indices with at most `max` entries, always including both ends.
fn node_stride(steps: usize, max: usize) -> Vec<usize> {
    let stride = steps.div_ceil(max.max(2) - 1).max(1);
    let mut out: Vec<usize> = (0..=steps).step_by(stride).collect();
    if out.last() != Some(&steps) {
        out.push(steps);
    }
    out
}

/// Time nodes kept in the ray, phase and amplitude tables.
pub const TABLE_TIMES: usize = 101;

fn indexed(names: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{names}_{i}"))
}

/// `component, ray, t, x_i, xi_i` on every ray.
pub fn rays_table(tubes: &[&Tube]) -> Table {
    let dim = tubes.first().map_or(0, |t| t.dim);
    let header = ["component", "ray", "t"]
        .into_iter()
        .map(String::from)
        .chain(indexed("x", dim))
        .chain(indexed("xi", dim))
        .collect();
    let mut table = Table::new(header);
    for (c, tube) in tubes.iter().enumerate() {
        for (j, ray) in tube.rays.iter().enumerate() {
            for k in node_stride(tube.grid.steps, TABLE_TIMES) {
                let mut row = vec![c as f64, j as f64, tube.grid.time(k)];
                row.extend(ray.x.at_node(k).iter());
                row.extend(ray.xi.at_node(k).iter());
                table.push(row);
            }
        }
    }
    table
}

/// `component, ray, t, min_im_eig, re_phi_ij, im_phi_ij` with `Φ` flattened row-major.
pub fn phase_table(beams: &[BeamSolution]) -> Table {
    let d2 = beams.first().map_or(0, |b| b.tube.d2());
    let entries = d2 * d2;
    let header = ["component", "ray", "t", "min_im_eig"]
        .into_iter()
        .map(String::from)
        .chain(indexed("re_phi", entries))
        .chain(indexed("im_phi", entries))
        .collect();
    let mut table = Table::new(header);
    for (c, beam) in beams.iter().enumerate() {
        for (j, series) in beam.jet.hessian.iter().enumerate() {
            for k in node_stride(beam.tube.grid.steps, TABLE_TIMES) {
                let phi = series.at_node(k);
                let rows = phi.nrows();
                let mut row = vec![
                    c as f64,
                    j as f64,
                    beam.tube.grid.time(k),
                    min_sym_eigenvalue(&phi.map(|z| z.im)),
                ];
                row.extend((0..entries).map(|e| phi[(e / rows, e % rows)].re));
                row.extend((0..entries).map(|e| phi[(e / rows, e % rows)].im));
                table.push(row);
            }
        }
    }
    table
}

/// `component, ray, t, gouy, re_a_i, im_a_i` for the leading amplitude on each ray.
pub fn amplitude_table(beams: &[BeamSolution]) -> Table {
    let n = beams.first().map_or(0, |b| b.size);
    let header = ["component", "ray", "t", "gouy"]
        .into_iter()
        .map(String::from)
        .chain(indexed("re_a", n))
        .chain(indexed("im_a", n))
        .collect();
    let mut table = Table::new(header);
    for (c, beam) in beams.iter().enumerate() {
        for (j, path) in beam.amplitude.paths.iter().enumerate() {
            for k in node_stride(beam.tube.grid.steps, TABLE_TIMES) {
                let a = path.a.at_node(k);
                let mut row = vec![c as f64, j as f64, beam.tube.grid.time(k), path.gouy[k]];
                row.extend(a.iter().map(|z| z.re));
                row.extend(a.iter().map(|z| z.im));
                table.push(row);
            }
        }
    }
    table
}

/// `x_i, re_u_k, im_u_k` at every grid node.
pub fn field_table(grid: &FieldGrid) -> Table {
    let dim = grid.axes.len();
    let n = grid.values.first().map_or(0, |v| v.len());
    let header = indexed("x", dim).chain(indexed("re_u", n)).chain(indexed("im_u", n)).collect();
    let mut table = Table::new(header);
    for (idx, u) in grid.values.iter().enumerate() {
        let mut row = grid.point(idx);
        row.extend(u.iter().map(|z| z.re));
        row.extend(u.iter().map(|z| z.im));
        table.push(row);
    }
    table
}

/// One row per `ε`: residual, mismatch and the `sup_t` of the `L²` curves.
pub fn sweep_table(result: &SweepResult) -> Table {
    let header = ["eps", "residual", "mismatch", "l2_sup", "reference_error_sup"]
        .into_iter()
        .map(String::from)
        .collect();
    let mut table = Table::new(header);
    for e in &result.entries {
        table.push(vec![
            e.eps,
            e.residual,
            e.mismatch,
            e.l2_sup().unwrap_or(f64::NAN),
            e.reference_error_sup().unwrap_or(f64::NAN),
        ]);
    }
    table
}

/// File name of a field snapshot, e.g. `field_t0.50.csv`.
pub fn field_file_name(t: f64) -> String {
    format!("field_t{t:.2}.csv")
}
