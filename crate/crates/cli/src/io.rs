//! File formats: grid-function CSV, estimate records, plot data.
//!
//! All numeric output goes through [`fmt_f64`], which prints 17 significant
//! decimal digits so every f64 round-trips losslessly and reruns with the
//! same configuration produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use degenlab_core::estimates::EstimateReport;
use degenlab_core::grid::{Grid, GridFunction};
use degenlab_core::minimize::SolveReport;

use crate::DriverError;

/// Lossless decimal representation of an f64 (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a grid function as CSV: a `# grid:` header carrying dimension,
/// nodes per axis, origin and extent, then one value per line in row-major
/// order.
pub fn write_grid_function(path: &Path, u: &GridFunction) -> Result<(), DriverError> {
    let grid = u.grid();
    let mut header = format!("# grid: {}", grid.dim());
    for n in grid.shape() {
        let _ = write!(header, ",{n}");
    }
    for o in grid.origin() {
        let _ = write!(header, ",{}", fmt_f64(*o));
    }
    for e in grid.extent() {
        let _ = write!(header, ",{}", fmt_f64(*e));
    }
    let mut body = String::with_capacity(u.len() * 24 + header.len() + 2);
    body.push_str(&header);
    body.push('\n');
    for v in u.values() {
        body.push_str(&fmt_f64(*v));
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| DriverError::Io(path.display().to_string(), e.to_string()))
}

/// Reads the CSV format produced by [`write_grid_function`].
pub fn read_grid_function(path: &Path) -> Result<GridFunction, DriverError> {
    let text = fs::read_to_string(path)
        .map_err(|e| DriverError::Io(path.display().to_string(), e.to_string()))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| bad_format(path, "missing header line"))?;
    let rest = header
        .strip_prefix("# grid: ")
        .ok_or_else(|| bad_format(path, "first line must start with '# grid: '"))?;
    let fields: Vec<&str> = rest.split(',').collect();
    if fields.is_empty() {
        return Err(bad_format(path, "empty header"));
    }
    let dim: usize = fields[0]
        .trim()
        .parse()
        .map_err(|_| bad_format(path, "bad dimension in header"))?;
    if fields.len() != 1 + 3 * dim {
        return Err(bad_format(path, "header needs N, nodes, origin and extent per axis"));
    }
    let mut shape = Vec::with_capacity(dim);
    let mut origin = Vec::with_capacity(dim);
    let mut extent = Vec::with_capacity(dim);
    for k in 0..dim {
        shape.push(
            fields[1 + k]
                .trim()
                .parse::<usize>()
                .map_err(|_| bad_format(path, "bad node count in header"))?,
        );
    }
    for k in 0..dim {
        origin.push(
            fields[1 + dim + k]
                .trim()
                .parse::<f64>()
                .map_err(|_| bad_format(path, "bad origin in header"))?,
        );
    }
    for k in 0..dim {
        extent.push(
            fields[1 + 2 * dim + k]
                .trim()
                .parse::<f64>()
                .map_err(|_| bad_format(path, "bad extent in header"))?,
        );
    }
    let grid = Grid::new(origin, extent, shape)
        .map_err(|e| bad_format(path, &format!("invalid grid: {e}")))?;
    let mut values = Vec::with_capacity(grid.node_count());
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        values.push(
            line.parse::<f64>()
                .map_err(|_| bad_format(path, &format!("bad value line: {line}")))?,
        );
    }
    GridFunction::new(grid, values).map_err(|e| bad_format(path, &format!("invalid field: {e}")))
}

fn bad_format(path: &Path, msg: &str) -> DriverError {
    DriverError::Format(path.display().to_string(), msg.to_string())
}

/// One estimate record per line, JSON-encoded.
pub fn write_estimates_json(path: &Path, reports: &[EstimateReport]) -> Result<(), DriverError> {
    let mut body = String::new();
    for r in reports {
        let record = serde_json::json!({
            "name": r.name,
            "lhs": r.lhs,
            "rhs_core": r.rhs_core,
            "ratio": if r.ratio.is_finite() { serde_json::json!(r.ratio) } else { serde_json::json!("inf") },
            "params": r.params,
            "pass": r.pass,
        });
        body.push_str(&record.to_string());
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| DriverError::Io(path.display().to_string(), e.to_string()))
}

/// Flat CSV summary of the same records.
pub fn write_estimates_csv(path: &Path, reports: &[EstimateReport]) -> Result<(), DriverError> {
    let mut body = String::from("name,lhs,rhs_core,ratio,pass\n");
    for r in reports {
        let _ = writeln!(
            body,
            "{},{},{},{},{}",
            r.name,
            fmt_f64(r.lhs),
            fmt_f64(r.rhs_core),
            fmt_f64(r.ratio),
            r.pass
        );
    }
    fs::write(path, body).map_err(|e| DriverError::Io(path.display().to_string(), e.to_string()))
}

/// Per-solve diagnostics table. Wall times are kept out of this file so the
/// numeric CSVs of a run are byte-identical across reruns; see
/// [`write_timings`].
pub fn write_solve_reports(path: &Path, reports: &[SolveReport]) -> Result<(), DriverError> {
    let mut body = String::from(
        "eps (dimensionless),iterations (count),final_energy (dimensionless),el_residual (dimensionless)\n",
    );
    for r in reports {
        let _ = writeln!(
            body,
            "{},{},{},{}",
            fmt_f64(r.eps),
            r.iterations,
            fmt_f64(r.final_energy),
            fmt_f64(r.el_residual)
        );
    }
    fs::write(path, body).map_err(|e| DriverError::Io(path.display().to_string(), e.to_string()))
}

/// Wall-clock seconds per solve, in a plain text file.
pub fn write_timings(path: &Path, reports: &[SolveReport]) -> Result<(), DriverError> {
    let mut body = String::new();
    for r in reports {
        let _ = writeln!(body, "solve eps={:e}: {:.3} s", r.eps, r.wall_time);
    }
    fs::write(path, body).map_err(|e| DriverError::Io(path.display().to_string(), e.to_string()))
}

/// Generic plot-data CSV: a header naming the columns (with units) and rows
/// of lossless decimals.
pub fn write_plot_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<(), DriverError> {
    let mut body = String::from(header);
    body.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                body.push(',');
            }
            body.push_str(&fmt_f64(*v));
            first = false;
        }
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| DriverError::Io(path.display().to_string(), e.to_string()))
}
