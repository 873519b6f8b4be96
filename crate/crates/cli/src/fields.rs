//! Built-in analytic field catalog plus CSV ingestion.
//!
//! Specs are compact strings:
//!   `zero`, `constant:c`, `affine:a1,...,aN`, `sinprod:amplitude`,
//!   `gaussian:c1,...,cN,width[,amplitude]`, `csv:path`.
//!
//! `sinprod` uses coordinates normalized to the grid rectangle, so the field
//! vanishes on the whole boundary.

use std::f64::consts::PI;
use std::path::Path;

use degenlab_core::grid::{Grid, GridFunction};

use crate::io::read_grid_function;
use crate::DriverError;

pub fn build_field(grid: &Grid, spec: &str, base_dir: &Path) -> Result<GridFunction, DriverError> {
    let dim = grid.dim();
    if spec == "zero" {
        return Ok(GridFunction::zeros(grid.clone()));
    }
    if let Some(args) = spec.strip_prefix("constant:") {
        let c = parse_floats(args, 1, "constant")?[0];
        return Ok(GridFunction::constant(grid.clone(), c));
    }
    if let Some(args) = spec.strip_prefix("affine:") {
        let slopes = parse_floats(args, dim, "affine")?;
        return Ok(GridFunction::from_fn(grid.clone(), |x| {
            x.iter().zip(&slopes).map(|(xi, a)| a * xi).sum()
        }));
    }
    if let Some(args) = spec.strip_prefix("sinprod:") {
        let amp = parse_floats(args, 1, "sinprod")?[0];
        let origin = grid.origin().to_vec();
        let extent = grid.extent().to_vec();
        return Ok(GridFunction::from_fn(grid.clone(), move |x| {
            let mut v = amp;
            for k in 0..x.len() {
                v *= (PI * (x[k] - origin[k]) / extent[k]).sin();
            }
            v
        }));
    }
    if let Some(args) = spec.strip_prefix("gaussian:") {
        let vals = parse_floats_flexible(args)?;
        if vals.len() != dim + 1 && vals.len() != dim + 2 {
            return Err(DriverError::Field(format!(
                "gaussian needs {dim} center coordinates, a width and an optional amplitude"
            )));
        }
        let center = vals[..dim].to_vec();
        let width = vals[dim];
        let amp = if vals.len() == dim + 2 { vals[dim + 1] } else { 1.0 };
        if !(width > 0.0) {
            return Err(DriverError::Field("gaussian width must be positive".into()));
        }
        return Ok(GridFunction::from_fn(grid.clone(), move |x| {
            let r2: f64 = x.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum();
            amp * (-r2 / (2.0 * width * width)).exp()
        }));
    }
    if let Some(rel) = spec.strip_prefix("csv:") {
        let field = read_grid_function(&base_dir.join(rel))?;
        if field.grid() != grid {
            return Err(DriverError::Field(format!(
                "csv field {rel} lives on a different grid than the problem"
            )));
        }
        return Ok(field);
    }
    Err(DriverError::Field(format!("unknown field spec '{spec}'")))
}

fn parse_floats(args: &str, expected: usize, what: &str) -> Result<Vec<f64>, DriverError> {
    let vals = parse_floats_flexible(args)?;
    if vals.len() != expected {
        return Err(DriverError::Field(format!(
            "{what} expects {expected} numeric argument(s), got {}",
            vals.len()
        )));
    }
    Ok(vals)
}

fn parse_floats_flexible(args: &str) -> Result<Vec<f64>, DriverError> {
    args.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| DriverError::Field(format!("malformed number '{s}'")))
        })
        .collect()
}
