//! Experiment configuration: TOML schema, validation that reports every
//! problem at once, and construction of the core problem objects.

use std::fs;
use std::path::{Path, PathBuf};

use degenlab_core::estimates::BallTriple;
use degenlab_core::grid::{Grid, GridFunction};
use degenlab_core::minimize::ProblemSpec;
use degenlab_core::scalar::Exponents;
use serde::Deserialize;

use crate::fields::build_field;
use crate::DriverError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub problem: ProblemBlock,
    pub solver: SolverBlock,
    #[serde(default)]
    pub verify: Option<VerifyBlock>,
    #[serde(default)]
    pub lab: Option<LabBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub p: f64,
    pub deltas: Vec<f64>,
    pub grid_nodes: Vec<usize>,
    #[serde(default)]
    pub grid_origin: Option<Vec<f64>>,
    #[serde(default)]
    pub grid_extent: Option<Vec<f64>>,
    pub source: String,
    pub boundary: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    pub eps_schedule: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    #[serde(default)]
    pub seed: u64,
    /// Optional second schedule; a sweep then solves both paths and runs the
    /// gradient-propagation comparison between their final iterates.
    #[serde(default)]
    pub dual_schedule: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyBlock {
    pub center: Vec<f64>,
    pub r0: f64,
    pub r_mid: f64,
    pub r_out: f64,
    #[serde(default = "default_s_grid")]
    pub s_grid: Vec<f64>,
    /// Zero means the data-driven default.
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_levels")]
    pub ladder_levels: usize,
    #[serde(default = "default_ceiling")]
    pub ratio_ceiling: f64,
    #[serde(default = "default_tol_h_factor")]
    pub tol_h_factor: f64,
    #[serde(default = "default_variation_tol")]
    pub variation_tol: f64,
    #[serde(default = "default_spread")]
    pub ladder_spread_max: f64,
    #[serde(default = "default_checks")]
    pub checks: Vec<String>,
}

fn default_spread() -> f64 {
    10.0
}

fn default_s_grid() -> Vec<f64> {
    vec![0.0, 1.0, 2.0, 4.0]
}
fn default_levels() -> usize {
    5
}
fn default_ceiling() -> f64 {
    1e12
}
fn default_tol_h_factor() -> f64 {
    4.0
}
fn default_variation_tol() -> f64 {
    0.05
}
fn default_checks() -> Vec<String> {
    ["sobolev", "caccioppoli", "diagonal", "ladder", "lipschitz", "bernstein"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabBlock {
    #[serde(default = "default_q_values")]
    pub q_values: Vec<f64>,
    #[serde(default = "default_fields")]
    pub fields: usize,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_tol_troisi")]
    pub tol_troisi: f64,
    #[serde(default = "default_max_bumps")]
    pub max_bumps: usize,
}

fn default_q_values() -> Vec<f64> {
    vec![1.2, 1.5, 1.8]
}
fn default_fields() -> usize {
    200
}
fn default_resolution() -> usize {
    257
}
fn default_tol_troisi() -> f64 {
    0.02
}
fn default_max_bumps() -> usize {
    5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default = "default_true")]
    pub emit_solutions: bool,
    #[serde(default = "default_true")]
    pub emit_plot_data: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { dir: None, emit_solutions: true, emit_plot_data: true }
    }
}

fn default_true() -> bool {
    true
}

/// Validated configuration with the constructed grid and fields.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub raw: RawConfig,
    pub raw_text: String,
    pub config_path: PathBuf,
    pub grid: Grid,
    pub exponents: Exponents,
    pub source: GridFunction,
    pub boundary: GridFunction,
}

impl ExperimentConfig {
    pub fn seed(&self) -> u64 {
        self.raw.solver.seed
    }

    pub fn grid_ref(&self) -> &Grid {
        &self.grid
    }

    /// Problem at the first schedule entry.
    pub fn problem(&self) -> Result<ProblemSpec, DriverError> {
        self.problem_at(self.raw.solver.eps_schedule[0])
    }

    pub fn problem_at(&self, eps: f64) -> Result<ProblemSpec, DriverError> {
        ProblemSpec::new(
            self.exponents.clone(),
            self.grid.clone(),
            self.source.clone(),
            self.boundary.clone(),
            eps,
        )
        .map_err(DriverError::Core)
    }

    pub fn ball_triple(&self) -> Result<Option<BallTriple>, DriverError> {
        match &self.raw.verify {
            None => Ok(None),
            Some(v) => BallTriple::new(&self.grid, v.center.clone(), v.r0, v.r_mid, v.r_out)
                .map(Some)
                .map_err(DriverError::Core),
        }
    }
}

/// Parses and validates a configuration file, reporting every validation
/// problem (not only the first) with its key path.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, DriverError> {
    let raw_text = fs::read_to_string(path)
        .map_err(|e| DriverError::Io(path.display().to_string(), e.to_string()))?;
    let raw: RawConfig = toml::from_str(&raw_text)
        .map_err(|e| DriverError::Config(vec![format!("toml: {e}")]))?;

    let mut errors = Vec::new();
    let p = &raw.problem;
    if !(p.p >= 2.0) || !p.p.is_finite() {
        errors.push("problem.p: must be finite and >= 2".to_string());
    }
    let dim = p.grid_nodes.len();
    if dim == 0 {
        errors.push("problem.grid_nodes: at least one axis is required".to_string());
    }
    for (k, n) in p.grid_nodes.iter().enumerate() {
        if *n < 3 {
            errors.push(format!("problem.grid_nodes[{k}]: need at least 3 nodes"));
        }
    }
    if p.deltas.len() != dim {
        errors.push(format!(
            "problem.deltas: length {} does not match grid dimension {dim}",
            p.deltas.len()
        ));
    }
    for (k, d) in p.deltas.iter().enumerate() {
        if !(*d >= 0.0) || !d.is_finite() {
            errors.push(format!("problem.deltas[{k}]: must be finite and >= 0"));
        }
    }
    let origin = p.grid_origin.clone().unwrap_or_else(|| vec![0.0; dim]);
    let extent = p.grid_extent.clone().unwrap_or_else(|| vec![1.0; dim]);
    if origin.len() != dim {
        errors.push("problem.grid_origin: length must match grid dimension".to_string());
    }
    if extent.len() != dim {
        errors.push("problem.grid_extent: length must match grid dimension".to_string());
    }

    let s = &raw.solver;
    if s.eps_schedule.is_empty() {
        errors.push("solver.eps_schedule: must be nonempty".to_string());
    }
    for w in s.eps_schedule.windows(2) {
        if !(w[1] < w[0]) {
            errors.push("solver.eps_schedule: not strictly decreasing".to_string());
            break;
        }
    }
    if s.eps_schedule.last().is_some_and(|last| !(*last > 0.0)) {
        errors.push("solver.eps_schedule: entries must be positive".to_string());
    }
    if let Some(dual) = &s.dual_schedule {
        for w in dual.windows(2) {
            if !(w[1] < w[0]) {
                errors.push("solver.dual_schedule: not strictly decreasing".to_string());
                break;
            }
        }
        if dual.last().is_some_and(|last| !(*last > 0.0)) {
            errors.push("solver.dual_schedule: entries must be positive".to_string());
        }
        if dual.is_empty() {
            errors.push("solver.dual_schedule: must be nonempty when present".to_string());
        }
    }
    if !(s.tol > 0.0) {
        errors.push("solver.tol: must be positive".to_string());
    }
    if s.max_iter == 0 {
        errors.push("solver.max_iter: must be positive".to_string());
    }

    if let Some(v) = &raw.verify {
        if v.center.len() != dim {
            errors.push("verify.center: length must match grid dimension".to_string());
        }
        if !(0.0 < v.r0 && v.r0 < v.r_mid && v.r_mid < v.r_out) {
            errors.push("verify: radii must satisfy 0 < r0 < r_mid < r_out".to_string());
        }
        for (k, sv) in v.s_grid.iter().enumerate() {
            if !(*sv >= 0.0) {
                errors.push(format!("verify.s_grid[{k}]: must be >= 0"));
            }
        }
        if v.ladder_levels < 2 {
            errors.push("verify.ladder_levels: need at least 2".to_string());
        }
        let known = ["sobolev", "caccioppoli", "diagonal", "ladder", "lipschitz", "bernstein"];
        for c in &v.checks {
            if !known.contains(&c.as_str()) {
                errors.push(format!("verify.checks: unknown check '{c}'"));
            }
        }
    }
    if let Some(lab) = &raw.lab {
        for (k, q) in lab.q_values.iter().enumerate() {
            if !(*q > 1.0 && *q < 2.0) {
                errors.push(format!("lab.q_values[{k}]: must lie in (1, 2)"));
            }
        }
        if lab.resolution < 9 {
            errors.push("lab.resolution: too coarse for a two-cell collar".to_string());
        }
        if lab.fields == 0 {
            errors.push("lab.fields: must be positive".to_string());
        }
        if lab.max_bumps == 0 {
            errors.push("lab.max_bumps: must be positive".to_string());
        }
    }

    // referenced CSV fields must exist at parse time
    for (key, spec) in [("problem.source", &p.source), ("problem.boundary", &p.boundary)] {
        if let Some(rel) = spec.strip_prefix("csv:") {
            let candidate = path.parent().unwrap_or(Path::new(".")).join(rel);
            if !candidate.exists() {
                errors.push(format!("{key}: referenced file {} does not exist", candidate.display()));
            }
        }
    }

    if !errors.is_empty() {
        return Err(DriverError::Config(errors));
    }

    let grid = Grid::new(origin, extent, p.grid_nodes.clone()).map_err(DriverError::Core)?;
    let exponents = Exponents::new(p.p, p.deltas.clone()).map_err(DriverError::Core)?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut errors = Vec::new();
    let source = match build_field(&grid, &p.source, &base) {
        Ok(f) => Some(f),
        Err(e) => {
            errors.push(format!("problem.source: {e}"));
            None
        }
    };
    let boundary = match build_field(&grid, &p.boundary, &base) {
        Ok(f) => Some(f),
        Err(e) => {
            errors.push(format!("problem.boundary: {e}"));
            None
        }
    };
    if !errors.is_empty() {
        return Err(DriverError::Config(errors));
    }

    Ok(ExperimentConfig {
        raw,
        raw_text,
        config_path: path.to_path_buf(),
        grid,
        exponents,
        source: source.unwrap(),
        boundary: boundary.unwrap(),
    })
}
