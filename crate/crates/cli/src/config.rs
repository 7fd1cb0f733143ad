//! TOML run configuration and construction of problem data from it.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use qgeo::mesh::{self, GridSpec, ScalarField, SpaceField};
use qgeo::operator::ProblemSpec;
use qgeo::solver::SolveOptions;
use qgeo::symcone::ScanField;
use serde::Deserialize;

use crate::expr::Expr;
use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Option<ProblemConfig>,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// A scalar datum given as a number, an expression, or a file of node values.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Source {
    Number(f64),
    Expr(String),
    File(FileRef),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileRef {
    pub file: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "one")]
    pub dim: usize,
    pub n: usize,
    pub nt: usize,
    pub period: Option<f64>,
    #[serde(default)]
    pub b: f64,
    #[serde(default = "unit_source")]
    pub a: Source,
    pub f: Source,
    #[serde(default = "zero_source")]
    pub u0: Source,
    #[serde(default = "zero_source")]
    pub u1: Source,
    /// Closed-form solution, if known, for error reporting.
    pub exact: Option<String>,
    /// Extra `[n, nt]` grids for a refinement study against `exact`.
    #[serde(default)]
    pub refine: Vec<[usize; 2]>,
    #[serde(default = "default_min_order")]
    pub min_order: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub eps: Vec<f64>,
    /// Largest tolerated growth of a weak-C² measurement over the tail.
    pub max_growth: f64,
    /// Rungs with `ε` at or below this value form the tail.
    pub tail_below: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { eps: vec![1.0, 1e-1, 1e-2, 1e-3, 1e-4], max_growth: 2.0, tail_below: 1e-2 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub k: usize,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub field: ScanField,
    pub comparison_trials: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { k: 1, n: 3, trials: 100_000, seed: 42, field: ScanField::Real, comparison_trials: 10_000 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub binary: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("qgeo-out"), binary: true }
    }
}

fn one() -> usize {
    1
}

fn unit_source() -> Source {
    Source::Number(1.0)
}

fn zero_source() -> Source {
    Source::Number(0.0)
}

fn default_min_order() -> f64 {
    1.8
}

/// A parsed configuration together with the directory its relative paths
/// are resolved against.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub base: PathBuf,
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let config: RunConfig = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    config.solver.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, base })
}

impl Loaded {
    pub fn problem(&self) -> Result<&ProblemConfig, CliError> {
        self.config.problem.as_ref().ok_or_else(|| CliError::Config("missing [problem] section".into()))
    }

    pub fn grid(&self) -> Result<GridSpec, CliError> {
        let p = self.problem()?;
        self.grid_at(p.n, p.nt)
    }

    pub fn grid_at(&self, n: usize, nt: usize) -> Result<GridSpec, CliError> {
        let p = self.problem()?;
        let grid = match p.period {
            Some(period) => GridSpec::with_period(p.dim, n, nt, period),
            None => GridSpec::new(p.dim, n, nt),
        };
        grid.map_err(|e| CliError::Config(e.to_string()))
    }

    /// Builds the problem on `grid`, refusing data outside the admissible set.
    pub fn spec_on(&self, grid: GridSpec) -> Result<ProblemSpec, CliError> {
        let p = self.problem()?;
        let a = self.space_field("a", &p.a, grid)?;
        let f = self.space_time_field("f", &p.f, grid)?;
        let u0 = self.space_field("u0", &p.u0, grid)?;
        let u1 = self.space_field("u1", &p.u1, grid)?;
        ProblemSpec::new(a, p.b, f, u0, u1).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn exact_on(&self, grid: GridSpec) -> Result<Option<ScalarField>, CliError> {
        let Some(text) = &self.problem()?.exact else { return Ok(None) };
        let e = parse("exact", text)?;
        Ok(Some(ScalarField::from_fn(grid, |x, y, t| e.eval(x, y, t))))
    }

    fn resolve(&self, file: &Path) -> PathBuf {
        if file.is_absolute() {
            file.to_path_buf()
        } else {
            self.base.join(file)
        }
    }

    fn space_field(&self, name: &str, src: &Source, grid: GridSpec) -> Result<SpaceField, CliError> {
        match src {
            Source::Number(v) => Ok(SpaceField::constant(grid, *v)),
            Source::Expr(text) => {
                let e = parse(name, text)?;
                if e.uses_t() {
                    return Err(CliError::Config(format!("{name} may not depend on t")));
                }
                Ok(SpaceField::from_fn(grid, |x, y| e.eval(x, y, 0.0)))
            }
            Source::File(FileRef { file }) => {
                let path = self.resolve(file);
                let text = fs::read_to_string(&path)
                    .map_err(|e| CliError::Config(format!("cannot read {name} from {}: {e}", path.display())))?;
                let values = text
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| CliError::Config(format!("{name} in {}: {e}", path.display())))?;
                SpaceField::from_values(grid, values).map_err(|e| CliError::Config(format!("{name} in {}: {e}", path.display())))
            }
        }
    }

    fn space_time_field(&self, name: &str, src: &Source, grid: GridSpec) -> Result<ScalarField, CliError> {
        match src {
            Source::Number(v) => Ok(ScalarField::constant(grid, *v)),
            Source::Expr(text) => {
                let e = parse(name, text)?;
                Ok(ScalarField::from_fn(grid, |x, y, t| e.eval(x, y, t)))
            }
            Source::File(FileRef { file }) => {
                let path = self.resolve(file);
                read_field(&path, grid).map_err(|e| CliError::Config(format!("{name}: {e}")))
            }
        }
    }
}

fn parse(name: &str, text: &str) -> Result<Expr, CliError> {
    Expr::parse(text).map_err(|e| CliError::Config(format!("{name}: {e}")))
}

/// Reads a full space-time field, binary when the extension is `.bin`.
pub fn read_field(path: &Path, grid: GridSpec) -> Result<ScalarField, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
    let result = if path.extension().is_some_and(|x| x == "bin") {
        mesh::read_binary(grid, BufReader::new(file))
    } else {
        mesh::read_csv(grid, BufReader::new(file))
    };
    result.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loaded(text: &str) -> Result<Loaded, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Loaded { config, base: PathBuf::new() })
    }

    #[test]
    fn defaults_fill_in() {
        let l = loaded("[problem]\nn = 16\nnt = 9\nf = 2\n").unwrap();
        let p = l.problem().unwrap();
        assert_eq!(p.dim, 1);
        assert_eq!(l.config.sweep.eps.len(), 5);
        assert_eq!(l.config.solver, SolveOptions::default());
        let spec = l.spec_on(l.grid().unwrap()).unwrap();
        assert_eq!(spec.a().values()[0], 1.0);
        assert_eq!(spec.f().values()[3], 2.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(loaded("[problem]\nn = 16\nnt = 9\nf = 2\ncolour = 1\n").is_err());
        assert!(loaded("[solver]\nnewton_tolerance = 1e-8\n").is_err());
        assert!(loaded("[extra]\n").is_err());
    }

    #[test]
    fn nonpositive_a_names_the_node() {
        let l = loaded("[problem]\nn = 16\nnt = 9\nf = 2\na = \"cos(x) - 0.5\"\n").unwrap();
        let err = l.spec_on(l.grid().unwrap()).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
        assert!(err.to_string().contains("node 3"), "{err}");
    }

    #[test]
    fn boundary_data_cannot_depend_on_time() {
        let l = loaded("[problem]\nn = 16\nnt = 9\nf = 2\nu0 = \"t\"\n").unwrap();
        assert!(l.spec_on(l.grid().unwrap()).is_err());
    }
}
