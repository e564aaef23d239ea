//! Flat `key = value` experiment files with dotted sections.
//!
//! Blank lines and text after `#` are ignored. Lists are comma separated.
//! Every key must be known and, for the grid, integrand, data and solver
//! sections, must apply to the selected kind.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Scheme};
use crate::integrands::Integrand;
use crate::solver::{SolverParams, StepRule};
use crate::verify::DEFAULT_SEED;

const KNOWN_KEYS: &[&str] = &[
    "task",
    "seed",
    "grid.scheme",
    "grid.dimension",
    "grid.nodes",
    "grid.radius",
    "integrand.kind",
    "integrand.p",
    "integrand.scale",
    "integrand.mu",
    "integrand.kappa",
    "integrand.weights",
    "integrand.delta",
    "integrand.base.kind",
    "integrand.base.p",
    "integrand.base.scale",
    "integrand.base.mu",
    "integrand.base.weights",
    "data.kind",
    "data.degree",
    "data.axis",
    "data.slope",
    "data.coefficients",
    "data.offset",
    "data.scale",
    "data.shift",
    "data.file",
    "solver.steps",
    "solver.ratio",
    "solver.tau",
    "solver.sigma",
    "solver.max_iters",
    "solver.gap_tol",
    "solver.check_every",
    "solver.data_weight",
    "levelsets.thresholds",
    "levelsets.count",
    "isoperimetric.volume",
    "isoperimetric.volume_tol",
    "isoperimetric.wulff",
    "classify.slack",
    "flow.dt",
    "flow.steps",
    "sweep.dims",
    "output.dir",
    "output.formats",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Solve,
    Levelsets,
    Isoperimetric,
    Classify,
    Flow,
    Sweep,
    VerifyAll,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Solve => "solve",
            Task::Levelsets => "levelsets",
            Task::Isoperimetric => "isoperimetric",
            Task::Classify => "classify",
            Task::Flow => "flow",
            Task::Sweep => "sweep",
            Task::VerifyAll => "verify_all",
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "solve" => Task::Solve,
            "levelsets" => Task::Levelsets,
            "isoperimetric" => Task::Isoperimetric,
            "classify" => Task::Classify,
            "flow" => Task::Flow,
            "sweep" => Task::Sweep,
            "verify" | "verify_all" | "verify-all" => Task::VerifyAll,
            other => return Err(Error::Validation(format!("unknown task `{other}`"))),
        })
    }
}

/// Built-in data `g`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSpec {
    /// `He_k(x_axis)`.
    Hermite { degree: usize, axis: usize },
    /// `⟨c, x⟩ + offset`; missing coefficients are zero.
    Affine { coefficients: Vec<f64>, offset: f64 },
    /// `scale |x|² + shift`.
    QuadraticShift { scale: f64, shift: f64 },
    /// Node values read from a CSV file with columns `x1..xm` and `g`.
    Tabulated { file: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
}

impl Default for Formats {
    fn default() -> Self {
        Self {
            csv: true,
            json: true,
            svg: false,
        }
    }
}

impl FromStr for Formats {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = Formats {
            csv: false,
            json: false,
            svg: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "csv" => out.csv = true,
                "json" => out.json = true,
                "svg" => out.svg = true,
                other => return Err(Error::Validation(format!("unknown output format `{other}`"))),
            }
        }
        if !(out.csv || out.json || out.svg) {
            return Err(Error::Validation("at least one output format is required".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Formats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [(self.csv, "csv"), (self.json, "json"), (self.svg, "svg")]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, n)| *n)
            .collect();
        write!(f, "{}", names.join(","))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelsetOptions {
    /// Explicit thresholds; otherwise `count` evenly spaced ones between
    /// `max(λ̄, min u)` and the interior maximum of `u`.
    pub thresholds: Option<Vec<f64>>,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct IsoperimetricOptions {
    pub volume: f64,
    pub volume_tol: f64,
    pub wulff: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyOptions {
    /// Energy slack for optimal candidates; defaults to five grid spacings.
    pub slack: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowOptions {
    pub dt: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOptions {
    /// Defaults to `1..=m`.
    pub dims: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputOptions {
    pub dir: PathBuf,
    pub formats: Formats,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub seed: u64,
    pub grid: GridSpec,
    pub integrand: Integrand,
    pub data: DataSpec,
    pub solver: SolverParams,
    pub levelsets: LevelsetOptions,
    pub isoperimetric: IsoperimetricOptions,
    pub classify: ClassifyOptions,
    pub flow: FlowOptions,
    pub sweep: SweepOptions,
    pub output: OutputOptions,
}

impl ExperimentConfig {
    /// Defaults for a task. Analysis tasks use the quadratic integrand with
    /// `g = x`; the geometric ones use the norm with data whose minimiser
    /// is not identically zero, and the volume-constrained problem gets
    /// constant data on a grid fine enough to resolve volumes to `1e-3`.
    pub fn defaults(task: Task) -> Self {
        let hermite = DataSpec::Hermite { degree: 1, axis: 0 };
        let (grid, integrand, data) = match task {
            Task::Isoperimetric => (
                GridSpec::uniform(1, 4001, 6.0),
                Integrand::EuclideanNorm,
                DataSpec::Affine {
                    coefficients: vec![],
                    offset: 0.0,
                },
            ),
            Task::Levelsets => (
                GridSpec::uniform(1, 1001, 6.0),
                Integrand::EuclideanNorm,
                DataSpec::Affine {
                    coefficients: vec![2.0],
                    offset: 0.0,
                },
            ),
            Task::Classify => (
                GridSpec::uniform(1, 1001, 6.0),
                Integrand::EuclideanNorm,
                DataSpec::QuadraticShift { scale: 1.0, shift: -2.0 },
            ),
            _ => (GridSpec::uniform(1, 257, 6.0), Integrand::Quadratic { mu: 1.0 }, hermite),
        };
        Self {
            task,
            seed: DEFAULT_SEED,
            grid,
            integrand,
            data,
            solver: SolverParams::default(),
            levelsets: LevelsetOptions {
                thresholds: None,
                count: 20,
            },
            isoperimetric: IsoperimetricOptions {
                volume: 0.5,
                volume_tol: crate::geometry::VOLUME_TOL,
                wulff: false,
            },
            classify: ClassifyOptions { slack: None },
            flow: FlowOptions { dt: 0.1, steps: 10 },
            sweep: SweepOptions { dims: None },
            output: OutputOptions {
                dir: PathBuf::from("out"),
                formats: Formats::default(),
            },
        }
    }

    pub fn from_file(path: &Path, task: Task) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config = Self::parse(&text, task)?;
        // relative data files are resolved against the config location
        if let DataSpec::Tabulated { file } = &mut config.data {
            if file.is_relative() {
                if let Some(dir) = path.parent() {
                    *file = dir.join(&*file);
                }
            }
        }
        Ok(config)
    }

    /// Parses a config for `task`. A `task` key, if present, must agree.
    pub fn parse(text: &str, task: Task) -> Result<Self> {
        let mut keys = Keys::parse(text)?;
        let unknown: Vec<&str> = keys
            .map
            .keys()
            .map(String::as_str)
            .filter(|k| !KNOWN_KEYS.contains(k))
            .collect();
        if !unknown.is_empty() {
            return Err(Error::Validation(format!("unknown keys: {}", unknown.join(", "))));
        }
        if let Some(t) = keys.take::<Task>("task")? {
            if t != task {
                return Err(Error::Validation(format!(
                    "config is for task `{}` but `{}` was requested",
                    t.name(),
                    task.name()
                )));
            }
        }
        let mut config = Self::defaults(task);
        if let Some(seed) = keys.take("seed")? {
            config.seed = seed;
        }
        config.grid = parse_grid(&mut keys, config.grid)?;
        if keys.has_prefix("integrand.") {
            config.integrand = parse_integrand(&mut keys, "integrand.")?;
        }
        if keys.has_prefix("data.") {
            config.data = parse_data(&mut keys)?;
        }
        config.solver = parse_solver(&mut keys, config.solver)?;

        let lv = &mut config.levelsets;
        lv.thresholds = keys.take_list("levelsets.thresholds")?;
        lv.count = keys.take("levelsets.count")?.unwrap_or(lv.count);
        let iso = &mut config.isoperimetric;
        iso.volume = keys.take("isoperimetric.volume")?.unwrap_or(iso.volume);
        iso.volume_tol = keys.take("isoperimetric.volume_tol")?.unwrap_or(iso.volume_tol);
        iso.wulff = keys.take("isoperimetric.wulff")?.unwrap_or(iso.wulff);
        config.classify.slack = keys.take("classify.slack")?;
        config.flow.dt = keys.take("flow.dt")?.unwrap_or(config.flow.dt);
        config.flow.steps = keys.take("flow.steps")?.unwrap_or(config.flow.steps);
        config.sweep.dims = keys.take_list("sweep.dims")?;
        if let Some(dir) = keys.take::<String>("output.dir")? {
            config.output.dir = PathBuf::from(dir);
        }
        if let Some(formats) = keys.take("output.formats")? {
            config.output.formats = formats;
        }
        keys.finish()?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.solver.validate()?;
        self.integrand.check_dimension(self.grid.dimension)?;
        if self.task == Task::Classify && self.integrand != Integrand::EuclideanNorm {
            return Err(Error::Validation("classify always uses the euclidean_norm integrand".into()));
        }
        let m = self.grid.dimension;
        match &self.data {
            DataSpec::Hermite { axis, .. } if *axis >= m => {
                return Err(Error::Validation(format!("data.axis must be below the dimension {m}")));
            }
            DataSpec::Affine { coefficients, .. } if coefficients.len() > m => {
                return Err(Error::Validation(format!("at most {m} affine coefficients are allowed")));
            }
            _ => {}
        }
        if self.levelsets.count == 0 {
            return Err(Error::Validation("levelsets.count must be positive".into()));
        }
        let iso = &self.isoperimetric;
        if !(iso.volume > 0.0 && iso.volume < 1.0) {
            return Err(Error::Validation("isoperimetric.volume must lie in (0, 1)".into()));
        }
        if !(iso.volume_tol > 0.0) {
            return Err(Error::Validation("isoperimetric.volume_tol must be positive".into()));
        }
        if self.classify.slack.is_some_and(|s| !(s >= 0.0)) {
            return Err(Error::Validation("classify.slack must be nonnegative".into()));
        }
        if !(self.flow.dt > 0.0 && self.flow.dt.is_finite()) || self.flow.steps == 0 {
            return Err(Error::Validation("flow needs dt > 0 and at least one step".into()));
        }
        Ok(())
    }
}

struct Keys {
    map: BTreeMap<String, (usize, String)>,
}

impl Keys {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Validation(format!("line {}: expected `key = value`", n + 1)));
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Validation(format!("line {}: empty key", n + 1)));
            }
            if map.insert(key.clone(), (n + 1, value.trim().to_string())).is_some() {
                return Err(Error::Validation(format!("line {}: duplicate key `{key}`", n + 1)));
            }
        }
        Ok(Self { map })
    }

    fn has_prefix(&self, prefix: &str) -> bool {
        self.map.keys().any(|k| k.starts_with(prefix))
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some((line, value)) => value
                .parse()
                .map(Some)
                .map_err(|_| Error::Validation(format!("line {line}: cannot parse `{key} = {value}`"))),
        }
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.take(key)?
            .ok_or_else(|| Error::Validation(format!("missing key `{key}`")))
    }

    fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some((line, value)) => value
                .split(',')
                .map(|p| p.trim().parse())
                .collect::<std::result::Result<Vec<T>, _>>()
                .map(Some)
                .map_err(|_| Error::Validation(format!("line {line}: cannot parse list `{key} = {value}`"))),
        }
    }

    /// Known keys left over do not apply to the selected kinds.
    fn finish(self) -> Result<()> {
        if self.map.is_empty() {
            return Ok(());
        }
        let left: Vec<&str> = self.map.keys().map(String::as_str).collect();
        Err(Error::Validation(format!(
            "keys not used by this configuration: {}",
            left.join(", ")
        )))
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::parse(s)
    }
}

fn parse_grid(keys: &mut Keys, default: GridSpec) -> Result<GridSpec> {
    let scheme = keys.take("grid.scheme")?.unwrap_or(default.scheme);
    let radius = keys.take("grid.radius")?;
    if radius.is_some() && scheme == Scheme::GaussHermite {
        return Err(Error::Validation("grid.radius only applies to uniform_truncated grids".into()));
    }
    Ok(GridSpec {
        dimension: keys.take("grid.dimension")?.unwrap_or(default.dimension),
        nodes_per_axis: keys.take("grid.nodes")?.unwrap_or(default.nodes_per_axis),
        scheme,
        truncation_radius: radius.unwrap_or(default.truncation_radius),
    })
}

fn parse_integrand(keys: &mut Keys, prefix: &str) -> Result<Integrand> {
    let key = |name: &str| format!("{prefix}{name}");
    let kind: String = keys.require(&key("kind"))?;
    match kind.as_str() {
        "euclidean_norm" => Ok(Integrand::EuclideanNorm),
        "power_p" => Integrand::power_p(
            keys.require(&key("p"))?,
            keys.take(&key("scale"))?.unwrap_or(1.0),
        ),
        "quadratic" => Integrand::quadratic(keys.take(&key("mu"))?.unwrap_or(1.0)),
        "anisotropic_norm" => Integrand::anisotropic_norm(keys.take_list(&key("weights"))?.ok_or_else(|| {
            Error::Validation(format!("missing key `{}`", key("weights")))
        })?),
        "moreau_regularized" | "delta_regularized" if prefix == "integrand." => {
            let base = parse_integrand(keys, "integrand.base.")?;
            if kind == "moreau_regularized" {
                Integrand::moreau_regularized(base, keys.require("integrand.mu")?, keys.require("integrand.kappa")?)
            } else {
                Integrand::delta_regularized(base, keys.require("integrand.delta")?)
            }
        }
        other => Err(Error::Validation(format!("unknown integrand kind `{other}` for `{}`", key("kind")))),
    }
}

fn parse_data(keys: &mut Keys) -> Result<DataSpec> {
    let kind: String = keys.require("data.kind")?;
    match kind.as_str() {
        "hermite" => Ok(DataSpec::Hermite {
            degree: keys.require("data.degree")?,
            axis: keys.take("data.axis")?.unwrap_or(0),
        }),
        "affine" => {
            let slope: Option<f64> = keys.take("data.slope")?;
            let list: Option<Vec<f64>> = keys.take_list("data.coefficients")?;
            let coefficients = match (slope, list) {
                (Some(_), Some(_)) => {
                    return Err(Error::Validation(
                        "give either data.slope or data.coefficients, not both".into(),
                    ))
                }
                (Some(c), None) => vec![c],
                (None, Some(cs)) => cs,
                (None, None) => vec![],
            };
            Ok(DataSpec::Affine {
                coefficients,
                offset: keys.take("data.offset")?.unwrap_or(0.0),
            })
        }
        "quadratic_shift" => Ok(DataSpec::QuadraticShift {
            scale: keys.take("data.scale")?.unwrap_or(1.0),
            shift: keys.take("data.shift")?.unwrap_or(0.0),
        }),
        "tabulated" => Ok(DataSpec::Tabulated {
            file: PathBuf::from(keys.require::<String>("data.file")?),
        }),
        other => Err(Error::Validation(format!("unknown data kind `{other}`"))),
    }
}

fn parse_solver(keys: &mut Keys, default: SolverParams) -> Result<SolverParams> {
    let rule: Option<String> = keys.take("solver.steps")?;
    let steps = match rule.as_deref() {
        None | Some("diagonal") => match keys.take("solver.ratio")? {
            Some(ratio) => StepRule::Diagonal { ratio },
            None => default.steps,
        },
        Some("scalar_auto") => StepRule::ScalarAuto,
        Some("scalar") => StepRule::Scalar {
            tau: keys.require("solver.tau")?,
            sigma: keys.require("solver.sigma")?,
        },
        Some(other) => return Err(Error::Validation(format!("unknown step rule `{other}`"))),
    };
    Ok(SolverParams {
        steps,
        max_iters: keys.take("solver.max_iters")?.unwrap_or(default.max_iters),
        gap_tol: keys.take("solver.gap_tol")?.unwrap_or(default.gap_tol),
        check_every: keys.take("solver.check_every")?.unwrap_or(default.check_every),
        data_weight: keys.take("solver.data_weight")?.unwrap_or(default.data_weight),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let text = "
            # quadratic solve
            grid.scheme = gauss_hermite
            grid.dimension = 2
            grid.nodes = 33
            integrand.kind = anisotropic_norm
            integrand.weights = 1, 4
            data.kind = affine
            data.coefficients = 1.5, -0.7
            data.offset = 0.3
            solver.gap_tol = 1e-8   # tighter
            output.formats = json,svg
        ";
        let c = ExperimentConfig::parse(text, Task::Solve).unwrap();
        assert_eq!(c.grid, GridSpec::gauss_hermite(2, 33));
        assert_eq!(c.integrand, Integrand::AnisotropicNorm { weights: vec![1.0, 4.0] });
        assert_eq!(
            c.data,
            DataSpec::Affine {
                coefficients: vec![1.5, -0.7],
                offset: 0.3
            }
        );
        assert_eq!(c.solver.gap_tol, 1e-8);
        assert!(c.output.formats.svg && !c.output.formats.csv);
        assert_eq!(c.output.formats.to_string(), "json,svg");
    }

    #[test]
    fn unknown_keys_are_listed() {
        let err = ExperimentConfig::parse("grid.nodez = 3\nfoo = 1\n", Task::Solve).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("grid.nodez") && msg.contains("foo"), "{msg}");
    }

    #[test]
    fn inapplicable_keys_are_rejected() {
        let err = ExperimentConfig::parse("integrand.kind = quadratic\nintegrand.p = 2\n", Task::Solve).unwrap_err();
        assert!(err.to_string().contains("integrand.p"));
    }

    #[test]
    fn malformed_lines() {
        assert!(ExperimentConfig::parse("grid.nodes 3", Task::Solve).is_err());
        assert!(ExperimentConfig::parse("grid.nodes = three", Task::Solve).is_err());
        assert!(ExperimentConfig::parse("seed = 1\nseed = 2", Task::Solve).is_err());
        assert!(ExperimentConfig::parse("task = flow", Task::Solve).is_err());
        assert!(ExperimentConfig::parse("grid.nodes = 1", Task::Solve).is_err());
        assert!(ExperimentConfig::parse("output.formats = pdf", Task::Solve).is_err());
    }

    #[test]
    fn nested_integrand() {
        let text = "integrand.kind = delta_regularized\nintegrand.delta = 0.5\nintegrand.base.kind = power_p\nintegrand.base.p = 1.5\n";
        let c = ExperimentConfig::parse(text, Task::Solve).unwrap();
        assert_eq!(c.integrand.kind_name(), "delta_regularized");
    }

    #[test]
    fn task_defaults() {
        let c = ExperimentConfig::parse("", Task::Isoperimetric).unwrap();
        assert_eq!(c.grid.nodes_per_axis, 4001);
        assert_eq!(c.isoperimetric.volume, 0.5);
        let c = ExperimentConfig::parse("task = verify", Task::VerifyAll).unwrap();
        assert_eq!(c.seed, DEFAULT_SEED);
    }
}
