//! Experiment orchestration: configuration, metrics, single runs,
//! sweeps, dictionary training, and the artifacts they write.
//!
//! Settings arrive from an optional flat `key=value` config file plus
//! command-line overrides, are merged into a [`ConfigDraft`], and
//! resolve against per-task defaults into an [`ExperimentConfig`].

mod metrics;
mod run;

pub use metrics::{rel_error, rel_residual, rel_sparsity, MetricsError, MetricsReport};
pub use run::{run_experiment, run_sweep, train_dictionary, write_phantom, TrainSettings};

use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::solvers::{MappingParams, SolverError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error ({context}): {source}")]
    Io { context: String, source: io::Error },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl HarnessError {
    /// Process exit code for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Io { .. } => 3,
            HarnessError::Numerical(_) => 4,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: io::Error) -> Self {
        HarnessError::Io {
            context: context.into(),
            source,
        }
    }
}

impl From<MetricsError> for HarnessError {
    fn from(e: MetricsError) -> Self {
        HarnessError::Numerical(e.to_string())
    }
}

impl From<SolverError> for HarnessError {
    fn from(e: SolverError) -> Self {
        HarnessError::Numerical(e.to_string())
    }
}

/// The five built-in experiment tasks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Deblur,
    Complete,
    Tomo,
    Superres,
    Toy,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Deblur => "deblur",
            Task::Complete => "complete",
            Task::Tomo => "tomo",
            Task::Superres => "superres",
            Task::Toy => "toy",
        }
    }

    /// Default `(lambda, steepness, switch_point, mu)` for this task.
    fn parameter_defaults(self) -> (f64, f64, f64, f64) {
        match self {
            Task::Deblur => (1e-8, 0.1, -0.75, 1e-4),
            Task::Complete => (1e-3, 1.0, -0.5, 1e-3),
            Task::Tomo => (1.0, 0.5, -1.0, 1.0),
            Task::Superres => (1e-4, 0.2975, -0.05, 1e-2),
            Task::Toy => (1e-4, 1.0, 0.0, 0.0),
        }
    }

    fn default_size(self) -> usize {
        match self {
            Task::Deblur => 256,
            Task::Complete => 128,
            Task::Tomo => 256,
            Task::Superres => 512,
            Task::Toy => 2,
        }
    }

    /// Whether the task reads a ground-truth image from disk.
    fn accepts_image(self) -> bool {
        matches!(self, Task::Deblur | Task::Complete | Task::Superres)
    }
}

impl FromStr for Task {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "deblur" => Ok(Task::Deblur),
            "complete" => Ok(Task::Complete),
            "tomo" => Ok(Task::Tomo),
            "superres" => Ok(Task::Superres),
            "toy" => Ok(Task::Toy),
            other => Err(HarnessError::Config(format!(
                "unknown task '{other}' (expected deblur, complete, tomo, superres, or toy)"
            ))),
        }
    }
}

/// The three solvers the harness can drive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Mrnsd,
    SpMrnsd,
    SpNngd,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Mrnsd => "mrnsd",
            SolverKind::SpMrnsd => "spmrnsd",
            SolverKind::SpNngd => "spnngd",
        }
    }
}

impl FromStr for SolverKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "mrnsd" => Ok(SolverKind::Mrnsd),
            "spmrnsd" => Ok(SolverKind::SpMrnsd),
            "spnngd" => Ok(SolverKind::SpNngd),
            other => Err(HarnessError::Config(format!(
                "unknown solver '{other}' (expected mrnsd, spmrnsd, or spnngd)"
            ))),
        }
    }
}

/// Parses a patch shape written as `ROWSxCOLS`, or one number for a
/// square patch.
pub fn parse_patch(text: &str) -> Result<(usize, usize), HarnessError> {
    let bad = || {
        HarnessError::Config(format!(
            "patch must be ROWSxCOLS or a single number, got '{text}'"
        ))
    };
    let parse_one = |part: &str| part.trim().parse::<usize>().map_err(|_| bad());
    match text.split_once('x') {
        Some((rows, cols)) => Ok((parse_one(rows)?, parse_one(cols)?)),
        None => {
            let side = parse_one(text)?;
            Ok((side, side))
        }
    }
}

fn parse_float_list(key: &str, text: &str) -> Result<Vec<f64>, HarnessError> {
    text.split(',')
        .map(|part| {
            part.trim().parse::<f64>().map_err(|_| {
                HarnessError::Config(format!("{key}: expected a number, got '{part}'"))
            })
        })
        .collect()
}

/// Unresolved settings from one source (config file or command line).
/// `None` fields fall through to the other source, then to defaults.
#[derive(Clone, Debug, Default)]
pub struct ConfigDraft {
    pub task: Option<String>,
    pub solver: Option<String>,
    pub lambda: Option<f64>,
    pub steepness: Option<f64>,
    pub switch_point: Option<f64>,
    pub mu: Option<f64>,
    pub iters: Option<usize>,
    pub seed: Option<u64>,
    pub dict: Option<PathBuf>,
    pub image: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub size: Option<usize>,
    pub patch: Option<(usize, usize)>,
    pub grid_lambda: Option<Vec<f64>>,
    pub grid_a: Option<Vec<f64>>,
    pub grid_c: Option<Vec<f64>>,
}

impl ConfigDraft {
    /// Reads a flat `key=value` file. Blank lines and lines starting
    /// with `#` are skipped; keys match the command-line flag names
    /// with `-` replaced by `_`. Unknown or repeated keys are errors.
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::io(format!("config file {}", path.display()), e))?;
        let mut draft = ConfigDraft::default();
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(HarnessError::Config(format!(
                    "line {} is not key=value: '{raw}'",
                    line_no + 1
                )));
            };
            draft.set(key.trim(), value.trim())?;
        }
        Ok(draft)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        fn put<T>(slot: &mut Option<T>, key: &str, value: T) -> Result<(), HarnessError> {
            if slot.is_some() {
                return Err(HarnessError::Config(format!("key '{key}' set twice")));
            }
            *slot = Some(value);
            Ok(())
        }
        let num =
            |what: &str| HarnessError::Config(format!("{key}: expected {what}, got '{value}'"));
        match key {
            "task" => put(&mut self.task, key, value.to_string()),
            "solver" => put(&mut self.solver, key, value.to_string()),
            "lambda" => put(
                &mut self.lambda,
                key,
                value.parse().map_err(|_| num("a number"))?,
            ),
            "a" => put(
                &mut self.steepness,
                key,
                value.parse().map_err(|_| num("a number"))?,
            ),
            "c" => put(
                &mut self.switch_point,
                key,
                value.parse().map_err(|_| num("a number"))?,
            ),
            "mu" => put(
                &mut self.mu,
                key,
                value.parse().map_err(|_| num("a number"))?,
            ),
            "iters" => put(
                &mut self.iters,
                key,
                value.parse().map_err(|_| num("a positive integer"))?,
            ),
            "seed" => put(
                &mut self.seed,
                key,
                value.parse().map_err(|_| num("an integer"))?,
            ),
            "dict" => put(&mut self.dict, key, PathBuf::from(value)),
            "image" => put(&mut self.image, key, PathBuf::from(value)),
            "out" => put(&mut self.out, key, PathBuf::from(value)),
            "size" => put(
                &mut self.size,
                key,
                value.parse().map_err(|_| num("a positive integer"))?,
            ),
            "patch" => put(&mut self.patch, key, parse_patch(value)?),
            "grid_lambda" => put(&mut self.grid_lambda, key, parse_float_list(key, value)?),
            "grid_a" => put(&mut self.grid_a, key, parse_float_list(key, value)?),
            "grid_c" => put(&mut self.grid_c, key, parse_float_list(key, value)?),
            other => Err(HarnessError::Config(format!(
                "unknown config key '{other}'"
            ))),
        }
    }

    /// Overlays `overrides` (typically command-line flags) on `self`
    /// (typically the config file); set override fields win.
    pub fn merge(mut self, overrides: ConfigDraft) -> ConfigDraft {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if overrides.$field.is_some() { self.$field = overrides.$field; })*
            };
        }
        take!(
            task,
            solver,
            lambda,
            steepness,
            switch_point,
            mu,
            iters,
            seed,
            dict,
            image,
            out,
            size,
            patch,
            grid_lambda,
            grid_a,
            grid_c
        );
        self
    }

    /// Fills defaults, validates cross-field rules, and produces a
    /// runnable configuration.
    pub fn resolve(self) -> Result<ExperimentConfig, HarnessError> {
        let task: Task = self
            .task
            .as_deref()
            .ok_or_else(|| HarnessError::Config("task is required".into()))?
            .parse()?;
        let solver: SolverKind = self
            .solver
            .as_deref()
            .ok_or_else(|| HarnessError::Config("solver is required".into()))?
            .parse()?;
        let out = self
            .out
            .ok_or_else(|| HarnessError::Config("out (output directory) is required".into()))?;

        if solver != SolverKind::SpMrnsd {
            if self.lambda.is_some() {
                return Err(HarnessError::Config(format!(
                    "lambda only applies to spmrnsd, not {}",
                    solver.name()
                )));
            }
            if self.grid_lambda.is_some() {
                return Err(HarnessError::Config(format!(
                    "grid_lambda only applies to spmrnsd, not {}",
                    solver.name()
                )));
            }
        }
        if solver != SolverKind::SpNngd {
            if self.steepness.is_some() || self.switch_point.is_some() {
                return Err(HarnessError::Config(format!(
                    "a and c only apply to spnngd, not {}",
                    solver.name()
                )));
            }
            if self.grid_a.is_some() || self.grid_c.is_some() {
                return Err(HarnessError::Config(format!(
                    "grid_a and grid_c only apply to spnngd, not {}",
                    solver.name()
                )));
            }
        }
        if self.grid_lambda.is_some() && (self.grid_a.is_some() || self.grid_c.is_some()) {
            return Err(HarnessError::Config(
                "cannot sweep lambda and the mapping parameters together".into(),
            ));
        }
        for (name, grid) in [
            ("grid_lambda", &self.grid_lambda),
            ("grid_a", &self.grid_a),
            ("grid_c", &self.grid_c),
        ] {
            if grid.as_ref().is_some_and(|g| g.is_empty()) {
                return Err(HarnessError::Config(format!("{name} must not be empty")));
            }
        }

        if task == Task::Toy {
            for (set, what) in [
                (self.size.is_some(), "size"),
                (self.patch.is_some(), "patch"),
                (self.dict.is_some(), "dict"),
                (self.image.is_some(), "image"),
            ] {
                if set {
                    return Err(HarnessError::Config(format!(
                        "{what} does not apply to the built-in toy task"
                    )));
                }
            }
        } else if self.dict.is_none() {
            return Err(HarnessError::Config(format!(
                "task {} needs a dictionary file (dict=...)",
                task.name()
            )));
        }
        if self.image.is_some() && !task.accepts_image() {
            return Err(HarnessError::Config(format!(
                "task {} does not take an input image",
                task.name()
            )));
        }

        let (lambda_default, a_default, c_default, mu_default) = task.parameter_defaults();
        let lambda = self.lambda.unwrap_or(lambda_default);
        let steepness = self.steepness.unwrap_or(a_default);
        let switch_point = self.switch_point.unwrap_or(c_default);
        let mu = self.mu.unwrap_or(mu_default);
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(HarnessError::Config(format!(
                "lambda must be non-negative, got {lambda}"
            )));
        }
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(HarnessError::Config(format!(
                "mu must be non-negative, got {mu}"
            )));
        }
        if solver == SolverKind::SpNngd {
            // Validate the mapping parameters early with the same rules
            // the solver applies.
            MappingParams::new(steepness, switch_point)
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            if let Some(grid) = &self.grid_a {
                for &a in grid {
                    MappingParams::new(a, switch_point)
                        .map_err(|e| HarnessError::Config(format!("grid_a: {e}")))?;
                }
            }
            if let Some(grid) = &self.grid_c {
                for &c in grid {
                    MappingParams::new(steepness, c)
                        .map_err(|e| HarnessError::Config(format!("grid_c: {e}")))?;
                }
            }
        }
        let iters = self.iters.unwrap_or(100);
        if iters < 1 {
            return Err(HarnessError::Config("iters must be at least 1".into()));
        }

        let size = self.size.unwrap_or_else(|| task.default_size());
        if size < 1 {
            return Err(HarnessError::Config("size must be at least 1".into()));
        }
        let patch = match task {
            Task::Toy => (2, 1),
            _ => self.patch.unwrap_or((16, 16)),
        };

        Ok(ExperimentConfig {
            task,
            solver,
            lambda,
            steepness,
            switch_point,
            mu,
            iters,
            seed: self.seed.unwrap_or(0),
            dict: self.dict,
            image: self.image,
            out,
            size,
            patch,
            grid_lambda: self.grid_lambda,
            grid_a: self.grid_a,
            grid_c: self.grid_c,
        })
    }
}

/// A fully resolved experiment description; see [`ConfigDraft::resolve`]
/// for the defaulting and compatibility rules.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub task: Task,
    pub solver: SolverKind,
    /// Shrinkage weight (spmrnsd only).
    pub lambda: f64,
    /// Mapping steepness `a` (spnngd only).
    pub steepness: f64,
    /// Mapping switch point `c` (spnngd only).
    pub switch_point: f64,
    /// Smoothing weight folded into the least-squares system.
    pub mu: f64,
    pub iters: usize,
    pub seed: u64,
    pub dict: Option<PathBuf>,
    pub image: Option<PathBuf>,
    pub out: PathBuf,
    /// Image side length.
    pub size: usize,
    /// Patch shape `(rows, cols)`.
    pub patch: (usize, usize),
    pub grid_lambda: Option<Vec<f64>>,
    pub grid_a: Option<Vec<f64>>,
    pub grid_c: Option<Vec<f64>>,
}

impl ExperimentConfig {
    /// `key=value` lines echoing every setting, sorted by key, used for
    /// the `config.resolved` artifact. Unset optional paths and absent
    /// grids are omitted.
    pub fn resolved_lines(&self) -> Vec<String> {
        fn float_list(values: &[f64]) -> String {
            let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            parts.join(",")
        }
        let mut lines = vec![
            format!("a={}", self.steepness),
            format!("c={}", self.switch_point),
            format!("iters={}", self.iters),
            format!("lambda={}", self.lambda),
            format!("mu={}", self.mu),
            format!("out={}", self.out.display()),
            format!("patch={}x{}", self.patch.0, self.patch.1),
            format!("seed={}", self.seed),
            format!("size={}", self.size),
            format!("solver={}", self.solver.name()),
            format!("task={}", self.task.name()),
        ];
        if let Some(dict) = &self.dict {
            lines.push(format!("dict={}", dict.display()));
        }
        if let Some(image) = &self.image {
            lines.push(format!("image={}", image.display()));
        }
        if let Some(grid) = &self.grid_lambda {
            lines.push(format!("grid_lambda={}", float_list(grid)));
        }
        if let Some(grid) = &self.grid_a {
            lines.push(format!("grid_a={}", float_list(grid)));
        }
        if let Some(grid) = &self.grid_c {
            lines.push(format!("grid_c={}", float_list(grid)));
        }
        lines.sort();
        lines
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
