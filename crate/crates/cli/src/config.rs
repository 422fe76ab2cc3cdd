//! Experiment configuration: a TOML file with one section per stage.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shockform_core::model::{Bound, HyperbolicSystem, PolynomialTerm};
use shockform_core::singularity::{EstimateOptions, TStarModel};
use shockform_core::solver::{Controls, Grid};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize configuration: {0}")]
    Serialize(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub initial: InitialCondition,
    pub grid: GridConfig,
    #[serde(default)]
    pub controls: ControlsConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Seed for synthetic data; the simulation itself is deterministic.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// `burgers`, `shallow_water`, `linear_advection` or `polynomial`.
    pub name: String,
    /// Advection speed for `linear_advection`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    /// Field names of a polynomial model.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<PolynomialTerm>,
    /// Lower bounds per field of a polynomial model.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lower_bounds: Vec<f64>,
}

impl ModelConfig {
    pub fn build(&self) -> Result<HyperbolicSystem, ConfigError> {
        match self.name.as_str() {
            "linear_advection" => {
                let speed = self.speed.unwrap_or(1.0);
                if !speed.is_finite() {
                    return Err(invalid("model.speed must be finite"));
                }
                Ok(HyperbolicSystem::linear_advection(speed))
            }
            "polynomial" => {
                if self.fields.is_empty() {
                    return Err(invalid("a polynomial model needs model.fields"));
                }
                let bounds = self
                    .lower_bounds
                    .iter()
                    .map(|&lo| Bound::at_least(lo))
                    .collect();
                HyperbolicSystem::polynomial("polynomial", self.fields.clone(), &self.terms, bounds)
                    .map_err(|e| invalid(e.to_string()))
            }
            name => HyperbolicSystem::builtin(name)
                .ok_or_else(|| invalid(format!("unknown model `{name}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Field `field` is `amplitude·sin(2π·wavenumber·x/L + phase)`, every
    /// other field is constant at its `background` value.
    Sinusoidal {
        amplitude: f64,
        wavenumber: u32,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        field: usize,
        /// One value per field; the entry of `field` is added to the sine.
        background: Vec<f64>,
    },
    Constant {
        values: Vec<f64>,
    },
    /// `values[i]` samples field `i` on the grid.
    Tabulated {
        values: Vec<Vec<f64>>,
    },
}

impl InitialCondition {
    pub fn sample(&self, grid: Grid, dimension: usize) -> Result<Vec<Vec<f64>>, ConfigError> {
        let n = grid.num_points;
        let check_len = |len: usize, what: &str| {
            if len == dimension {
                Ok(())
            } else {
                Err(invalid(format!(
                    "initial.{what} has {len} entries, the model has {dimension} fields"
                )))
            }
        };
        match self {
            Self::Sinusoidal {
                amplitude,
                wavenumber,
                phase,
                field,
                background,
            } => {
                check_len(background.len(), "background")?;
                if *field >= dimension {
                    return Err(invalid(format!("initial.field {field} is out of range")));
                }
                let mut fields: Vec<Vec<f64>> = background.iter().map(|&b| vec![b; n]).collect();
                let k = 2.0 * PI * *wavenumber as f64 / grid.domain_length;
                for (m, v) in fields[*field].iter_mut().enumerate() {
                    *v += amplitude * (k * grid.x(m) + phase).sin();
                }
                Ok(fields)
            }
            Self::Constant { values } => {
                check_len(values.len(), "values")?;
                Ok(values.iter().map(|&v| vec![v; n]).collect())
            }
            Self::Tabulated { values } => {
                check_len(values.len(), "values")?;
                if let Some(bad) = values.iter().find(|v| v.len() != n) {
                    return Err(invalid(format!(
                        "tabulated field has {} samples, grid has {n}",
                        bad.len()
                    )));
                }
                Ok(values.clone())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub num_points: usize,
    #[serde(default = "one")]
    pub domain_length: f64,
    /// Finest grid reachable by refinement; absent keeps the grid fixed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_points: Option<usize>,
}

fn one() -> f64 {
    1.0
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid, ConfigError> {
        Grid::new(self.num_points, self.domain_length).map_err(|e| invalid(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlsConfig {
    pub cfl_number: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blowup_threshold: Option<f64>,
    pub threshold_factor: f64,
    pub resolution_factor: f64,
    pub dt_floor: f64,
    pub max_time: f64,
    pub growth_limit: f64,
    /// A snapshot is kept each time the max slope grows by this factor.
    pub snapshot_ratio: f64,
}

impl Default for ControlsConfig {
    fn default() -> Self {
        let c = Controls::default();
        Self {
            cfl_number: c.cfl_number,
            blowup_threshold: c.blowup_threshold,
            threshold_factor: c.threshold_factor,
            resolution_factor: c.resolution_factor,
            dt_floor: c.dt_floor,
            max_time: c.max_time,
            growth_limit: c.growth_limit,
            snapshot_ratio: c.snapshot_ratio,
        }
    }
}

/// How the end of the converged regime is found.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffConfig {
    /// Rerun with the finest grid doubled and compare.
    #[default]
    Companion,
    SpectralTail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub cutoff: CutoffConfig,
    /// Largest relative difference to the companion run still counted as
    /// converged.
    pub companion_tolerance: f64,
    pub tail_tolerance: f64,
    /// Fit window width in decades of `t* − t`.
    pub window_decades: f64,
    pub t_star_model: TStarModel,
    pub max_jump_fraction: f64,
    pub xi_max: f64,
    /// Number of collapse snapshots, spread over `collapse_decades` before
    /// the end of the window.
    pub collapse_snapshots: usize,
    pub collapse_decades: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let e = EstimateOptions::default();
        Self {
            cutoff: CutoffConfig::Companion,
            companion_tolerance: 0.01,
            tail_tolerance: 1e-5,
            window_decades: e.decades,
            t_star_model: e.model,
            max_jump_fraction: e.max_jump_fraction,
            xi_max: shockform_core::similarity::DEFAULT_XI_MAX,
            collapse_snapshots: 3,
            collapse_decades: 1.0,
        }
    }
}

/// Which snapshot CSVs to write.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotOutput {
    None,
    /// The initial and final states and the collapse snapshots.
    #[default]
    Selected,
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub snapshots: SnapshotOutput,
    pub plots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            snapshots: SnapshotOutput::Selected,
            plots: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// TOML with keys sorted at every level.
    pub fn to_canonical_toml(&self) -> Result<String, ConfigError> {
        let value =
            toml::Value::try_from(self).map_err(|e| ConfigError::Serialize(e.to_string()))?;
        toml::to_string(&value).map_err(|e| ConfigError::Serialize(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let system = self.model.build()?;
        let grid = self.grid.build()?;
        if let Some(max) = self.grid.max_points {
            if !max.is_power_of_two() || max < self.grid.num_points {
                return Err(invalid(format!(
                    "grid.max_points must be a power of two >= num_points, got {max}"
                )));
            }
        }
        self.solver_controls()
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        let a = &self.analysis;
        let positive = [
            ("analysis.companion_tolerance", a.companion_tolerance),
            ("analysis.tail_tolerance", a.tail_tolerance),
            ("analysis.window_decades", a.window_decades),
            ("analysis.max_jump_fraction", a.max_jump_fraction),
            ("analysis.xi_max", a.xi_max),
            ("analysis.collapse_decades", a.collapse_decades),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if a.collapse_snapshots == 0 {
            return Err(invalid("analysis.collapse_snapshots must be at least 1"));
        }
        let fields = self.initial.sample(grid, system.dimension())?;
        for (i, f) in fields.iter().enumerate() {
            if let Some(v) = f.iter().find(|v| !v.is_finite()) {
                return Err(invalid(format!(
                    "initial field {i} has non-finite value {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn solver_controls(&self) -> Controls {
        let c = &self.controls;
        Controls {
            cfl_number: c.cfl_number,
            blowup_threshold: c.blowup_threshold,
            threshold_factor: c.threshold_factor,
            resolution_factor: c.resolution_factor,
            dt_floor: c.dt_floor,
            max_time: c.max_time,
            growth_limit: c.growth_limit,
            snapshot_ratio: c.snapshot_ratio,
            max_points: self.grid.max_points,
            ..Controls::default()
        }
    }

    pub fn estimate_options(&self) -> EstimateOptions {
        EstimateOptions {
            decades: self.analysis.window_decades,
            model: self.analysis.t_star_model,
            max_jump_fraction: self.analysis.max_jump_fraction,
            ..EstimateOptions::default()
        }
    }

    /// The same experiment with the finest grid doubled.
    pub fn companion(&self) -> Self {
        let mut c = self.clone();
        match c.grid.max_points {
            Some(max) => c.grid.max_points = Some(2 * max),
            None => c.grid.max_points = Some(2 * c.grid.num_points),
        }
        c
    }

    /// Replaces the grid size, keeping a refinement limit at least as fine.
    pub fn with_grid(mut self, num_points: usize) -> Self {
        self.grid.num_points = num_points;
        if let Some(max) = self.grid.max_points {
            self.grid.max_points = Some(max.max(num_points));
        }
        self
    }
}
