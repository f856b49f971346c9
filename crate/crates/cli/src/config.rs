//! Scenario files: a versioned JSON document with a list of tasks.

use gelfand_core::diagnostics::ExpansionReport;
use gelfand_core::hamiltonian::SearchSpec;
use gelfand_core::solver::{NewtonOptions, ProbeSpec};
use gelfand_core::{vec2, Domain, GreenBackend, Shape, Vec2, WeightSpec};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub domain: Shape,
    #[serde(default)]
    pub weight: WeightSpec,
    #[serde(default)]
    pub green_backend: GreenBackend,
    /// Grid nodes along the longer side of the bounding box.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub newton: NewtonOptions,
    pub tasks: Vec<Task>,
}

fn default_grid() -> usize {
    129
}

/// Blow-up points, given explicitly or as the best critical point of the
/// m-vortex Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct Points {
    pub points: Option<Vec<[f64; 2]>>,
    pub m: Option<usize>,
}

impl Points {
    pub fn explicit(&self) -> Option<Vec<Vec2>> {
        self.points.as_ref().map(|p| p.iter().map(|q| vec2(q[0], q[1])).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Task {
    /// `G` and `R` at every ordered pair of the listed points.
    GreenTable { points: Vec<[f64; 2]> },
    CriticalPoints {
        m: usize,
        #[serde(default)]
        search: SearchSpec,
    },
    /// Newton from the bubble ansatz of height `μ̂` at the ansatz `ε`.
    Solve {
        #[serde(default)]
        points: Option<Vec<[f64; 2]>>,
        #[serde(default)]
        m: Option<usize>,
        mu_hat: f64,
    },
    /// Continuation through prescribed peak heights `max w`.
    Continue {
        #[serde(default)]
        points: Option<Vec<[f64; 2]>>,
        #[serde(default)]
        m: Option<usize>,
        heights: Vec<f64>,
    },
    /// Continuation plus peak, error, expansion and spectrum reports per point.
    Diagnose {
        #[serde(default)]
        points: Option<Vec<[f64; 2]>>,
        #[serde(default)]
        m: Option<usize>,
        heights: Vec<f64>,
        #[serde(default)]
        spectrum: bool,
    },
    UniquenessProbe {
        #[serde(default)]
        points: Option<Vec<[f64; 2]>>,
        #[serde(default)]
        m: Option<usize>,
        height: f64,
        #[serde(default)]
        probe: ProbeSpec,
    },
    /// Diagnostics at the heights `2 log((1 + δ)/δ)`, one grid per `δ`.
    Sweep {
        #[serde(default)]
        points: Option<Vec<[f64; 2]>>,
        #[serde(default)]
        m: Option<usize>,
        deltas: Vec<f64>,
    },
}

impl Task {
    /// Where the blow-up points come from, for tasks that need them.
    pub fn at(&self) -> Option<Points> {
        match self {
            Task::Solve { points, m, .. }
            | Task::Continue { points, m, .. }
            | Task::Diagnose { points, m, .. }
            | Task::UniquenessProbe { points, m, .. }
            | Task::Sweep { points, m, .. } => Some(Points { points: points.clone(), m: *m }),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Task::GreenTable { .. } => "green-table",
            Task::CriticalPoints { .. } => "critical-points",
            Task::Solve { .. } => "solve",
            Task::Continue { .. } => "continue",
            Task::Diagnose { .. } => "diagnose",
            Task::UniquenessProbe { .. } => "uniqueness-probe",
            Task::Sweep { .. } => "sweep",
        }
    }
}

/// Schema violations: reported with exit status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct SchemaError(pub String);

pub fn parse(text: &str) -> Result<ScenarioConfig, SchemaError> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| SchemaError(format!("config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SchemaError> {
        let bad = |m: String| Err(SchemaError(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.tasks.is_empty() {
            return bad("the task list is empty".into());
        }
        Domain::new(self.domain.clone()).map_err(|e| SchemaError(e.to_string()))?;
        if self.grid < 33 {
            return bad(format!("grid {} is below 33 nodes", self.grid));
        }
        for (i, t) in self.tasks.iter().enumerate() {
            match t {
                Task::GreenTable { points } if points.is_empty() => return bad(format!("task {i}: no points")),
                Task::CriticalPoints { m: 0, .. } => return bad(format!("task {i}: m must be positive")),
                _ => {}
            }
            let Some(at) = t.at() else { continue };
            match (&at.points, at.m) {
                (Some(_), Some(_)) => return bad(format!("task {i}: give either points or m")),
                (Some(p), None) if p.is_empty() => return bad(format!("task {i}: no points")),
                (None, Some(0)) => return bad(format!("task {i}: m must be positive")),
                _ => {}
            }
            match t {
                Task::Continue { heights, .. } | Task::Diagnose { heights, .. } => {
                    if heights.is_empty() || heights.windows(2).any(|w| !(w[1] > w[0])) {
                        return bad(format!("task {i}: heights must be nonempty and strictly increasing"));
                    }
                }
                Task::Sweep { deltas, .. } => {
                    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) {
                        return bad(format!("task {i}: deltas must be positive"));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// `2 log((1 + δ)/δ)`, the peak height of the radial disk solution.
pub fn height_of_delta(delta: f64) -> f64 {
    2.0 * ((1.0 + delta) / delta).ln()
}

/// Fields of an expansion report flattened for tables.
pub fn ratio_or_nan(r: &ExpansionReport) -> f64 {
    r.ratio.unwrap_or(f64::NAN)
}
