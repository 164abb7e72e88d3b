//! Problem files: a diagram, whatever data are available, and what to bound.
//!
//! ```json
//! {
//!   "name": "drug",
//!   "preset": "fig1a",
//!   "covariates": ["Z"],
//!   "observational": { "variables": [...], "counts": [...] },
//!   "estimand": "pns",
//!   "method": "auto"
//! }
//! ```
//!
//! The diagram is given inline as `diagram` (the graph JSON schema) or by
//! `preset` name. At least one of `observational`, `experimental` and
//! `mediator` must be present.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::bounds::{BoundsError, Estimand, EstimandSpec, Method, ProblemData};
use crate::graph::{CausalDiagram, DiagramSpec, GraphError};
use crate::presets;
use crate::tables::{ExperimentalTable, MediatorTables, ObservationalTable};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid problem file: {0}")]
    Parse(String),
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

fn default_estimand() -> Estimand {
    Estimand::Pns
}

fn default_method() -> Method {
    Method::Auto
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub diagram: Option<DiagramSpec>,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default)]
    pub observational: Option<ObservationalTable>,
    #[serde(default)]
    pub experimental: Option<ExperimentalTable>,
    #[serde(default)]
    pub mediator: Option<MediatorTables>,
    #[serde(default = "default_estimand")]
    pub estimand: Estimand,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub stratum: Option<String>,
}

/// A validated problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub description: Option<String>,
    pub graph: CausalDiagram,
    pub data: ProblemData,
    pub spec: EstimandSpec,
}

impl Problem {
    pub fn from_json(text: &str) -> Result<Problem, ProblemError> {
        let file: ProblemFile = serde_json::from_str(text).map_err(|e| ProblemError::Parse(e.to_string()))?;
        file.validate()
    }

    pub fn load(path: &Path) -> Result<Problem, ProblemError> {
        let text = std::fs::read_to_string(path).map_err(|e| ProblemError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text)
    }

    /// Compute with the problem's own estimand, method and stratum.
    pub fn solve(&self) -> Result<crate::bounds::BoundReport, BoundsError> {
        crate::bounds::compute(&self.graph, &self.data, &self.spec)
    }
}

impl ProblemFile {
    pub fn validate(self) -> Result<Problem, ProblemError> {
        let graph = match (self.diagram, self.preset.as_deref()) {
            (Some(spec), None) => CausalDiagram::new(spec)?,
            (None, Some(name)) => presets::by_name(name).ok_or_else(|| ProblemError::Invalid(format!("unknown preset `{name}`")))?,
            (Some(_), Some(_)) => return Err(ProblemError::Invalid("give either `diagram` or `preset`, not both".into())),
            (None, None) => return Err(ProblemError::Invalid("a `diagram` or `preset` is required".into())),
        };
        if self.observational.is_none() && self.experimental.is_none() && self.mediator.is_none() {
            return Err(ProblemError::Invalid("at least one of `observational`, `experimental`, `mediator` is required".into()));
        }
        for c in &self.covariates {
            graph.node_index(c)?;
        }
        if let Some(obs) = &self.observational {
            for v in obs.variables() {
                let i = graph.node_index(&v.name)?;
                if graph.card(i) != v.card {
                    return Err(ProblemError::Invalid(format!(
                        "`{}` has cardinality {} in the table but {} in the diagram",
                        v.name,
                        v.card,
                        graph.card(i)
                    )));
                }
            }
            for role in [graph.treatment_name(), graph.outcome_name()] {
                if obs.position(role).is_err() {
                    return Err(ProblemError::Invalid(format!("the observational table lacks `{role}`")));
                }
            }
        }
        if let Some(exp) = &self.experimental {
            for c in &exp.covariates {
                graph.node_index(c)?;
            }
        }
        if let Some(med) = &self.mediator {
            for m in &med.mediators {
                graph.node_index(m)?;
            }
            let card: usize = self.covariates.iter().map(|c| graph.card(graph.node_index(c).expect("checked"))).product();
            if !self.covariates.is_empty() && card != med.card() {
                return Err(ProblemError::Invalid(format!("mediator tables have {} values, the covariate set has {card}", med.card())));
            }
        }
        let spec = EstimandSpec { estimand: self.estimand, method: self.method, stratum: self.stratum };
        Ok(Problem {
            name: self.name.unwrap_or_else(|| "problem".into()),
            description: self.description,
            graph,
            data: ProblemData { observational: self.observational, experimental: self.experimental, mediator: self.mediator, covariates: self.covariates },
            spec,
        })
    }
}

/// Problems shipped with the crate, by name.
pub fn bundled(name: &str) -> Option<&'static str> {
    Some(match name {
        "drug" => include_str!("../problems/drug.json"),
        "inflammation" => include_str!("../problems/inflammation.json"),
        "ancestry" => include_str!("../problems/ancestry.json"),
        "cointoss" => include_str!("../problems/cointoss.json"),
        _ => return None,
    })
}

pub const BUNDLED: [&str; 4] = ["drug", "inflammation", "ancestry", "cointoss"];
