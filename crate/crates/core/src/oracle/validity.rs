//! Seeded validity runs: random models per diagram family, every applicable
//! bound checked against the model's true value.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{compute, BoundsError, Estimand, EstimandSpec, Method};
use crate::graph::CausalDiagram;
use crate::presets;
use crate::rng::{substream, Purpose};

use super::{random_scm_with, OracleError, TypeSpace};

/// Slack allowed between a bound and the true value.
pub const VALIDITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Confounder: back-door and non-descendant covariate.
    Fig1a,
    /// Mediator with a direct effect and treatment-mediator confounding.
    Fig2,
    /// Pure mediator.
    Fig3,
    /// Two back-door covariates.
    Fig4,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Fig1a, Family::Fig2, Family::Fig3, Family::Fig4];

    pub fn id(self) -> &'static str {
        match self {
            Family::Fig1a => "fig1a",
            Family::Fig2 => "fig2",
            Family::Fig3 => "fig3",
            Family::Fig4 => "fig4",
        }
    }

    pub fn graph(self) -> CausalDiagram {
        match self {
            Family::Fig1a => presets::fig1a(),
            Family::Fig2 => presets::fig2(),
            Family::Fig3 => presets::fig3(),
            Family::Fig4 => presets::fig4(),
        }
    }

    pub fn covariates(self) -> &'static [&'static str] {
        match self {
            Family::Fig4 => &["Z1", "Z2"],
            _ => &["Z"],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL.into_iter().find(|f| f.id() == s).ok_or_else(|| format!("unknown family `{s}` (expected fig1a, fig2, fig3 or fig4)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityRow {
    pub seed: u64,
    pub graph: &'static str,
    pub estimand: Estimand,
    pub method: Method,
    pub lower: f64,
    #[serde(rename = "true")]
    pub truth: f64,
    pub upper: f64,
    pub violation: bool,
}

impl ValidityRow {
    /// Distance from the true value to the nearer endpoint; negative on a
    /// violation.
    pub fn margin(&self) -> f64 {
        (self.truth - self.lower).min(self.upper - self.truth)
    }
}

#[derive(Debug, Clone)]
pub struct ValidityReport {
    pub family: Family,
    pub samples: usize,
    pub rows: Vec<ValidityRow>,
    pub violations: usize,
    /// Smallest margin over all rows.
    pub worst_margin: f64,
    /// Samples breaking the complier property (pure-mediator family only).
    pub complier_failures: usize,
}

impl ValidityReport {
    pub fn summary(&self) -> String {
        let checks = self.rows.len();
        let mut s = format!(
            "{}: {} models, {checks} checks, {} violations, worst margin {:.4e}",
            self.family, self.samples, self.violations, self.worst_margin
        );
        if self.family == Family::Fig3 {
            s.push_str(&format!(", complier property failures {}", self.complier_failures));
        }
        s
    }

    /// Methods that were checked, with their row counts.
    pub fn methods(&self) -> Vec<(Estimand, Method, usize)> {
        let mut out: Vec<(Estimand, Method, usize)> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|(e, m, _)| *e == r.estimand && *m == r.method) {
                Some(entry) => entry.2 += 1,
                None => out.push((r.estimand, r.method, 1)),
            }
        }
        out
    }
}

fn sample(space: &std::sync::Arc<TypeSpace>, family: Family, master: u64, index: u64) -> Result<(Vec<ValidityRow>, bool), OracleError> {
    let g = space.graph();
    let mut rng = substream(master, Purpose::Scm, index);
    let model = random_scm_with(space, &mut rng);
    let obs = model.observables_of(family.covariates())?;
    let data = obs.problem_data();

    let mut rows = Vec::new();
    let mut push = |estimand: Estimand, method: Method, truth: f64| -> Result<(), OracleError> {
        let spec = EstimandSpec { estimand, method, stratum: None };
        match compute(g, &data, &spec) {
            Ok(r) => {
                let violation = r.lower > truth + VALIDITY_TOL || r.upper < truth - VALIDITY_TOL;
                rows.push(ValidityRow { seed: index, graph: family.id(), estimand, method, lower: r.lower, truth, upper: r.upper, violation });
                Ok(())
            }
            Err(BoundsError::Ineligible { .. } | BoundsError::MissingData(_)) => Ok(()),
            Err(e) => Err(e.into()),
        }
    };

    let pns = model.true_pns();
    for m in [Method::TianPearl, Method::Thm1, Method::Thm2, Method::Thm3, Method::Thm4, Method::Auto] {
        push(Estimand::Pns, m, pns)?;
    }
    if let Ok(pn) = model.true_pn() {
        push(Estimand::Pn, Method::TianPearl, pn)?;
    }
    if let Ok(ps) = model.true_ps() {
        push(Estimand::Ps, Method::TianPearl, ps)?;
    }
    let complier_ok = family != Family::Fig3 || model.complier_property_holds(family.covariates())?;
    Ok((rows, complier_ok))
}

/// Draw `n` models for `family` from `master_seed` and check every bound.
/// Sample `i` uses its own substream, so the report does not depend on
/// scheduling.
pub fn run_validity(family: Family, n: usize, master_seed: u64) -> Result<ValidityReport, OracleError> {
    let space = TypeSpace::new(&family.graph())?;
    let per_sample: Vec<(Vec<ValidityRow>, bool)> = (0..n as u64)
        .into_par_iter()
        .map(|i| sample(&space, family, master_seed, i).map_err(|e| OracleError::Sample { seed: i, source: Box::new(e) }))
        .collect::<Result<_, _>>()?;
    let complier_failures = per_sample.iter().filter(|(_, ok)| !ok).count();
    let rows: Vec<ValidityRow> = per_sample.into_iter().flat_map(|(r, _)| r).collect();
    let violations = rows.iter().filter(|r| r.violation).count();
    let worst_margin = rows.iter().map(ValidityRow::margin).fold(f64::INFINITY, f64::min);
    Ok(ValidityReport { family, samples: n, rows, violations, worst_margin, complier_failures })
}

/// CSV with columns `seed,graph,estimand,method,lower,true,upper,violation`.
pub fn write_validity_csv<W: Write>(rows: &[ValidityRow], out: W) -> Result<(), OracleError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| OracleError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| OracleError::Io(e.to_string()))
}
