//! Observational, experimental and mediator probability tables.
//!
//! Binary treatment and outcome use value `1` for the named event (`x`, `y`)
//! and `0` for its complement (`x'`, `y'`). Joint tables are row-major over
//! their variable list, last variable fastest.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for normalization and total-probability checks.
pub const NORM_TOL: f64 = 1e-9;
/// Tolerance for consistency between observational and experimental data.
pub const COHERENCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TableError {
    #[error("table has {got} entries, variables imply {expected}")]
    Shape { expected: usize, got: usize },
    #[error("{what} = {value} is not a probability")]
    OutOfRange { what: String, value: f64 },
    #[error("{what} sums to {sum}, expected 1")]
    NotNormalized { what: String, sum: f64 },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` listed twice")]
    DuplicateVariable(String),
    #[error("value {value} out of range for `{name}` (cardinality {card})")]
    BadValue { name: String, value: usize, card: usize },
    #[error("variable `{name}` must be binary")]
    NotBinary { name: String },
    #[error("undefined conditional: event {0} has zero mass")]
    ZeroMass(String),
    #[error("zero-mass cell {0}")]
    ZeroCell(String),
    #[error("{what}: strata give {from_strata}, table states {stated}")]
    TotalProbability { what: String, from_strata: f64, stated: f64 },
    #[error("incoherent observational and experimental data: {0}")]
    Incoherent(String),
    #[error("variable `{0}` used in two roles")]
    Overlap(String),
    #[error("empty count table")]
    EmptyCounts,
    #[error("invalid table JSON: {0}")]
    Json(String),
}

/// Streaming Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

fn check_probability(what: impl FnOnce() -> String, value: f64) -> Result<(), TableError> {
    if value.is_finite() && (-NORM_TOL..=1.0 + NORM_TOL).contains(&value) {
        Ok(())
    } else {
        Err(TableError::OutOfRange { what: what(), value })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub card: usize,
}

impl Variable {
    pub fn new(name: impl Into<String>, card: usize) -> Self {
        Variable { name: name.into(), card }
    }
}

/// Masses of the four `(X, Y)` cells. Either a full joint (summing to 1) or
/// the slice `P(z, X, Y)` of one covariate stratum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointXY {
    /// `P(x, y)`
    pub xy: f64,
    /// `P(x, y')`
    pub x_yprime: f64,
    /// `P(x', y)`
    pub xprime_y: f64,
    /// `P(x', y')`
    pub xprime_yprime: f64,
}

impl JointXY {
    pub fn new(xy: f64, x_yprime: f64, xprime_y: f64, xprime_yprime: f64) -> Self {
        JointXY { xy, x_yprime, xprime_y, xprime_yprime }
    }

    /// Joint implied by `P(x)`, `P(y|x)` and `P(y|x')`.
    pub fn from_conditionals(p_x: f64, p_y_given_x: f64, p_y_given_xprime: f64) -> Self {
        let p_xp = 1.0 - p_x;
        JointXY::new(p_x * p_y_given_x, p_x * (1.0 - p_y_given_x), p_xp * p_y_given_xprime, p_xp * (1.0 - p_y_given_xprime))
    }

    pub fn total(&self) -> f64 {
        compensated_sum([self.xy, self.x_yprime, self.xprime_y, self.xprime_yprime])
    }

    pub fn p_x(&self) -> f64 {
        self.xy + self.x_yprime
    }

    pub fn p_xprime(&self) -> f64 {
        self.xprime_y + self.xprime_yprime
    }

    pub fn p_y(&self) -> f64 {
        self.xy + self.xprime_y
    }

    /// `P(y | x)`, `None` when `P(x) = 0`.
    pub fn y_given_x(&self) -> Option<f64> {
        let px = self.p_x();
        (px > 0.0).then(|| self.xy / px)
    }

    /// `P(y | x')`, `None` when `P(x') = 0`.
    pub fn y_given_xprime(&self) -> Option<f64> {
        let pxp = self.p_xprime();
        (pxp > 0.0).then(|| self.xprime_y / pxp)
    }

    /// Rescaled to sum to one; `None` for an empty slice.
    pub fn normalized(&self) -> Option<JointXY> {
        let t = self.total();
        (t > 0.0).then(|| JointXY::new(self.xy / t, self.x_yprime / t, self.xprime_y / t, self.xprime_yprime / t))
    }

    /// Exchange `x <-> x'` and `y <-> y'`.
    pub fn relabeled(&self) -> JointXY {
        JointXY::new(self.xprime_yprime, self.xprime_y, self.x_yprime, self.xy)
    }

    /// Add `mass` to cell `(x, y)` (1 = x or y, 0 = x' or y').
    pub fn add_mass(&mut self, x: usize, y: usize, mass: f64) {
        match (x, y) {
            (1, 1) => self.xy += mass,
            (1, _) => self.x_yprime += mass,
            (_, 1) => self.xprime_y += mass,
            _ => self.xprime_yprime += mass,
        }
    }
}

/// Interventional outcome probabilities `P(y_x)` and `P(y_{x'})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Effects {
    pub p_y_do_x: f64,
    pub p_y_do_xprime: f64,
}

impl Effects {
    pub fn new(p_y_do_x: f64, p_y_do_xprime: f64) -> Self {
        Effects { p_y_do_x, p_y_do_xprime }
    }

    /// Effects of the problem with `x <-> x'` and `y <-> y'` exchanged.
    pub fn relabeled(&self) -> Effects {
        Effects::new(1.0 - self.p_y_do_xprime, 1.0 - self.p_y_do_x)
    }
}

/// Consistency between experimental and observational data:
/// `P(x,y) <= P(y_x) <= P(x,y) + P(x')` and the mirror condition for `x'`.
pub fn check_coherence(effects: &Effects, joint: &JointXY) -> Result<(), TableError> {
    let checks = [
        ("P(y_x)", effects.p_y_do_x, joint.xy, joint.xy + joint.p_xprime()),
        ("P(y_x')", effects.p_y_do_xprime, joint.xprime_y, joint.xprime_y + joint.p_x()),
    ];
    for (what, value, lo, hi) in checks {
        if value < lo - COHERENCE_TOL || value > hi + COHERENCE_TOL {
            return Err(TableError::Incoherent(format!("{what} = {value:.6} outside the range [{lo:.6}, {hi:.6}] implied by the observational joint")));
        }
    }
    Ok(())
}

/// A joint probability table over a list of discrete variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationalTable {
    vars: Vec<Variable>,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ObservationalSpec {
    variables: Vec<Variable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    probabilities: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    counts: Option<Vec<f64>>,
}

impl ObservationalTable {
    pub fn new(vars: Vec<Variable>, probs: Vec<f64>) -> Result<Self, TableError> {
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].iter().any(|w| w.name == v.name) {
                return Err(TableError::DuplicateVariable(v.name.clone()));
            }
        }
        let expected: usize = vars.iter().map(|v| v.card).product();
        if probs.len() != expected {
            return Err(TableError::Shape { expected, got: probs.len() });
        }
        for (i, &p) in probs.iter().enumerate() {
            check_probability(|| format!("entry {i}"), p)?;
        }
        let sum = compensated_sum(probs.iter().copied());
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(TableError::NotNormalized { what: "observational table".into(), sum });
        }
        let probs = probs.into_iter().map(|p| p.clamp(0.0, 1.0)).collect();
        Ok(ObservationalTable { vars, probs })
    }

    /// Normalize non-negative counts into a table.
    pub fn from_counts(vars: Vec<Variable>, counts: &[f64]) -> Result<Self, TableError> {
        if let Some((i, &c)) = counts.iter().enumerate().find(|(_, c)| !(c.is_finite() && **c >= 0.0)) {
            return Err(TableError::OutOfRange { what: format!("count {i}"), value: c });
        }
        let total = compensated_sum(counts.iter().copied());
        if total <= 0.0 {
            return Err(TableError::EmptyCounts);
        }
        Self::new(vars, counts.iter().map(|c| c / total).collect())
    }

    pub fn from_json(text: &str) -> Result<Self, TableError> {
        let spec: ObservationalSpec = serde_json::from_str(text).map_err(|e| TableError::Json(e.to_string()))?;
        Self::from_spec(spec)
    }

    fn from_spec(spec: ObservationalSpec) -> Result<Self, TableError> {
        match (spec.probabilities, spec.counts) {
            (Some(p), None) => Self::new(spec.variables, p),
            (None, Some(c)) => Self::from_counts(spec.variables, &c),
            _ => Err(TableError::Json("exactly one of `probabilities` or `counts` is required".into())),
        }
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn position(&self, name: &str) -> Result<usize, TableError> {
        self.vars.iter().position(|v| v.name == name).ok_or_else(|| TableError::UnknownVariable(name.to_string()))
    }

    fn positions(&self, names: &[&str]) -> Result<Vec<usize>, TableError> {
        let pos: Vec<usize> = names.iter().map(|n| self.position(n)).collect::<Result<_, _>>()?;
        for (i, p) in pos.iter().enumerate() {
            if pos[..i].contains(p) {
                return Err(TableError::DuplicateVariable(names[i].to_string()));
            }
        }
        Ok(pos)
    }

    /// Visit `(assignment, mass)` for every cell in storage order.
    fn for_each_cell(&self, mut f: impl FnMut(&[usize], f64)) {
        let mut assign = vec![0usize; self.vars.len()];
        for &p in &self.probs {
            f(&assign, p);
            for k in (0..assign.len()).rev() {
                assign[k] += 1;
                if assign[k] < self.vars[k].card {
                    break;
                }
                assign[k] = 0;
            }
        }
    }

    fn compound_index(&self, assign: &[usize], pos: &[usize]) -> usize {
        pos.iter().fold(0, |acc, &p| acc * self.vars[p].card + assign[p])
    }

    fn check_event(&self, event: &[(&str, usize)]) -> Result<Vec<(usize, usize)>, TableError> {
        let names: Vec<&str> = event.iter().map(|(n, _)| *n).collect();
        let pos = self.positions(&names)?;
        pos.into_iter()
            .zip(event)
            .map(|(p, &(name, value))| {
                let card = self.vars[p].card;
                if value >= card {
                    Err(TableError::BadValue { name: name.to_string(), value, card })
                } else {
                    Ok((p, value))
                }
            })
            .collect()
    }

    /// Sum out every variable not in `vars`; result ordered as `vars`.
    pub fn marginal(&self, vars: &[&str]) -> Result<ObservationalTable, TableError> {
        let pos = self.positions(vars)?;
        let out_vars: Vec<Variable> = pos.iter().map(|&p| self.vars[p].clone()).collect();
        let size: usize = out_vars.iter().map(|v| v.card).product();
        let mut buckets = vec![CompensatedSum::default(); size];
        self.for_each_cell(|assign, p| buckets[self.compound_index(assign, &pos)].add(p));
        let probs = buckets.iter().map(CompensatedSum::value).collect();
        Ok(ObservationalTable { vars: out_vars, probs })
    }

    /// Mass of a partial assignment.
    pub fn prob(&self, event: &[(&str, usize)]) -> Result<f64, TableError> {
        let ev = self.check_event(event)?;
        let mut acc = CompensatedSum::default();
        self.for_each_cell(|a, p| {
            if ev.iter().all(|&(q, v)| a[q] == v) {
                acc.add(p);
            }
        });
        Ok(acc.value())
    }

    /// Distribution of `target` given a partial assignment.
    pub fn conditional(&self, target: &[&str], given: &[(&str, usize)]) -> Result<ObservationalTable, TableError> {
        let ev = self.check_event(given)?;
        let tpos = self.positions(target)?;
        if let Some(&(p, _)) = ev.iter().find(|(p, _)| tpos.contains(p)) {
            return Err(TableError::Overlap(self.vars[p].name.clone()));
        }
        let mass = self.prob(given)?;
        if mass <= 0.0 {
            return Err(TableError::ZeroMass(describe_event(given)));
        }
        let out_vars: Vec<Variable> = tpos.iter().map(|&p| self.vars[p].clone()).collect();
        let size: usize = out_vars.iter().map(|v| v.card).product();
        let mut buckets = vec![CompensatedSum::default(); size];
        self.for_each_cell(|a, p| {
            if ev.iter().all(|&(q, v)| a[q] == v) {
                buckets[self.compound_index(a, &tpos)].add(p);
            }
        });
        let probs = buckets.iter().map(|b| (b.value() / mass).clamp(0.0, 1.0)).collect();
        Ok(ObservationalTable { vars: out_vars, probs })
    }

    fn binary_positions(&self, x: &str, y: &str) -> Result<(usize, usize), TableError> {
        let (px, py) = (self.position(x)?, self.position(y)?);
        if px == py {
            return Err(TableError::Overlap(x.to_string()));
        }
        for p in [px, py] {
            if self.vars[p].card != 2 {
                return Err(TableError::NotBinary { name: self.vars[p].name.clone() });
            }
        }
        Ok((px, py))
    }

    /// The `(X, Y)` marginal.
    pub fn joint_xy(&self, x: &str, y: &str) -> Result<JointXY, TableError> {
        Ok(compensated_joint(self.strata(x, y, &[])?.into_iter()))
    }

    /// `P(z, X, Y)` for every compound value of `z` (row-major over `z`),
    /// computed in a single pass over the table.
    pub fn strata(&self, x: &str, y: &str, z: &[&str]) -> Result<Vec<JointXY>, TableError> {
        let (px, py) = self.binary_positions(x, y)?;
        let zpos = self.positions(z)?;
        if let Some(&p) = zpos.iter().find(|&&p| p == px || p == py) {
            return Err(TableError::Overlap(self.vars[p].name.clone()));
        }
        let size: usize = zpos.iter().map(|&p| self.vars[p].card).product();
        let mut cells = vec![[CompensatedSum::default(); 4]; size];
        self.for_each_cell(|a, p| cells[self.compound_index(a, &zpos)][a[px] * 2 + a[py]].add(p));
        Ok(cells
            .iter()
            .map(|[xpyp, xpy, xyp, xy]| JointXY::new(xy.value(), xyp.value(), xpy.value(), xpyp.value()))
            .collect())
    }

    /// Back-door adjustment: `P(y_x) = Σ_z P(y|x,z) P(z)`, likewise for `x'`,
    /// with strata rows `P(y_x|z) = P(y|x,z)`. Strata with `P(z) = 0` are kept
    /// with zero weight and zero conditionals.
    pub fn adjustment_formula(&self, x: &str, y: &str, z: &[&str]) -> Result<ExperimentalTable, TableError> {
        let cells = self.strata(x, y, z)?;
        let zpos = self.positions(z)?;
        let mut strata = Vec::with_capacity(cells.len());
        for (k, cell) in cells.iter().enumerate() {
            let p_z = cell.total();
            let (a, b) = if p_z > 0.0 {
                let a = cell.y_given_x().ok_or_else(|| TableError::ZeroCell(self.describe_cell(x, 1, &zpos, k)))?;
                let b = cell.y_given_xprime().ok_or_else(|| TableError::ZeroCell(self.describe_cell(x, 0, &zpos, k)))?;
                (a, b)
            } else {
                (0.0, 0.0)
            };
            strata.push(Stratum { value: k, label: None, p_z, p_y_do_x: a, p_y_do_xprime: b });
        }
        ExperimentalTable::from_strata(z.iter().map(|s| s.to_string()).collect(), strata)
    }

    /// Human-readable `(X=x, Z1=0, Z2=1)` label of compound stratum `k`.
    pub(crate) fn describe_cell(&self, x: &str, xv: usize, zpos: &[usize], k: usize) -> String {
        let mut parts = vec![format!("{x}={xv}")];
        let mut rest = k;
        let mut vals = vec![0; zpos.len()];
        for (i, &p) in zpos.iter().enumerate().rev() {
            vals[i] = rest % self.vars[p].card;
            rest /= self.vars[p].card;
        }
        for (&p, v) in zpos.iter().zip(vals) {
            parts.push(format!("{}={v}", self.vars[p].name));
        }
        format!("({})", parts.join(", "))
    }

    /// Cardinality of the compound variable formed by `z`.
    pub fn compound_card(&self, z: &[&str]) -> Result<usize, TableError> {
        Ok(self.positions(z)?.iter().map(|&p| self.vars[p].card).product())
    }
}

fn compensated_joint(cells: impl Iterator<Item = JointXY>) -> JointXY {
    let cells: Vec<JointXY> = cells.collect();
    JointXY::new(
        compensated_sum(cells.iter().map(|c| c.xy)),
        compensated_sum(cells.iter().map(|c| c.x_yprime)),
        compensated_sum(cells.iter().map(|c| c.xprime_y)),
        compensated_sum(cells.iter().map(|c| c.xprime_yprime)),
    )
}

fn describe_event(event: &[(&str, usize)]) -> String {
    let parts: Vec<String> = event.iter().map(|(n, v)| format!("{n}={v}")).collect();
    format!("({})", parts.join(", "))
}

impl Serialize for ObservationalTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ObservationalSpec { variables: self.vars.clone(), probabilities: Some(self.probs.clone()), counts: None }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ObservationalTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        ObservationalTable::from_spec(ObservationalSpec::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Experimental data for one covariate stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    /// Compound covariate value (row-major over the table's covariates).
    #[serde(rename = "z")]
    pub value: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub p_z: f64,
    /// `P(y_x | z)`
    pub p_y_do_x: f64,
    /// `P(y_{x'} | z)`
    pub p_y_do_xprime: f64,
}

impl Stratum {
    pub fn effects(&self) -> Effects {
        Effects::new(self.p_y_do_x, self.p_y_do_xprime)
    }

    /// Matches either the label or the numeric value.
    pub fn matches(&self, key: &str) -> bool {
        self.label.as_deref() == Some(key) || key.parse::<usize>().ok() == Some(self.value)
    }

    pub fn name(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.value.to_string())
    }
}

/// Interventional quantities, optionally stratified by a covariate set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentalTable {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub covariates: Vec<String>,
    pub p_y_do_x: f64,
    pub p_y_do_xprime: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub strata: Vec<Stratum>,
}

#[derive(Deserialize)]
struct ExperimentalSpec {
    #[serde(default)]
    covariates: Vec<String>,
    p_y_do_x: Option<f64>,
    p_y_do_xprime: Option<f64>,
    #[serde(default)]
    strata: Vec<Stratum>,
}

impl ExperimentalTable {
    /// Unstratified experimental data.
    pub fn new(p_y_do_x: f64, p_y_do_xprime: f64) -> Result<Self, TableError> {
        Self::with_strata(Vec::new(), p_y_do_x, p_y_do_xprime, Vec::new())
    }

    /// Totals derived from the strata by the law of total probability.
    pub fn from_strata(covariates: Vec<String>, strata: Vec<Stratum>) -> Result<Self, TableError> {
        let a = compensated_sum(strata.iter().map(|s| s.p_z * s.p_y_do_x));
        let b = compensated_sum(strata.iter().map(|s| s.p_z * s.p_y_do_xprime));
        Self::with_strata(covariates, a.clamp(0.0, 1.0), b.clamp(0.0, 1.0), strata)
    }

    pub fn with_strata(covariates: Vec<String>, p_y_do_x: f64, p_y_do_xprime: f64, strata: Vec<Stratum>) -> Result<Self, TableError> {
        check_probability(|| "P(y_x)".into(), p_y_do_x)?;
        check_probability(|| "P(y_x')".into(), p_y_do_xprime)?;
        if !strata.is_empty() {
            for s in &strata {
                check_probability(|| format!("P(z={})", s.name()), s.p_z)?;
                check_probability(|| format!("P(y_x|z={})", s.name()), s.p_y_do_x)?;
                check_probability(|| format!("P(y_x'|z={})", s.name()), s.p_y_do_xprime)?;
            }
            let total = compensated_sum(strata.iter().map(|s| s.p_z));
            if (total - 1.0).abs() > NORM_TOL {
                return Err(TableError::NotNormalized { what: "stratum weights P(z)".into(), sum: total });
            }
            let a = compensated_sum(strata.iter().map(|s| s.p_z * s.p_y_do_x));
            if (a - p_y_do_x).abs() > NORM_TOL {
                return Err(TableError::TotalProbability { what: "P(y_x)".into(), from_strata: a, stated: p_y_do_x });
            }
            let b = compensated_sum(strata.iter().map(|s| s.p_z * s.p_y_do_xprime));
            if (b - p_y_do_xprime).abs() > NORM_TOL {
                return Err(TableError::TotalProbability { what: "P(y_x')".into(), from_strata: b, stated: p_y_do_xprime });
            }
        }
        Ok(ExperimentalTable { covariates, p_y_do_x: p_y_do_x.clamp(0.0, 1.0), p_y_do_xprime: p_y_do_xprime.clamp(0.0, 1.0), strata })
    }

    pub fn effects(&self) -> Effects {
        Effects::new(self.p_y_do_x, self.p_y_do_xprime)
    }

    pub fn is_stratified(&self) -> bool {
        !self.strata.is_empty()
    }

    pub fn stratum(&self, key: &str) -> Option<&Stratum> {
        self.strata.iter().find(|s| s.matches(key))
    }

    pub fn from_json(text: &str) -> Result<Self, TableError> {
        let spec: ExperimentalSpec = serde_json::from_str(text).map_err(|e| TableError::Json(e.to_string()))?;
        Self::from_spec(spec)
    }

    fn from_spec(spec: ExperimentalSpec) -> Result<Self, TableError> {
        match (spec.p_y_do_x, spec.p_y_do_xprime) {
            (Some(a), Some(b)) => Self::with_strata(spec.covariates, a, b, spec.strata),
            (None, None) if !spec.strata.is_empty() => Self::from_strata(spec.covariates, spec.strata),
            _ => Err(TableError::Json("give both `p_y_do_x` and `p_y_do_xprime`, or strata".into())),
        }
    }
}

impl<'de> Deserialize<'de> for ExperimentalTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        ExperimentalTable::from_spec(ExperimentalSpec::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Whether mediator responses are interventional `P(z_x)` or observational
/// `P(z|x)` stand-ins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MediatorSource {
    #[default]
    Experimental,
    Observational,
}

impl fmt::Display for MediatorSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MediatorSource::Experimental => "P(z_x)",
            MediatorSource::Observational => "P(z|x)",
        })
    }
}

/// Mediator response per treatment arm and outcome rates per mediator value.
/// Vectors are indexed by the compound mediator value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MediatorTables {
    pub mediators: Vec<String>,
    pub source: MediatorSource,
    /// `P(z_x)` for every mediator value `z`.
    pub p_z_do_x: Vec<f64>,
    /// `P(z_{x'})` for every mediator value `z`.
    pub p_z_do_xprime: Vec<f64>,
    /// `P(y | z)`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_y_given_z: Option<Vec<f64>>,
    /// `P(y | z, x)`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_y_given_z_x: Option<Vec<f64>>,
    /// `P(y | z, x')`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_y_given_z_xprime: Option<Vec<f64>>,
}

#[derive(Deserialize)]
struct MediatorSpec {
    #[serde(default)]
    mediators: Vec<String>,
    p_z_do_x: Option<Vec<f64>>,
    p_z_do_xprime: Option<Vec<f64>>,
    p_z_given_x: Option<Vec<f64>>,
    p_z_given_xprime: Option<Vec<f64>>,
    p_y_given_z: Option<Vec<f64>>,
    p_y_given_z_x: Option<Vec<f64>>,
    p_y_given_z_xprime: Option<Vec<f64>>,
}

impl MediatorTables {
    pub fn new(
        mediators: Vec<String>,
        source: MediatorSource,
        p_z_do_x: Vec<f64>,
        p_z_do_xprime: Vec<f64>,
        p_y_given_z: Option<Vec<f64>>,
        p_y_given_z_x: Option<Vec<f64>>,
        p_y_given_z_xprime: Option<Vec<f64>>,
    ) -> Result<Self, TableError> {
        let card = p_z_do_x.len();
        if card == 0 {
            return Err(TableError::Shape { expected: 1, got: 0 });
        }
        for (what, col) in [("P(z_x)", &p_z_do_x), ("P(z_x')", &p_z_do_xprime)] {
            if col.len() != card {
                return Err(TableError::Shape { expected: card, got: col.len() });
            }
            for (i, &p) in col.iter().enumerate() {
                check_probability(|| format!("{what}[{i}]"), p)?;
            }
            let sum = compensated_sum(col.iter().copied());
            if (sum - 1.0).abs() > NORM_TOL {
                return Err(TableError::NotNormalized { what: what.into(), sum });
            }
        }
        for (what, col) in [("P(y|z)", &p_y_given_z), ("P(y|z,x)", &p_y_given_z_x), ("P(y|z,x')", &p_y_given_z_xprime)] {
            if let Some(col) = col {
                if col.len() != card {
                    return Err(TableError::Shape { expected: card, got: col.len() });
                }
                for (i, &p) in col.iter().enumerate() {
                    check_probability(|| format!("{what}[{i}]"), p)?;
                }
            }
        }
        if p_y_given_z_x.is_some() != p_y_given_z_xprime.is_some() {
            return Err(TableError::Json("`p_y_given_z_x` and `p_y_given_z_xprime` must be given together".into()));
        }
        Ok(MediatorTables { mediators, source, p_z_do_x, p_z_do_xprime, p_y_given_z, p_y_given_z_x, p_y_given_z_xprime })
    }

    pub fn card(&self) -> usize {
        self.p_z_do_x.len()
    }

    /// `P(y|z,x)` and `P(y|z,x')` when given by arm.
    pub fn by_arm(&self) -> Option<(&[f64], &[f64])> {
        Some((self.p_y_given_z_x.as_deref()?, self.p_y_given_z_xprime.as_deref()?))
    }

    /// `P(y_x) = Σ_z P(y|z) P(z_x)`, valid when the mediator carries the whole
    /// effect and the mediator-outcome relation is unconfounded.
    pub fn implied_effects(&self) -> Option<Effects> {
        let py = self.p_y_given_z.as_ref()?;
        let a = compensated_sum(py.iter().zip(&self.p_z_do_x).map(|(y, z)| y * z));
        let b = compensated_sum(py.iter().zip(&self.p_z_do_xprime).map(|(y, z)| y * z));
        Some(Effects::new(a.clamp(0.0, 1.0), b.clamp(0.0, 1.0)))
    }

    pub fn from_json(text: &str) -> Result<Self, TableError> {
        let spec: MediatorSpec = serde_json::from_str(text).map_err(|e| TableError::Json(e.to_string()))?;
        Self::from_spec(spec)
    }

    fn from_spec(s: MediatorSpec) -> Result<Self, TableError> {
        let (source, zx, zxp) = match (s.p_z_do_x, s.p_z_do_xprime, s.p_z_given_x, s.p_z_given_xprime) {
            (Some(a), Some(b), None, None) => (MediatorSource::Experimental, a, b),
            (None, None, Some(a), Some(b)) => (MediatorSource::Observational, a, b),
            _ => return Err(TableError::Json("give either `p_z_do_x`/`p_z_do_xprime` or `p_z_given_x`/`p_z_given_xprime`".into())),
        };
        Self::new(s.mediators, source, zx, zxp, s.p_y_given_z, s.p_y_given_z_x, s.p_y_given_z_xprime)
    }
}

impl<'de> Deserialize<'de> for MediatorTables {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        MediatorTables::from_spec(MediatorSpec::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}
