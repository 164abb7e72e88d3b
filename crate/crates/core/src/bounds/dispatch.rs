use std::fmt::Write as _;

use serde::Serialize;

use crate::graph::{CausalDiagram, Eligibility};
use crate::tables::{Effects, ExperimentalTable, JointXY, MediatorSource, MediatorTables, ObservationalTable, Stratum};

use super::formulas::{self, StratumInput};
use super::{BoundsError, Estimand, EstimandSpec, Interval, Method, Term, CROSS_TOL};

/// Attribution tolerance: an endpoint within this of the best one counts as
/// a tie and is credited to the later (more structure-specific) method.
const TIE_TOL: f64 = 1e-12;

/// Everything known about one problem besides the diagram.
#[derive(Debug, Clone, Default)]
pub struct ProblemData {
    pub observational: Option<ObservationalTable>,
    pub experimental: Option<ExperimentalTable>,
    pub mediator: Option<MediatorTables>,
    /// Covariate (or mediator) set `Z`, in the order used by compound indices.
    pub covariates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub method: Method,
    pub interval: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skipped {
    pub method: Method,
    pub reason: String,
}

/// Result of [`compute`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub estimand: Estimand,
    pub method: Method,
    pub covariates: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stratum: Option<String>,
    pub lower: f64,
    pub upper: f64,
    pub binding_lower: Term,
    pub binding_upper: Term,
    pub lower_from: Method,
    pub upper_from: Method,
    pub components: Vec<Component>,
    pub skipped: Vec<Skipped>,
    pub notes: Vec<String>,
    pub eligibility: Eligibility,
}

impl BoundReport {
    pub fn interval(&self) -> Interval {
        Interval { lower: self.lower, upper: self.upper, binding_lower: self.binding_lower, binding_upper: self.binding_upper }
    }

    pub fn component(&self, method: Method) -> Option<&Interval> {
        self.components.iter().find(|c| c.method == method).map(|c| &c.interval)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `PNS in [0.0000, 0.0146]  (lower: tian_pearl/Zero, upper: thm2/BackDoorUpper)`
    pub fn summary(&self) -> String {
        format!(
            "{} in [{:.4}, {:.4}]  (lower: {}/{}, upper: {}/{})",
            self.estimand, self.lower, self.upper, self.lower_from, self.binding_lower, self.upper_from, self.binding_upper
        )
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.summary());
        if !self.covariates.is_empty() {
            let _ = writeln!(out, "covariates: {}", self.covariates.join(", "));
        }
        if let Some(s) = &self.stratum {
            let _ = writeln!(out, "stratum: {s}");
        }
        for c in &self.components {
            let _ = writeln!(out, "  {:<12} {}", c.method.as_str(), c.interval);
        }
        for s in &self.skipped {
            let _ = writeln!(out, "  {:<12} skipped: {}", s.method.as_str(), s.reason);
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}

struct Context<'a> {
    g: &'a CausalDiagram,
    data: &'a ProblemData,
    elig: Eligibility,
    effects: Option<Effects>,
    /// Per-stratum experimental rows, given or derived by adjustment.
    strata: Option<ExperimentalTable>,
    joint: Option<JointXY>,
    /// Unnormalized `P(z, X, Y)` per compound stratum.
    obs_cells: Option<Vec<JointXY>>,
    notes: Vec<String>,
}

impl<'a> Context<'a> {
    fn new(g: &'a CausalDiagram, data: &'a ProblemData) -> Result<Self, BoundsError> {
        let z: Vec<&str> = data.covariates.iter().map(String::as_str).collect();
        let elig = g.classify_covariates(&z)?;
        let (x, y) = (g.treatment_name(), g.outcome_name());
        let mut notes = Vec::new();

        if let Some(exp) = &data.experimental {
            if exp.is_stratified() && !exp.covariates.is_empty() && exp.covariates != data.covariates {
                return Err(BoundsError::InvalidSpec(format!(
                    "experimental strata are over {{{}}} but the covariate set is {{{}}}",
                    exp.covariates.join(", "),
                    data.covariates.join(", ")
                )));
            }
        }
        if let Some(med) = &data.mediator {
            if !med.mediators.is_empty() && med.mediators != data.covariates {
                return Err(BoundsError::InvalidSpec(format!(
                    "mediator tables are over {{{}}} but the covariate set is {{{}}}",
                    med.mediators.join(", "),
                    data.covariates.join(", ")
                )));
            }
        }

        let joint = data.observational.as_ref().map(|o| o.joint_xy(x, y)).transpose()?;
        let obs_cells = match &data.observational {
            Some(o) if !z.is_empty() && z.iter().all(|n| o.position(n).is_ok()) => Some(o.strata(x, y, &z)?),
            _ => None,
        };

        let mut strata = data.experimental.as_ref().filter(|e| e.is_stratified()).cloned();
        let mut effects = data.experimental.as_ref().map(|e| e.effects());

        if elig.thm2_backdoor.eligible && (effects.is_none() || strata.is_none()) {
            if let Some(o) = &data.observational {
                if z.iter().all(|n| o.position(n).is_ok()) {
                    let derived = o.adjustment_formula(x, y, &z)?;
                    if effects.is_none() {
                        notes.push(format!("P(y_x), P(y_x') obtained by back-door adjustment over {{{}}}", z.join(", ")));
                        effects = Some(derived.effects());
                    }
                    if strata.is_none() {
                        strata = Some(derived);
                    }
                }
            }
        }
        if effects.is_none() && elig.thm4_pure_mediator.eligible {
            if let Some(e) = data.mediator.as_ref().and_then(|m| m.implied_effects()) {
                notes.push("P(y_x), P(y_x') obtained as sum over z of P(y|z) P(z_x)".into());
                effects = Some(e);
            }
        }

        if let (Some(s), Some(cells)) = (&strata, &obs_cells) {
            if s.strata.iter().any(|r| r.value >= cells.len()) {
                return Err(BoundsError::InvalidSpec("stratum index exceeds the covariate cardinality".into()));
            }
        }

        Ok(Context { g, data, elig, effects, strata, joint, obs_cells, notes })
    }

    fn require_eligible(&self, method: Method) -> Result<(), BoundsError> {
        let Some(c) = method.criterion() else { return Ok(()) };
        let v = self.elig.verdict(c);
        if v.eligible {
            Ok(())
        } else {
            Err(BoundsError::Ineligible { method, reason: v.reason.clone() })
        }
    }

    fn effects(&self) -> Result<Effects, BoundsError> {
        self.effects.ok_or_else(|| BoundsError::MissingData("P(y_x) and P(y_x') are unavailable".into()))
    }

    fn joint(&self) -> Result<JointXY, BoundsError> {
        self.joint.ok_or_else(|| BoundsError::MissingData("observational P(X, Y) is required".into()))
    }

    fn strata(&self) -> Result<&ExperimentalTable, BoundsError> {
        self.strata
            .as_ref()
            .ok_or_else(|| BoundsError::MissingData("z-specific P(y_x|z), P(y_x'|z) are unavailable".into()))
    }

    fn obs_given(&self, s: &Stratum) -> Option<JointXY> {
        self.obs_cells.as_ref().and_then(|c| c.get(s.value)).and_then(|c| c.normalized())
    }

    fn stratum(&self, key: &str) -> Result<&Stratum, BoundsError> {
        let strata = self.strata()?;
        strata.stratum(key).ok_or_else(|| {
            let known: Vec<String> = strata.strata.iter().map(|s| s.name()).collect();
            BoundsError::InvalidSpec(format!("unknown stratum `{key}` (known: {})", known.join(", ")))
        })
    }

    /// Mediator tables usable for the requested bound, with the outcome
    /// columns arranged by arm for the partial-mediator case.
    fn mediator(&self, method: Method) -> Result<MediatorTables, BoundsError> {
        let med = self
            .data
            .mediator
            .as_ref()
            .ok_or_else(|| BoundsError::MissingData("mediator tables are required".into()))?;
        if med.source == MediatorSource::Observational {
            let x = self.g.treatment();
            for m in &self.data.covariates {
                let mi = self.g.node_index(m)?;
                if self.g.has_latent(x, mi) {
                    return Err(BoundsError::MissingData(format!(
                        "{} and {m} are confounded, so P({m}|{}) cannot stand in for the interventional P({m}_x)",
                        self.g.treatment_name(),
                        self.g.treatment_name()
                    )));
                }
            }
        }
        let mut med = med.clone();
        if method == Method::Thm3 && med.by_arm().is_none() {
            match &med.p_y_given_z {
                Some(py) if !self.g.has_edge(self.g.treatment(), self.g.outcome()) => {
                    med.p_y_given_z_x = Some(py.clone());
                    med.p_y_given_z_xprime = Some(py.clone());
                }
                _ => return Err(BoundsError::MissingData("P(y|z,x) and P(y|z,x') are required for the partial-mediator bound".into())),
            }
        }
        Ok(med)
    }

    fn run(&self, estimand: Estimand, method: Method, stratum: Option<&str>) -> Result<Interval, BoundsError> {
        self.require_eligible(method)?;
        match (estimand, method) {
            (Estimand::Pns, Method::TianPearl) => formulas::pns_tian_pearl(&self.effects()?, self.joint.as_ref()),
            (Estimand::Pn, Method::TianPearl) => formulas::pn_tian_pearl(&self.effects()?, &self.joint()?),
            (Estimand::Ps, Method::TianPearl) => formulas::ps_tian_pearl(&self.effects()?, &self.joint()?),
            (est, Method::Conditional) => {
                let key = stratum.ok_or_else(|| BoundsError::InvalidSpec("conditional bounds need a stratum".into()))?;
                let s = self.stratum(key)?;
                let obs = self.obs_given(s);
                match est {
                    Estimand::Pns => formulas::pns_conditional(s, obs.as_ref()),
                    Estimand::Pn | Estimand::Ps => {
                        if s.p_z <= 0.0 {
                            return Err(BoundsError::Undefined(format!("stratum {} has zero probability", s.name())));
                        }
                        let obs = obs.ok_or_else(|| BoundsError::MissingData("observational P(X, Y | z) is required".into()))?;
                        if est == Estimand::Pn {
                            formulas::pn_tian_pearl(&s.effects(), &obs)
                        } else {
                            formulas::ps_tian_pearl(&s.effects(), &obs)
                        }
                    }
                }
            }
            (Estimand::Pns, Method::Thm1) => {
                let rows: Vec<StratumInput> = self
                    .strata()?
                    .strata
                    .iter()
                    .map(|s| StratumInput { weight: s.p_z, effects: s.effects(), obs: self.obs_given(s) })
                    .collect();
                formulas::pns_thm1(&rows)
            }
            (Estimand::Pns, Method::Thm2) => {
                let cells = self
                    .obs_cells
                    .as_ref()
                    .ok_or_else(|| BoundsError::MissingData("observational P(z, X, Y) is required".into()))?;
                let obs = self.data.observational.as_ref().expect("cells imply a table");
                let z: Vec<&str> = self.data.covariates.iter().map(String::as_str).collect();
                if cells.iter().all(|c| c.total() <= 0.0 || (c.p_x() > 0.0 && c.p_xprime() > 0.0)) {
                    formulas::pns_backdoor(cells)
                } else {
                    formulas::pns_thm2(obs, self.g.treatment_name(), self.g.outcome_name(), &z)
                }
            }
            (Estimand::Pns, Method::Thm3) => formulas::pns_thm3(&self.effects()?, self.joint.as_ref(), &self.mediator(Method::Thm3)?),
            (Estimand::Pns, Method::Thm4) => formulas::pns_thm4(&self.effects()?, self.joint.as_ref(), &self.mediator(Method::Thm4)?),
            (est, m) => Err(BoundsError::InvalidSpec(format!("{est} has no {m} bound"))),
        }
    }
}

/// Bound `spec.estimand` for diagram `g` and data `data`.
///
/// A specific method fails if its graphical precondition does not hold or its
/// inputs are missing. `Method::Auto` evaluates every eligible method with the
/// data it needs and intersects the intervals; structurally valid bounds all
/// contain the true value, so their intersection does too.
pub fn compute(g: &CausalDiagram, data: &ProblemData, spec: &EstimandSpec) -> Result<BoundReport, BoundsError> {
    spec.validate()?;
    let ctx = Context::new(g, data)?;
    let stratum = spec.stratum.as_deref();

    let candidates: Vec<Method> = match (spec.method, spec.estimand, stratum) {
        (Method::Auto, _, Some(_)) => vec![Method::Conditional],
        (Method::Auto, Estimand::Pns, None) => vec![Method::TianPearl, Method::Thm1, Method::Thm2, Method::Thm3, Method::Thm4],
        (Method::Auto, _, None) => vec![Method::TianPearl],
        (m, _, _) => vec![m],
    };

    let mut components = Vec::new();
    let mut skipped = Vec::new();
    let mut first_error = None;
    for &m in &candidates {
        match ctx.run(spec.estimand, m, stratum) {
            Ok(interval) => components.push(Component { method: m, interval }),
            Err(e @ (BoundsError::Ineligible { .. } | BoundsError::MissingData(_))) if spec.method == Method::Auto => {
                skipped.push(Skipped { method: m, reason: e.to_string() });
                first_error.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    if components.is_empty() {
        return Err(first_error.unwrap_or_else(|| BoundsError::MissingData("no applicable bound".into())));
    }

    let mut lo = &components[0];
    let mut hi = &components[0];
    let (mut lower, mut upper) = (lo.interval.lower, hi.interval.upper);
    for c in &components[1..] {
        if c.interval.lower >= lower - TIE_TOL {
            lo = c;
        }
        if c.interval.upper <= upper + TIE_TOL {
            hi = c;
        }
        lower = lower.max(c.interval.lower);
        upper = upper.min(c.interval.upper);
    }
    if lower > upper + CROSS_TOL {
        return Err(BoundsError::Incoherent { lower, upper, lower_term: lo.interval.binding_lower, upper_term: hi.interval.binding_upper });
    }

    Ok(BoundReport {
        estimand: spec.estimand,
        method: spec.method,
        covariates: data.covariates.clone(),
        stratum: spec.stratum.clone(),
        lower: lower.min(upper),
        upper,
        binding_lower: lo.interval.binding_lower,
        binding_upper: hi.interval.binding_upper,
        lower_from: lo.method,
        upper_from: hi.method,
        components,
        skipped,
        notes: ctx.notes,
        eligibility: ctx.elig,
    })
}
