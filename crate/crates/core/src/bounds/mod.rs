//! Bound formulas for PNS, PN and PS, and the dispatcher that combines them.
//!
//! Every formula is a `max` over lower-bound arguments and a `min` over
//! upper-bound arguments. The resulting [`Interval`] remembers which argument
//! was binding on each side, using the fixed labels of [`Term`].

mod dispatch;
mod formulas;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Criterion, GraphError};
use crate::tables::TableError;

pub use dispatch::{compute, BoundReport, Component, ProblemData, Skipped};
pub use formulas::{
    pn_tian_pearl, pns_backdoor, pns_conditional, pns_thm1, pns_thm2, pns_thm3, pns_thm4, pns_tian_pearl, ps_tian_pearl, StratumInput,
};

/// Crossing tolerance: `lower > upper + CROSS_TOL` is an incoherence error.
pub const CROSS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("incoherent inputs: lower bound {lower:.6} ({lower_term}) exceeds upper bound {upper:.6} ({upper_term})")]
    Incoherent { lower: f64, upper: f64, lower_term: Term, upper_term: Term },
    #[error("undefined estimand: {0}")]
    Undefined(String),
    #[error("missing data: {0}")]
    MissingData(String),
    #[error("method {method} is not applicable: {reason}")]
    Ineligible { method: Method, reason: String },
    #[error("invalid request: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl BoundsError {
    /// Incoherent data, as opposed to malformed input or an ineligible method.
    pub fn is_incoherent(&self) -> bool {
        matches!(self, BoundsError::Incoherent { .. } | BoundsError::Table(TableError::Incoherent(_)))
    }
}

/// Labels of the arguments inside each `max`/`min`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    Zero,
    One,
    /// `P(y_x) - P(y_{x'})`
    ExpDiff,
    /// `P(y) - P(y_{x'})`
    ObsLowerY,
    /// `P(y_x) - P(y)`
    ObsUpperY,
    /// `P(y_x)`
    ExpTreated,
    /// `P(y'_{x'})`
    ExpUntreatedFail,
    /// `P(x,y) + P(x',y')`
    ObsAgreement,
    /// `P(y_x) - P(y_{x'}) + P(x,y') + P(x',y)`
    ObsCrossed,
    /// `Σ_z max{...} P(z)` over z-specific arguments
    StratifiedLower,
    /// `Σ_z min{...} P(z)` over z-specific arguments
    StratifiedUpper,
    /// `Σ_z max{0, P(y|x,z) - P(y|x',z)} P(z)`
    BackDoorLower,
    /// `Σ_z min{P(y|x,z), P(y'|x',z)} P(z)`
    BackDoorUpper,
    /// Mediator double sum
    MediatorUpper,
    /// `(P(y) - P(y_{x'})) / P(x,y)`
    PnLowerRatio,
    /// `(P(y'_{x'}) - P(x',y')) / P(x,y)`
    PnUpperRatio,
    /// `(P(y') - P(y'_x)) / P(x',y')`
    PsLowerRatio,
    /// `(P(y_x) - P(x,y)) / P(x',y')`
    PsUpperRatio,
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A closed sub-interval of `[0, 1]` with its binding arguments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub binding_lower: Term,
    pub binding_upper: Term,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64, tol: f64) -> bool {
        value >= self.lower - tol && value <= self.upper + tol
    }

    pub fn is_within(&self, outer: &Interval, tol: f64) -> bool {
        self.lower >= outer.lower - tol && self.upper <= outer.upper + tol
    }

    /// Resolve `max` of the lower arguments and `min` of the upper arguments.
    /// The first argument wins ties. Crossing beyond [`CROSS_TOL`] is an
    /// error; otherwise both ends are clipped to `[0, 1]`.
    pub(crate) fn resolve(lower: &[(Term, f64)], upper: &[(Term, f64)]) -> Result<Interval, BoundsError> {
        let lo = lower.iter().copied().fold(None, |best: Option<(Term, f64)>, c| match best {
            Some(b) if b.1 >= c.1 => Some(b),
            _ => Some(c),
        });
        let hi = upper.iter().copied().fold(None, |best: Option<(Term, f64)>, c| match best {
            Some(b) if b.1 <= c.1 => Some(b),
            _ => Some(c),
        });
        let (Some(lo), Some(hi)) = (lo, hi) else {
            return Err(BoundsError::InvalidSpec("empty argument list".into()));
        };
        Self::from_ends(lo, hi)
    }

    pub(crate) fn from_ends(lo: (Term, f64), hi: (Term, f64)) -> Result<Interval, BoundsError> {
        if !(lo.1.is_finite() && hi.1.is_finite()) {
            return Err(BoundsError::InvalidSpec("non-finite bound argument".into()));
        }
        if lo.1 > hi.1 + CROSS_TOL {
            return Err(BoundsError::Incoherent { lower: lo.1, upper: hi.1, lower_term: lo.0, upper_term: hi.0 });
        }
        let upper = hi.1.clamp(0.0, 1.0);
        let lower = lo.1.clamp(0.0, 1.0).min(upper);
        Ok(Interval { lower, upper, binding_lower: lo.0, binding_upper: hi.0 })
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.4}, {:.4}]", self.lower, self.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimand {
    #[serde(rename = "pns", alias = "PNS")]
    Pns,
    #[serde(rename = "pn", alias = "PN")]
    Pn,
    #[serde(rename = "ps", alias = "PS")]
    Ps,
}

impl fmt::Display for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimand::Pns => "PNS",
            Estimand::Pn => "PN",
            Estimand::Ps => "PS",
        })
    }
}

impl FromStr for Estimand {
    type Err = BoundsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pns" => Ok(Estimand::Pns),
            "pn" => Ok(Estimand::Pn),
            "ps" => Ok(Estimand::Ps),
            _ => Err(BoundsError::InvalidSpec(format!("unknown estimand `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Structure-free bounds from experimental (and observational) marginals.
    TianPearl,
    /// Structure-free bounds within one covariate stratum.
    Conditional,
    /// Non-descendant covariates, z-specific experimental data.
    Thm1,
    /// Back-door covariates, observational data only.
    Thm2,
    /// Mediator with a direct effect.
    Thm3,
    /// Mediator carrying the whole effect.
    Thm4,
    /// Intersection of every eligible method with available data.
    Auto,
}

impl Method {
    pub const ALL: [Method; 7] = [Method::TianPearl, Method::Conditional, Method::Thm1, Method::Thm2, Method::Thm3, Method::Thm4, Method::Auto];

    /// Graphical precondition, `None` for `Auto`.
    pub fn criterion(self) -> Option<Criterion> {
        match self {
            Method::TianPearl => Some(Criterion::TianPearl),
            Method::Conditional | Method::Thm1 => Some(Criterion::NonDescendant),
            Method::Thm2 => Some(Criterion::BackDoor),
            Method::Thm3 => Some(Criterion::PartialMediator),
            Method::Thm4 => Some(Criterion::PureMediator),
            Method::Auto => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::TianPearl => "tian_pearl",
            Method::Conditional => "conditional",
            Method::Thm1 => "thm1",
            Method::Thm2 => "thm2",
            Method::Thm3 => "thm3",
            Method::Thm4 => "thm4",
            Method::Auto => "auto",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = BoundsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.to_ascii_lowercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| BoundsError::InvalidSpec(format!("unknown method `{s}`")))
    }
}

/// What to bound and how.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimandSpec {
    pub estimand: Estimand,
    pub method: Method,
    /// Stratum label or value for population-specific bounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stratum: Option<String>,
}

impl EstimandSpec {
    pub fn new(estimand: Estimand, method: Method) -> Result<Self, BoundsError> {
        let spec = EstimandSpec { estimand, method, stratum: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_stratum(mut self, stratum: impl Into<String>) -> Self {
        self.stratum = Some(stratum.into());
        self
    }

    /// PN and PS only have structure-free (and per-stratum) bounds.
    pub fn validate(&self) -> Result<(), BoundsError> {
        let allowed = match self.estimand {
            Estimand::Pns => true,
            Estimand::Pn | Estimand::Ps => matches!(self.method, Method::TianPearl | Method::Conditional | Method::Auto),
        };
        if !allowed {
            return Err(BoundsError::InvalidSpec(format!("{} supports only tian_pearl and conditional methods", self.estimand)));
        }
        if self.method == Method::Conditional && self.stratum.is_none() {
            return Err(BoundsError::InvalidSpec("conditional bounds need a stratum".into()));
        }
        Ok(())
    }
}
