//! Which bound applies to a given covariate set.

use std::fmt;

use serde::Serialize;

use super::{CausalDiagram, GraphError};

/// Graphical preconditions of the structure-aware bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// No structural requirement.
    TianPearl,
    /// The set contains no descendant of the treatment.
    NonDescendant,
    /// The set satisfies the back-door criterion.
    BackDoor,
    /// The set mediates the effect, with a possible direct edge `X -> Y`.
    PartialMediator,
    /// The set mediates the whole effect; no direct edge `X -> Y`.
    PureMediator,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Criterion::TianPearl => "tian_pearl",
            Criterion::NonDescendant => "non_descendant",
            Criterion::BackDoor => "back_door",
            Criterion::PartialMediator => "partial_mediator",
            Criterion::PureMediator => "pure_mediator",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub eligible: bool,
    pub reason: String,
}

impl Verdict {
    fn yes(reason: impl Into<String>) -> Self {
        Verdict { eligible: true, reason: reason.into() }
    }

    fn no(reason: impl Into<String>) -> Self {
        Verdict { eligible: false, reason: reason.into() }
    }
}

/// Per-criterion eligibility of one covariate set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Eligibility {
    pub covariates: Vec<String>,
    pub tian_pearl: Verdict,
    pub thm1_nondescendant: Verdict,
    pub thm2_backdoor: Verdict,
    pub thm3_partial_mediator: Verdict,
    pub thm4_pure_mediator: Verdict,
}

impl Eligibility {
    pub fn verdict(&self, criterion: Criterion) -> &Verdict {
        match criterion {
            Criterion::TianPearl => &self.tian_pearl,
            Criterion::NonDescendant => &self.thm1_nondescendant,
            Criterion::BackDoor => &self.thm2_backdoor,
            Criterion::PartialMediator => &self.thm3_partial_mediator,
            Criterion::PureMediator => &self.thm4_pure_mediator,
        }
    }

    pub fn allows(&self, criterion: Criterion) -> bool {
        self.verdict(criterion).eligible
    }

    /// One line per criterion, `name: yes|no (reason)`.
    pub fn summary(&self) -> String {
        [
            Criterion::TianPearl,
            Criterion::NonDescendant,
            Criterion::BackDoor,
            Criterion::PartialMediator,
            Criterion::PureMediator,
        ]
        .iter()
        .map(|&c| {
            let v = self.verdict(c);
            format!("{c}: {} ({})", if v.eligible { "yes" } else { "no" }, v.reason)
        })
        .collect::<Vec<_>>()
        .join("\n")
    }
}

impl CausalDiagram {
    fn check_covariates(&self, z: &[&str]) -> Result<Vec<usize>, GraphError> {
        let idx = self.resolve(z)?;
        for &i in &idx {
            if i == self.treatment {
                return Err(GraphError::ContainsEndpoint { role: "treatment", name: self.name(i).into() });
            }
            if i == self.outcome {
                return Err(GraphError::ContainsEndpoint { role: "outcome", name: self.name(i).into() });
            }
        }
        Ok(idx)
    }

    fn set_label(&self, z: &[usize]) -> String {
        let names: Vec<&str> = z.iter().map(|&i| self.name(i)).collect();
        format!("{{{}}}", names.join(", "))
    }

    /// Back-door criterion relative to the designated treatment and outcome:
    /// no member of `z` descends from `X`, and `z` blocks every path between
    /// `X` and `Y` once the edges leaving `X` are removed.
    pub fn satisfies_backdoor(&self, z: &[&str]) -> Result<bool, GraphError> {
        let idx = self.check_covariates(z)?;
        Ok(self.backdoor_idx(&idx))
    }

    fn backdoor_idx(&self, z: &[usize]) -> bool {
        let desc = self.descendant_mask(self.treatment);
        if z.iter().any(|&i| desc[i]) {
            return false;
        }
        let x = self.treatment;
        let cut = self.filtered(|p, _| p != x);
        cut.d_separated_idx(&[self.treatment], &[self.outcome], z)
    }

    /// Decide every criterion for covariate set `z`.
    ///
    /// The mediator criteria are decided structurally: `z` must lie on
    /// directed paths from `X` to `Y`, every parent of `Y` and of each member
    /// of `z` must be `X` or in `z`, no latent edge may touch `Y`, and the only
    /// latent edges touching `z` must join it to `X`.
    pub fn classify_covariates(&self, z: &[&str]) -> Result<Eligibility, GraphError> {
        let idx = self.check_covariates(z)?;
        let label = self.set_label(&idx);
        let desc = self.descendant_mask(self.treatment);

        let tian_pearl = Verdict::yes("always applicable");

        let thm1 = match idx.iter().find(|&&i| desc[i]) {
            None if idx.is_empty() => Verdict::no("no covariates given"),
            None => Verdict::yes(format!("{label} contains no descendant of {}", self.treatment_name())),
            Some(&i) => Verdict::no(format!("{} is a descendant of {}", self.name(i), self.treatment_name())),
        };

        let thm2 = if idx.is_empty() {
            Verdict::no("no covariates given")
        } else if !thm1.eligible {
            Verdict::no(format!("{label} contains a descendant of {}", self.treatment_name()))
        } else if self.backdoor_idx(&idx) {
            Verdict::yes(format!("{label} satisfies the back-door criterion"))
        } else {
            Verdict::no(format!("{label} leaves a back-door path open"))
        };

        let thm3 = self.mediator_verdict(&idx, &desc, &label);
        let thm4 = if !thm3.eligible {
            Verdict::no(thm3.reason.clone())
        } else if self.has_edge(self.treatment, self.outcome) {
            Verdict::no(format!("{} has a direct edge into {}", self.treatment_name(), self.outcome_name()))
        } else {
            Verdict::yes(format!("{label} mediates the whole effect of {} on {}", self.treatment_name(), self.outcome_name()))
        };

        Ok(Eligibility {
            covariates: idx.iter().map(|&i| self.name(i).to_string()).collect(),
            tian_pearl,
            thm1_nondescendant: thm1,
            thm2_backdoor: thm2,
            thm3_partial_mediator: thm3,
            thm4_pure_mediator: thm4,
        })
    }

    fn mediator_verdict(&self, z: &[usize], desc: &[bool], label: &str) -> Verdict {
        if z.is_empty() {
            return Verdict::no("no covariates given");
        }
        let (x, y) = (self.treatment, self.outcome);
        let anc_y = self.ancestor_mask(y);
        for &m in z {
            if !desc[m] || !anc_y[m] {
                return Verdict::no(format!("{} is not on a directed path {} -> ... -> {}", self.name(m), self.name(x), self.name(y)));
            }
        }
        let allowed = |p: usize| p == x || z.contains(&p);
        for &v in z.iter().chain(std::iter::once(&y)) {
            if let Some(&p) = self.parents(v).iter().find(|&&p| !allowed(p)) {
                return Verdict::no(format!("{} has parent {} outside {{{}}} ∪ {label}", self.name(v), self.name(p), self.name(x)));
            }
        }
        for &(a, b) in &self.latents {
            if a == y || b == y {
                return Verdict::no(format!("latent edge {}<->{} touches the outcome", self.name(a), self.name(b)));
            }
            let touches_z = z.contains(&a) || z.contains(&b);
            let joins_x = a == x || b == x;
            if touches_z && !joins_x {
                return Verdict::no(format!("latent edge {}<->{} confounds the mediator", self.name(a), self.name(b)));
            }
        }
        Verdict::yes(format!("{label} mediates {} -> {} with only {}-mediator confounding", self.name(x), self.name(y), self.name(x)))
    }
}
