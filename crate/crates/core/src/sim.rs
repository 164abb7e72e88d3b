//! Monte Carlo comparison of PNS bounds with and without the causal diagram.
//!
//! Each sample draws a full set of conditional probability tables, computes
//! the exact observational joint, and evaluates the structure-free bounds
//! (with interventional inputs obtained by back-door adjustment) against the
//! back-door bound. Only the tables are random; no data are sampled.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Exp1, StandardUniform};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bounds::{pns_backdoor, pns_tian_pearl, BoundsError, Interval};
use crate::graph::{CausalDiagram, GraphError};
use crate::presets;
use crate::rng::{substream, Purpose, Rng};
use crate::tables::{CompensatedSum, ObservationalTable, TableError, Variable};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("the number of samples must be positive")]
    EmptyRun,
    #[error("cannot summarize an empty record list")]
    EmptyRecords,
    #[error("requested {k} plot rows from {n} records")]
    TooMany { k: usize, n: usize },
    #[error("covariate set is not a back-door set: {0}")]
    Ineligible(String),
    #[error("unknown preset `{0}` (expected fig1a, fig1a-z1024, fig4 or fig5)")]
    UnknownPreset(String),
    #[error("sample {index}: {source}")]
    Sample { index: u64, source: BoundsError },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("i/o: {0}")]
    Io(String),
}

/// Distribution of the raw draws `a_j` that are normalized into a CPT row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DrawDistribution {
    /// Unit exponential draws: rows are uniform on the simplex.
    #[default]
    Exponential,
    /// Uniform(0, 1) draws.
    Uniform,
}

impl DrawDistribution {
    fn draw(self, rng: &mut Rng) -> f64 {
        match self {
            DrawDistribution::Exponential => rng.sample(Exp1),
            DrawDistribution::Uniform => rng.sample(StandardUniform),
        }
    }
}

impl FromStr for DrawDistribution {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exponential" | "dirichlet" => Ok(DrawDistribution::Exponential),
            "uniform" => Ok(DrawDistribution::Uniform),
            _ => Err(format!("unknown draw distribution `{s}` (expected exponential or uniform)")),
        }
    }
}

impl fmt::Display for DrawDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DrawDistribution::Exponential => "exponential",
            DrawDistribution::Uniform => "uniform",
        })
    }
}

/// `a_j / Σ a`.
pub fn normalize_draws(draws: &[f64]) -> Vec<f64> {
    let sum: f64 = draws.iter().sum();
    draws.iter().map(|a| a / sum).collect()
}

/// One conditional probability table per node. Row `c` of node `v` is
/// `P(v | parents = c)`, parent configurations row-major in the order of
/// [`CausalDiagram::parents`].
#[derive(Debug, Clone, PartialEq)]
pub struct Cpts {
    pub tables: Vec<Vec<f64>>,
}

impl Cpts {
    pub fn row<'a>(&'a self, g: &CausalDiagram, v: usize, config: usize) -> &'a [f64] {
        let card = g.card(v);
        &self.tables[v][config * card..(config + 1) * card]
    }

    /// Exact joint over every node, row-major in diagram order.
    pub fn joint(&self, g: &CausalDiagram) -> Vec<f64> {
        let n = g.len();
        let size: usize = g.nodes().iter().map(|v| v.card).product();
        let mut out = Vec::with_capacity(size);
        let mut assign = vec![0usize; n];
        for _ in 0..size {
            let mut p = 1.0;
            for (v, &a) in assign.iter().enumerate() {
                let config = g.parents(v).iter().fold(0usize, |acc, &q| acc * g.card(q) + assign[q]);
                p *= self.tables[v][config * g.card(v) + a];
            }
            out.push(p);
            for k in (0..n).rev() {
                assign[k] += 1;
                if assign[k] < g.card(k) {
                    break;
                }
                assign[k] = 0;
            }
        }
        out
    }

    pub fn observational(&self, g: &CausalDiagram) -> Result<ObservationalTable, TableError> {
        let vars = g.nodes().iter().map(|v| Variable::new(v.name.clone(), v.card)).collect();
        ObservationalTable::new(vars, self.joint(g))
    }
}

/// Draw every row of every node's table independently.
pub fn generate_cpt(g: &CausalDiagram, rng: &mut Rng, draw: DrawDistribution) -> Cpts {
    let tables = (0..g.len())
        .map(|v| {
            let card = g.card(v);
            let configs: usize = g.parents(v).iter().map(|&p| g.card(p)).product();
            let mut table = Vec::with_capacity(card * configs);
            let mut row = vec![0.0; card];
            for _ in 0..configs {
                row.iter_mut().for_each(|a| *a = draw.draw(rng));
                table.extend(normalize_draws(&row));
            }
            table
        })
        .collect();
    Cpts { tables }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimRecord {
    pub index: u64,
    pub tp_lower: f64,
    pub tp_upper: f64,
    pub diagram_lower: f64,
    pub diagram_upper: f64,
}

impl SimRecord {
    pub fn increased_lower(&self) -> f64 {
        self.diagram_lower - self.tp_lower
    }

    pub fn decreased_upper(&self) -> f64 {
        self.tp_upper - self.diagram_upper
    }

    pub fn gap_without(&self) -> f64 {
        self.tp_upper - self.tp_lower
    }

    pub fn gap_with(&self) -> f64 {
        self.diagram_upper - self.diagram_lower
    }

    pub fn is_contained(&self, tol: f64) -> bool {
        self.tp_lower <= self.diagram_lower + tol && self.diagram_lower <= self.diagram_upper + tol && self.diagram_upper <= self.tp_upper + tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimSummary {
    pub n: usize,
    pub avg_increased_lower: f64,
    pub avg_decreased_upper: f64,
    pub avg_gap_without: f64,
    pub avg_gap_with: f64,
}

impl fmt::Display for SimSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} avg_increased_lower={:.4} avg_decreased_upper={:.4} avg_gap_without={:.4} avg_gap_with={:.4}",
            self.n, self.avg_increased_lower, self.avg_decreased_upper, self.avg_gap_without, self.avg_gap_with
        )
    }
}

/// Bounds for one set of tables: structure-free versus back-door.
pub fn evaluate_sample(g: &CausalDiagram, cpts: &Cpts, z: &[&str]) -> Result<(Interval, Interval), BoundsError> {
    let obs = cpts.observational(g)?;
    let (x, y) = (g.treatment_name(), g.outcome_name());
    let cells = obs.strata(x, y, z)?;
    let (mut a, mut b, mut joint) = (CompensatedSum::default(), CompensatedSum::default(), [CompensatedSum::default(); 4]);
    for c in &cells {
        let p_z = c.total();
        if p_z > 0.0 {
            let py_x = c.y_given_x().ok_or_else(|| TableError::ZeroCell("(x, z)".into()))?;
            let py_xp = c.y_given_xprime().ok_or_else(|| TableError::ZeroCell("(x', z)".into()))?;
            a.add(py_x * p_z);
            b.add(py_xp * p_z);
        }
        for (acc, v) in joint.iter_mut().zip([c.xy, c.x_yprime, c.xprime_y, c.xprime_yprime]) {
            acc.add(v);
        }
    }
    let effects = crate::tables::Effects::new(a.value().clamp(0.0, 1.0), b.value().clamp(0.0, 1.0));
    let joint = crate::tables::JointXY::new(joint[0].value(), joint[1].value(), joint[2].value(), joint[3].value());
    let tp = pns_tian_pearl(&effects, Some(&joint))?;
    let dg = pns_backdoor(&cells)?;
    Ok((tp, dg))
}

/// `n` samples on diagram `g` with back-door set `z`. Sample `i` draws its
/// tables from its own substream of `seed`, so the output does not depend on
/// thread scheduling.
pub fn run_simulation(g: &CausalDiagram, z: &[&str], n: usize, seed: u64, draw: DrawDistribution) -> Result<Vec<SimRecord>, SimError> {
    if n == 0 {
        return Err(SimError::EmptyRun);
    }
    let elig = g.classify_covariates(z)?;
    if !elig.thm2_backdoor.eligible {
        return Err(SimError::Ineligible(elig.thm2_backdoor.reason));
    }
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, Purpose::Cpt, i);
            let cpts = generate_cpt(g, &mut rng, draw);
            let (tp, dg) = evaluate_sample(g, &cpts, z).map_err(|source| SimError::Sample { index: i, source })?;
            Ok(SimRecord { index: i, tp_lower: tp.lower, tp_upper: tp.upper, diagram_lower: dg.lower, diagram_upper: dg.upper })
        })
        .collect()
}

pub fn summarize(records: &[SimRecord]) -> Result<SimSummary, SimError> {
    if records.is_empty() {
        return Err(SimError::EmptyRecords);
    }
    let n = records.len() as f64;
    let mean = |f: fn(&SimRecord) -> f64| {
        let mut acc = CompensatedSum::default();
        records.iter().for_each(|r| acc.add(f(r)));
        acc.value() / n
    };
    Ok(SimSummary {
        n: records.len(),
        avg_increased_lower: mean(SimRecord::increased_lower),
        avg_decreased_upper: mean(SimRecord::decreased_upper),
        avg_gap_without: mean(SimRecord::gap_without),
        avg_gap_with: mean(SimRecord::gap_with),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlotRow {
    pub index: u64,
    pub tp_lower: f64,
    pub diagram_lower: f64,
    pub diagram_upper: f64,
    pub tp_upper: f64,
}

/// `k` records drawn without replacement, sorted by the width of the
/// diagram interval.
pub fn emit_plot_data(records: &[SimRecord], k: usize, seed: u64) -> Result<Vec<PlotRow>, SimError> {
    if k > records.len() {
        return Err(SimError::TooMany { k, n: records.len() });
    }
    let mut rng = substream(seed, Purpose::PlotSubset, 0);
    let mut rows: Vec<PlotRow> = index::sample(&mut rng, records.len(), k)
        .into_iter()
        .map(|i| {
            let r = &records[i];
            PlotRow { index: r.index, tp_lower: r.tp_lower, diagram_lower: r.diagram_lower, diagram_upper: r.diagram_upper, tp_upper: r.tp_upper }
        })
        .collect();
    rows.sort_by(|a, b| (a.diagram_upper - a.diagram_lower).total_cmp(&(b.diagram_upper - b.diagram_lower)).then(a.index.cmp(&b.index)));
    Ok(rows)
}

fn write_csv<T: Serialize, W: Write>(rows: impl IntoIterator<Item = T>, out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| SimError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| SimError::Io(e.to_string()))
}

/// Columns `index,tp_lower,tp_upper,diagram_lower,diagram_upper`.
pub fn write_records_csv<W: Write>(records: &[SimRecord], out: W) -> Result<(), SimError> {
    write_csv(records, out)
}

/// Columns `index,tp_lower,diagram_lower,diagram_upper,tp_upper`.
pub fn write_plot_csv<W: Write>(rows: &[PlotRow], out: W) -> Result<(), SimError> {
    write_csv(rows, out)
}

pub fn write_summary_csv<W: Write>(summary: &SimSummary, out: W) -> Result<(), SimError> {
    write_csv([summary], out)
}

/// The four diagrams of the comparison study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimPreset {
    Fig1a,
    Fig1aZ1024,
    Fig4,
    Fig5,
}

impl SimPreset {
    pub const ALL: [SimPreset; 4] = [SimPreset::Fig1a, SimPreset::Fig4, SimPreset::Fig5, SimPreset::Fig1aZ1024];

    pub fn id(self) -> &'static str {
        match self {
            SimPreset::Fig1a => "fig1a",
            SimPreset::Fig1aZ1024 => "fig1a-z1024",
            SimPreset::Fig4 => "fig4",
            SimPreset::Fig5 => "fig5",
        }
    }

    pub fn graph(self) -> CausalDiagram {
        presets::by_name(self.id()).expect("simulation presets exist")
    }

    /// Default back-door set.
    pub fn covariates(self) -> Vec<&'static str> {
        match self {
            SimPreset::Fig1a | SimPreset::Fig1aZ1024 => vec!["Z"],
            SimPreset::Fig4 => vec!["Z1", "Z2"],
            SimPreset::Fig5 => vec!["Z1", "Z3"],
        }
    }
}

impl FromStr for SimPreset {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SimPreset::ALL.into_iter().find(|p| p.id() == s).ok_or_else(|| SimError::UnknownPreset(s.to_string()))
    }
}

impl fmt::Display for SimPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn normalization_is_a_over_sum() {
        let row = normalize_draws(&[0.25, 0.75, 1.0]);
        assert_eq!(row, vec![0.125, 0.375, 0.5]);
    }

    #[test]
    fn tables_are_normalized_and_reproducible() {
        let g = presets::fig1a_with_card(1024);
        let a = generate_cpt(&g, &mut rng_from_seed(5), DrawDistribution::Exponential);
        let b = generate_cpt(&g, &mut rng_from_seed(5), DrawDistribution::Exponential);
        assert_eq!(a, b);
        let z = g.node_index("Z").unwrap();
        assert_eq!(a.tables[z].len(), 1024);
        assert!((a.tables[z].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let u = generate_cpt(&g, &mut rng_from_seed(5), DrawDistribution::Uniform);
        let y = g.node_index("Y").unwrap();
        for c in 0..2048 {
            assert!((u.row(&g, y, c).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_matches_factorization() {
        let g = presets::fig1a();
        let cpts = generate_cpt(&g, &mut rng_from_seed(1), DrawDistribution::Uniform);
        let joint = cpts.joint(&g);
        assert!((joint.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // nodes Z, X, Y; cell (Z=1, X=0, Y=1) = P(z) P(x'|z) P(y|x',z)
        let (z, x, y) = (1, 0, 1);
        let expected = cpts.tables[0][z] * cpts.tables[1][z * 2 + x] * cpts.tables[2][(z * 2 + x) * 2 + y];
        assert!((joint[z * 4 + x * 2 + y] - expected).abs() < 1e-15);
    }

    #[test]
    fn single_sample_is_contained() {
        let g = presets::fig1a();
        let recs = run_simulation(&g, &["Z"], 1, 3, DrawDistribution::Exponential).unwrap();
        assert_eq!(recs.len(), 1);
        assert!(recs[0].is_contained(1e-12));
    }

    #[test]
    fn rejects_empty_and_ineligible() {
        let g = presets::fig5();
        assert!(matches!(run_simulation(&g, &["Z1"], 0, 0, DrawDistribution::Exponential), Err(SimError::EmptyRun)));
        assert!(matches!(run_simulation(&g, &["Z2"], 5, 0, DrawDistribution::Exponential), Err(SimError::Ineligible(_))));
        assert!(matches!(summarize(&[]), Err(SimError::EmptyRecords)));
    }

    #[test]
    fn summary_identity_and_constant_records() {
        let g = presets::fig4();
        let recs = run_simulation(&g, &["Z1", "Z2"], 500, 8, DrawDistribution::Exponential).unwrap();
        let s = summarize(&recs).unwrap();
        let lhs = s.avg_gap_without - s.avg_gap_with;
        let rhs = s.avg_increased_lower + s.avg_decreased_upper;
        assert!((lhs - rhs).abs() < 1e-12);
        let same = vec![recs[0]; 10];
        let t = summarize(&same).unwrap();
        assert!((t.avg_gap_with - recs[0].gap_with()).abs() < 1e-15);
        assert!((t.avg_increased_lower - recs[0].increased_lower()).abs() < 1e-15);
    }

    #[test]
    fn plot_subset() {
        let g = presets::fig1a();
        let recs = run_simulation(&g, &["Z"], 200, 2, DrawDistribution::Exponential).unwrap();
        let all = emit_plot_data(&recs, 200, 9).unwrap();
        assert_eq!(all.len(), 200);
        let a = emit_plot_data(&recs, 20, 9).unwrap();
        assert_eq!(a, emit_plot_data(&recs, 20, 9).unwrap());
        for r in &a {
            assert!(r.tp_lower <= r.diagram_lower + 1e-12 && r.diagram_lower <= r.diagram_upper && r.diagram_upper <= r.tp_upper + 1e-12);
        }
        assert!(a.windows(2).all(|w| w[0].diagram_upper - w[0].diagram_lower <= w[1].diagram_upper - w[1].diagram_lower));
        assert!(matches!(emit_plot_data(&recs, 201, 9), Err(SimError::TooMany { .. })));
    }

    #[test]
    fn fig5_subsets_agree_on_backdoor_bound() {
        let g = presets::fig5();
        for seed in 0..10 {
            let cpts = generate_cpt(&g, &mut rng_from_seed(seed), DrawDistribution::Exponential);
            let (tp_a, a) = evaluate_sample(&g, &cpts, &["Z1", "Z3"]).unwrap();
            let (tp_b, b) = evaluate_sample(&g, &cpts, &["Z1", "Z2", "Z3"]).unwrap();
            assert!((a.lower - b.lower).abs() < 1e-12 && (a.upper - b.upper).abs() < 1e-12);
            assert!((tp_a.lower - tp_b.lower).abs() < 1e-12 && (tp_a.upper - tp_b.upper).abs() < 1e-12);
        }
    }
}
