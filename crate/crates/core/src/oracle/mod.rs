//! Ground truth from explicit structural models.
//!
//! Every endogenous node gets a finite set of *response functions* (maps from
//! parent configurations to values). A joint response type assigns one
//! function to each node; a model is a probability law over joint types.
//! Laws factorize over the blocks of nodes joined by latent edges, so nodes in
//! different blocks have independent types.
//!
//! Because each joint type determines the natural world and both
//! interventional worlds, every observable and every counterfactual quantity
//! is an exact finite sum.

mod extremize;
mod validity;

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::Exp1;
use thiserror::Error;

use crate::bounds::{BoundsError, ProblemData};
use crate::graph::{CausalDiagram, GraphError};
use crate::rng::{rng_from_seed, Rng};
use crate::tables::{compensated_sum, CompensatedSum, ExperimentalTable, MediatorSource, MediatorTables, ObservationalTable, Stratum, TableError, Variable};

pub use extremize::{extremize_estimand, extremize_estimand_grid, Range};
pub use validity::{run_validity, write_validity_csv, Family, ValidityReport, ValidityRow};

/// Largest parent-configuration space a node may have.
pub const MAX_PARENT_CONFIGS: usize = 16;
/// Largest number of joint response types.
pub const MAX_JOINT_TYPES: usize = 1 << 20;
/// Tolerance on the total mass of a law.
pub const LAW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("{what} has size {size}, above the limit {limit}")]
    TooLarge { what: String, size: usize, limit: usize },
    #[error("no model reproduces the observables: {0}")]
    Infeasible(String),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("invalid law: {0}")]
    BadLaw(String),
    #[error("linear program failed: {0}")]
    Lp(String),
    #[error("sample {seed}: {source}")]
    Sample { seed: u64, source: Box<OracleError> },
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

/// A deterministic map from parent configurations to node values.
/// `table[c]` is the value at parent configuration `c` (row-major over the
/// node's parents, last parent fastest).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ResponseFunction {
    pub table: Vec<u8>,
}

impl ResponseFunction {
    pub fn eval(&self, config: usize) -> usize {
        self.table[config] as usize
    }
}

/// All response functions of `node`, in canonical order: function `i` has
/// the base-`card` digits of `i` as its table, most significant digit first.
/// For a binary node with one binary parent this is never, complier, defier,
/// always.
pub fn enumerate_response_types(g: &CausalDiagram, node: &str) -> Result<Vec<ResponseFunction>, OracleError> {
    let v = g.node_index(node)?;
    response_functions(g, v)
}

fn response_functions(g: &CausalDiagram, v: usize) -> Result<Vec<ResponseFunction>, OracleError> {
    let configs: usize = g.parents(v).iter().map(|&p| g.card(p)).product();
    if configs > MAX_PARENT_CONFIGS {
        return Err(OracleError::TooLarge { what: format!("parent space of {}", g.name(v)), size: configs, limit: MAX_PARENT_CONFIGS });
    }
    let card = g.card(v);
    let count = (card as u128).pow(configs as u32);
    if count > MAX_JOINT_TYPES as u128 {
        return Err(OracleError::TooLarge { what: format!("response functions of {}", g.name(v)), size: count.min(usize::MAX as u128) as usize, limit: MAX_JOINT_TYPES });
    }
    Ok((0..count as usize)
        .map(|mut i| {
            let mut table = vec![0u8; configs];
            for c in (0..configs).rev() {
                table[c] = (i % card) as u8;
                i /= card;
            }
            ResponseFunction { table }
        })
        .collect())
}

/// Nodes grouped into blocks of correlated types: connected components of
/// the latent edges. Blocks are ordered by their smallest node index.
pub fn latent_blocks(g: &CausalDiagram) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..g.len()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for &(a, b) in g.latent_edges() {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut root_block = vec![usize::MAX; g.len()];
    for v in 0..g.len() {
        let r = find(&mut parent, v);
        if root_block[r] == usize::MAX {
            root_block[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[root_block[r]].push(v);
    }
    blocks
}

/// The joint response-type space of a diagram, with the three worlds of
/// every joint type precomputed.
///
/// Joint type indices are mixed-radix over nodes in diagram order (last node
/// fastest). World cells index the full value space the same way.
#[derive(Debug)]
pub struct TypeSpace {
    graph: CausalDiagram,
    functions: Vec<Vec<ResponseFunction>>,
    blocks: Vec<Vec<usize>>,
    block_sizes: Vec<usize>,
    /// `block_index[t * blocks + b]`: index of joint type `t` within block `b`.
    block_index: Vec<u32>,
    natural: Vec<u32>,
    treated: Vec<u32>,
    untreated: Vec<u32>,
    strides: Vec<usize>,
}

impl TypeSpace {
    pub fn new(g: &CausalDiagram) -> Result<Arc<TypeSpace>, OracleError> {
        let functions: Vec<Vec<ResponseFunction>> = (0..g.len()).map(|v| response_functions(g, v)).collect::<Result<_, _>>()?;
        let radix: Vec<usize> = functions.iter().map(Vec::len).collect();
        let total = radix.iter().try_fold(1usize, |acc, &r| acc.checked_mul(r).filter(|&n| n <= MAX_JOINT_TYPES));
        let Some(total) = total else {
            return Err(OracleError::TooLarge { what: "joint response-type space".into(), size: usize::MAX, limit: MAX_JOINT_TYPES });
        };
        let cells: usize = g.nodes().iter().map(|n| n.card).product();
        if cells > u32::MAX as usize {
            return Err(OracleError::TooLarge { what: "value space".into(), size: cells, limit: u32::MAX as usize });
        }
        let mut strides = vec![1usize; g.len()];
        for v in (0..g.len().saturating_sub(1)).rev() {
            strides[v] = strides[v + 1] * g.card(v + 1);
        }

        let blocks = latent_blocks(g);
        let block_sizes: Vec<usize> = blocks.iter().map(|b| b.iter().map(|&v| radix[v]).product()).collect();
        let nb = blocks.len();
        let mut block_index = vec![0u32; total * nb];
        let (mut natural, mut treated, mut untreated) = (vec![0u32; total], vec![0u32; total], vec![0u32; total]);

        let x = g.treatment();
        let mut t_digits = vec![0usize; g.len()];
        let mut values = vec![0usize; g.len()];
        for t in 0..total {
            for (b, nodes) in blocks.iter().enumerate() {
                let idx = nodes.iter().fold(0usize, |acc, &v| acc * radix[v] + t_digits[v]);
                block_index[t * nb + b] = idx as u32;
            }
            for (slot, intervention) in [(&mut natural, None), (&mut treated, Some(1)), (&mut untreated, Some(0))] {
                for &v in g.topological_order() {
                    values[v] = match intervention {
                        Some(val) if v == x => val,
                        _ => {
                            let config = g.parents(v).iter().fold(0usize, |acc, &p| acc * g.card(p) + values[p]);
                            functions[v][t_digits[v]].eval(config)
                        }
                    };
                }
                slot[t] = values.iter().zip(&strides).map(|(a, s)| a * s).sum::<usize>() as u32;
            }
            for k in (0..t_digits.len()).rev() {
                t_digits[k] += 1;
                if t_digits[k] < radix[k] {
                    break;
                }
                t_digits[k] = 0;
            }
        }
        Ok(Arc::new(TypeSpace { graph: g.clone(), functions, blocks, block_sizes, block_index, natural, treated, untreated, strides }))
    }

    pub fn graph(&self) -> &CausalDiagram {
        &self.graph
    }

    pub fn len(&self) -> usize {
        self.natural.len()
    }

    pub fn is_empty(&self) -> bool {
        self.natural.is_empty()
    }

    pub fn functions(&self, node: usize) -> &[ResponseFunction] {
        &self.functions[node]
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    /// Index of the response function whose table is `table`.
    pub fn function_index(&self, node: usize, table: &[u8]) -> Option<usize> {
        self.functions[node].iter().position(|f| f.table == table)
    }

    pub(crate) fn value(&self, cell: u32, node: usize) -> usize {
        (cell as usize / self.strides[node]) % self.graph.card(node)
    }

    pub(crate) fn compound(&self, cell: u32, nodes: &[usize]) -> usize {
        nodes.iter().fold(0, |acc, &v| acc * self.graph.card(v) + self.value(cell, v))
    }

    /// Natural world and worlds under `do(X = 1)`, `do(X = 0)` of joint type `t`.
    pub(crate) fn worlds(&self, t: usize) -> (u32, u32, u32) {
        (self.natural[t], self.treated[t], self.untreated[t])
    }

    fn value_table(&self, probs: Vec<f64>) -> Result<ObservationalTable, TableError> {
        let vars = self.graph.nodes().iter().map(|n| Variable::new(n.name.clone(), n.card)).collect();
        ObservationalTable::new(vars, probs)
    }
}

/// A structural causal model given as a law over response types.
#[derive(Debug, Clone)]
pub struct ResponseTypeSCM {
    space: Arc<TypeSpace>,
    block_laws: Vec<Vec<f64>>,
    law: Vec<f64>,
}

/// Exact observable tables induced by a model.
#[derive(Debug, Clone)]
pub struct Observables {
    pub covariates: Vec<String>,
    /// Joint over every node of the diagram.
    pub observational: ObservationalTable,
    /// `P(y_x)`, `P(y_x')`, stratified by the covariates when none of them
    /// descends from the treatment.
    pub experimental: ExperimentalTable,
    /// Present when every covariate descends from the treatment.
    pub mediator: Option<MediatorTables>,
}

impl Observables {
    pub fn problem_data(&self) -> ProblemData {
        ProblemData {
            observational: Some(self.observational.clone()),
            experimental: Some(self.experimental.clone()),
            mediator: self.mediator.clone(),
            covariates: self.covariates.clone(),
        }
    }

    /// Same observables without the observational joint.
    pub fn experimental_only(&self) -> ProblemData {
        ProblemData { observational: None, ..self.problem_data() }
    }
}

impl ResponseTypeSCM {
    /// Build from one law per latent block, ordered as [`TypeSpace::blocks`].
    pub fn from_block_laws(space: Arc<TypeSpace>, block_laws: Vec<Vec<f64>>) -> Result<Self, OracleError> {
        if block_laws.len() != space.blocks.len() {
            return Err(OracleError::BadLaw(format!("expected {} block laws, got {}", space.blocks.len(), block_laws.len())));
        }
        for (b, law) in block_laws.iter().enumerate() {
            if law.len() != space.block_sizes[b] {
                return Err(OracleError::BadLaw(format!("block {b} law has {} entries, expected {}", law.len(), space.block_sizes[b])));
            }
            if law.iter().any(|p| !(*p >= 0.0)) {
                return Err(OracleError::BadLaw(format!("block {b} law has a negative or NaN entry")));
            }
            let sum = compensated_sum(law.iter().copied());
            if (sum - 1.0).abs() > LAW_TOL {
                return Err(OracleError::BadLaw(format!("block {b} law sums to {sum}")));
            }
        }
        let nb = space.blocks.len();
        let law = (0..space.len())
            .map(|t| (0..nb).map(|b| block_laws[b][space.block_index[t * nb + b] as usize]).product())
            .collect();
        Ok(ResponseTypeSCM { space, block_laws, law })
    }

    /// Independent per-node laws; only for diagrams without latent edges.
    pub fn from_node_laws(space: Arc<TypeSpace>, laws: Vec<Vec<f64>>) -> Result<Self, OracleError> {
        if space.blocks.iter().any(|b| b.len() > 1) {
            return Err(OracleError::BadLaw("per-node laws cannot express latent confounding".into()));
        }
        Self::from_block_laws(space, laws)
    }

    /// Point mass on one response function per node.
    pub fn deterministic(space: Arc<TypeSpace>, tables: &[Vec<u8>]) -> Result<Self, OracleError> {
        let g = space.graph();
        let mut laws = Vec::with_capacity(space.blocks.len());
        for block in &space.blocks {
            let mut index = 0usize;
            for &v in block {
                let f = tables
                    .get(v)
                    .and_then(|tab| space.function_index(v, tab))
                    .ok_or_else(|| OracleError::BadLaw(format!("no response function of {} has that table", g.name(v))))?;
                index = index * space.functions[v].len() + f;
            }
            let size = space.block_sizes[laws.len()];
            let mut law = vec![0.0; size];
            law[index] = 1.0;
            laws.push(law);
        }
        Self::from_block_laws(space, laws)
    }

    pub fn space(&self) -> &Arc<TypeSpace> {
        &self.space
    }

    pub fn graph(&self) -> &CausalDiagram {
        &self.space.graph
    }

    pub fn block_laws(&self) -> &[Vec<f64>] {
        &self.block_laws
    }

    /// Dense law over joint types.
    pub fn law(&self) -> &[f64] {
        &self.law
    }

    fn outcome_values(&self, t: usize) -> (usize, usize, usize, usize) {
        let s = &self.space;
        let (nat, t1, t0) = s.worlds(t);
        let (x, y) = (s.graph.treatment(), s.graph.outcome());
        (s.value(nat, x), s.value(nat, y), s.value(t1, y), s.value(t0, y))
    }

    /// `P(y_x, y'_{x'})`.
    pub fn true_pns(&self) -> f64 {
        let mut acc = CompensatedSum::default();
        for (t, &p) in self.law.iter().enumerate() {
            let (_, _, y1, y0) = self.outcome_values(t);
            if y1 == 1 && y0 == 0 {
                acc.add(p);
            }
        }
        acc.value()
    }

    /// `P(y'_{x'} | x, y)`.
    pub fn true_pn(&self) -> Result<f64, OracleError> {
        self.conditional_truth(|x, y, _, y0| (x == 1 && y == 1, y0 == 0), "PN conditions on (x, y), which has zero probability")
    }

    /// `P(y_x | x', y')`.
    pub fn true_ps(&self) -> Result<f64, OracleError> {
        self.conditional_truth(|x, y, y1, _| (x == 0 && y == 0, y1 == 1), "PS conditions on (x', y'), which has zero probability")
    }

    fn conditional_truth(&self, f: impl Fn(usize, usize, usize, usize) -> (bool, bool), msg: &str) -> Result<f64, OracleError> {
        let (mut num, mut den) = (CompensatedSum::default(), CompensatedSum::default());
        for (t, &p) in self.law.iter().enumerate() {
            let (x, y, y1, y0) = self.outcome_values(t);
            let (given, event) = f(x, y, y1, y0);
            if given {
                den.add(p);
                if event {
                    num.add(p);
                }
            }
        }
        if den.value() <= 0.0 {
            return Err(OracleError::Undefined(msg.into()));
        }
        Ok((num.value() / den.value()).clamp(0.0, 1.0))
    }

    /// Natural, `do(x)` and `do(x')` distributions over all nodes.
    fn world_tables(&self) -> Result<[ObservationalTable; 3], OracleError> {
        let cells: usize = self.graph().nodes().iter().map(|n| n.card).product();
        let mut acc = [vec![CompensatedSum::default(); cells], vec![CompensatedSum::default(); cells], vec![CompensatedSum::default(); cells]];
        for (t, &p) in self.law.iter().enumerate() {
            let (n, t1, t0) = self.space.worlds(t);
            acc[0][n as usize].add(p);
            acc[1][t1 as usize].add(p);
            acc[2][t0 as usize].add(p);
        }
        let [a, b, c] = acc.map(|v| v.iter().map(CompensatedSum::value).collect::<Vec<f64>>());
        Ok([self.space.value_table(a)?, self.space.value_table(b)?, self.space.value_table(c)?])
    }

    /// Exact observables for covariate (or mediator) set `covariates`.
    pub fn observables_of(&self, covariates: &[&str]) -> Result<Observables, OracleError> {
        let g = self.graph();
        let (x, y) = (g.treatment_name(), g.outcome_name());
        let [obs, treated, untreated] = self.world_tables()?;
        let p_y_x = treated.prob(&[(y, 1)])?;
        let p_y_xp = untreated.prob(&[(y, 1)])?;

        let idx: Vec<usize> = covariates.iter().map(|c| g.node_index(c)).collect::<Result<_, _>>()?;
        let desc: Vec<bool> = {
            let d = g.descendants(x)?;
            idx.iter().map(|&i| d.contains(g.name(i))).collect()
        };
        let names: Vec<String> = covariates.iter().map(|s| s.to_string()).collect();

        let experimental = if !idx.is_empty() && desc.iter().all(|d| !d) {
            let t1 = treated.strata(x, y, covariates)?;
            let t0 = untreated.strata(x, y, covariates)?;
            let strata = t1
                .iter()
                .zip(&t0)
                .enumerate()
                .map(|(k, (a, b))| {
                    let p_z = a.total();
                    let (ya, yb) = if p_z > 0.0 { ((a.xy / p_z).clamp(0.0, 1.0), (b.xprime_y / b.total()).clamp(0.0, 1.0)) } else { (0.0, 0.0) };
                    Stratum { value: k, label: None, p_z, p_y_do_x: ya, p_y_do_xprime: yb }
                })
                .collect();
            ExperimentalTable::with_strata(names.clone(), p_y_x, p_y_xp, strata)?
        } else {
            ExperimentalTable::new(p_y_x, p_y_xp)?
        };

        let mediator = if !idx.is_empty() && desc.iter().all(|&d| d) {
            let p_zx = treated.marginal(covariates)?.probabilities().to_vec();
            let p_zxp = untreated.marginal(covariates)?.probabilities().to_vec();
            let cells = obs.strata(x, y, covariates)?;
            let pooled: Option<Vec<f64>> = cells.iter().map(|c| (c.total() > 0.0).then(|| (c.p_y() / c.total()).clamp(0.0, 1.0))).collect();
            let arm_x: Option<Vec<f64>> = cells.iter().map(|c| c.y_given_x()).collect();
            let arm_xp: Option<Vec<f64>> = cells.iter().map(|c| c.y_given_xprime()).collect();
            let (arm_x, arm_xp) = match (arm_x, arm_xp) {
                (Some(a), Some(b)) => (Some(a), Some(b)),
                _ => (None, None),
            };
            Some(MediatorTables::new(names.clone(), MediatorSource::Experimental, p_zx, p_zxp, pooled, arm_x, arm_xp)?)
        } else {
            None
        };

        Ok(Observables { covariates: names, observational: obs, experimental, mediator })
    }

    /// In every exogenous state with positive mass whose outcome responds to
    /// the treatment, the mediators respond as well.
    pub fn complier_property_holds(&self, mediators: &[&str]) -> Result<bool, OracleError> {
        let g = self.graph();
        let m: Vec<usize> = mediators.iter().map(|c| g.node_index(c)).collect::<Result<_, _>>()?;
        let y = g.outcome();
        let s = &self.space;
        Ok(self.law.iter().enumerate().filter(|(_, &p)| p > 0.0).all(|(t, _)| {
            let (_, t1, t0) = s.worlds(t);
            s.value(t1, y) == s.value(t0, y) || s.compound(t1, &m) != s.compound(t0, &m)
        }))
    }
}

/// Draw one flat-Dirichlet law per latent block.
pub fn random_scm_with(space: &Arc<TypeSpace>, rng: &mut Rng) -> ResponseTypeSCM {
    let laws = space
        .block_sizes
        .iter()
        .map(|&n| {
            let draws: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let sum = compensated_sum(draws.iter().copied());
            let mut law: Vec<f64> = draws.iter().map(|d| d / sum).collect();
            // absorb rounding so the block sums to one to machine precision
            let err = 1.0 - compensated_sum(law.iter().copied());
            let k = law.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(k, _)| k).unwrap_or(0);
            law[k] += err;
            law
        })
        .collect();
    ResponseTypeSCM::from_block_laws(space.clone(), laws).expect("Dirichlet draws form valid laws")
}

/// Reproducible random model from `seed`.
pub fn random_scm(space: &Arc<TypeSpace>, seed: u64) -> ResponseTypeSCM {
    random_scm_with(space, &mut rng_from_seed(seed))
}

/// The betting model: a fair coin `Z`, a bet `X` placed independently, and a
/// win `Y` exactly when the bet matches the coin. Diagram `Z -> Y <- X`.
pub fn betting_scm(p_bet_heads: f64) -> Result<ResponseTypeSCM, OracleError> {
    let g = crate::presets::fig1b();
    let space = TypeSpace::new(&g)?;
    let (z, x, y) = (g.node_index("Z")?, g.node_index("X")?, g.node_index("Y")?);
    // parents of Y in diagram order are (Z, X); win iff values agree
    let win = space
        .function_index(y, &[1, 0, 0, 1])
        .ok_or_else(|| OracleError::BadLaw("betting response missing".into()))?;
    let mut laws = vec![Vec::new(); 3];
    laws[z] = vec![0.5, 0.5];
    laws[x] = vec![1.0 - p_bet_heads, p_bet_heads];
    let mut y_law = vec![0.0; space.functions(y).len()];
    y_law[win] = 1.0;
    laws[y] = y_law;
    ResponseTypeSCM::from_node_laws(space, laws)
}
