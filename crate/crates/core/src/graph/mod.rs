//! Causal diagrams with latent-confounder (bidirected) edges.
//!
//! A diagram is a DAG over named, finite-cardinality nodes plus a set of
//! unordered latent edges, each standing for an unobserved common cause of its
//! two endpoints. One binary node is designated the treatment `X`, another
//! binary node the outcome `Y`.

mod classify;
mod dsep;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classify::{Criterion, Eligibility, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("node `{name}` has cardinality {card}; at least 2 is required")]
    BadCardinality { name: String, card: usize },
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),
    #[error("duplicate latent edge {0} <-> {1}")]
    DuplicateLatent(String, String),
    #[error("directed edges form a cycle through `{0}`")]
    Cycle(String),
    #[error("treatment and outcome must be distinct (both `{0}`)")]
    SameTreatmentOutcome(String),
    #[error("{role} `{name}` must be binary, has cardinality {card}")]
    NonBinary { role: &'static str, name: String, card: usize },
    #[error("node sets overlap on `{0}`")]
    Overlap(String),
    #[error("covariate set may not contain the {role} `{name}`")]
    ContainsEndpoint { role: &'static str, name: String },
    #[error("invalid diagram JSON: {0}")]
    Json(String),
}

/// A node of the diagram.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    pub card: usize,
}

impl Node {
    pub fn new(name: impl Into<String>, card: usize) -> Self {
        Node { name: name.into(), card }
    }
}

/// Serialized form of a diagram, matching the JSON interface:
/// `{"nodes":[{"name":..,"card":..}],"edges":[[p,c]],"latents":[[a,b]],"treatment":..,"outcome":..}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagramSpec {
    pub nodes: Vec<Node>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
    #[serde(default)]
    pub latents: Vec<(String, String)>,
    pub treatment: String,
    pub outcome: String,
}

/// A validated causal diagram. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalDiagram {
    nodes: Vec<Node>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    latents: Vec<(usize, usize)>,
    topo: Vec<usize>,
    treatment: usize,
    outcome: usize,
}

impl CausalDiagram {
    pub fn new(spec: DiagramSpec) -> Result<Self, GraphError> {
        let mut index = HashMap::new();
        for (i, node) in spec.nodes.iter().enumerate() {
            if node.card < 2 {
                return Err(GraphError::BadCardinality { name: node.name.clone(), card: node.card });
            }
            if index.insert(node.name.clone(), i).is_some() {
                return Err(GraphError::DuplicateNode(node.name.clone()));
            }
        }
        let lookup = |name: &str| index.get(name).copied().ok_or_else(|| GraphError::UnknownNode(name.to_string()));

        let n = spec.nodes.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut seen = HashSet::new();
        for (p, c) in &spec.edges {
            let (pi, ci) = (lookup(p)?, lookup(c)?);
            if pi == ci {
                return Err(GraphError::SelfLoop(p.clone()));
            }
            if !seen.insert((pi, ci)) {
                return Err(GraphError::DuplicateEdge(p.clone(), c.clone()));
            }
            parents[ci].push(pi);
            children[pi].push(ci);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }

        let mut latents = Vec::new();
        let mut seen = HashSet::new();
        for (a, b) in &spec.latents {
            let (ai, bi) = (lookup(a)?, lookup(b)?);
            if ai == bi {
                return Err(GraphError::SelfLoop(a.clone()));
            }
            let key = (ai.min(bi), ai.max(bi));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateLatent(a.clone(), b.clone()));
            }
            latents.push(key);
        }

        let topo = topological_order(&parents, &children).map_err(|i| GraphError::Cycle(spec.nodes[i].name.clone()))?;

        let treatment = lookup(&spec.treatment)?;
        let outcome = lookup(&spec.outcome)?;
        if treatment == outcome {
            return Err(GraphError::SameTreatmentOutcome(spec.treatment));
        }
        for (role, i) in [("treatment", treatment), ("outcome", outcome)] {
            if spec.nodes[i].card != 2 {
                return Err(GraphError::NonBinary { role, name: spec.nodes[i].name.clone(), card: spec.nodes[i].card });
            }
        }

        Ok(CausalDiagram { nodes: spec.nodes, index, parents, children, latents, topo, treatment, outcome })
    }

    /// Convenience constructor used by presets and tests.
    pub fn build(
        nodes: &[(&str, usize)],
        edges: &[(&str, &str)],
        latents: &[(&str, &str)],
        treatment: &str,
        outcome: &str,
    ) -> Result<Self, GraphError> {
        let own = |pairs: &[(&str, &str)]| pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        Self::new(DiagramSpec {
            nodes: nodes.iter().map(|(name, card)| Node::new(*name, *card)).collect(),
            edges: own(edges),
            latents: own(latents),
            treatment: treatment.to_string(),
            outcome: outcome.to_string(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let spec: DiagramSpec = serde_json::from_str(text).map_err(|e| GraphError::Json(e.to_string()))?;
        Self::new(spec)
    }

    pub fn to_spec(&self) -> DiagramSpec {
        let name = |i: usize| self.nodes[i].name.clone();
        let mut edges = Vec::new();
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                edges.push((name(p), name(c)));
            }
        }
        DiagramSpec {
            nodes: self.nodes.clone(),
            edges,
            latents: self.latents.iter().map(|&(a, b)| (name(a), name(b))).collect(),
            treatment: name(self.treatment),
            outcome: name(self.outcome),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_index(&self, name: &str) -> Result<usize, GraphError> {
        self.index.get(name).copied().ok_or_else(|| GraphError::UnknownNode(name.to_string()))
    }

    pub fn name(&self, i: usize) -> &str {
        &self.nodes[i].name
    }

    pub fn card(&self, i: usize) -> usize {
        self.nodes[i].card
    }

    /// Parents of node `i`, sorted by node index.
    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn latent_edges(&self) -> &[(usize, usize)] {
        &self.latents
    }

    pub fn has_edge(&self, parent: usize, child: usize) -> bool {
        self.parents[child].binary_search(&parent).is_ok()
    }

    pub fn has_latent(&self, a: usize, b: usize) -> bool {
        self.latents.contains(&(a.min(b), a.max(b)))
    }

    /// Node indices in a fixed topological order (ties broken by index).
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn treatment(&self) -> usize {
        self.treatment
    }

    pub fn outcome(&self) -> usize {
        self.outcome
    }

    pub fn treatment_name(&self) -> &str {
        self.name(self.treatment)
    }

    pub fn outcome_name(&self) -> &str {
        self.name(self.outcome)
    }

    pub(crate) fn resolve(&self, names: &[&str]) -> Result<Vec<usize>, GraphError> {
        names.iter().map(|n| self.node_index(n)).collect()
    }

    /// Reachability mask from `v` along directed edges, `v` excluded.
    pub(crate) fn descendant_mask(&self, v: usize) -> Vec<bool> {
        let mut mark = vec![false; self.len()];
        let mut stack: Vec<usize> = self.children[v].clone();
        while let Some(u) = stack.pop() {
            if !mark[u] {
                mark[u] = true;
                stack.extend(&self.children[u]);
            }
        }
        mark
    }

    /// Nodes with a directed path into `v`, `v` excluded.
    pub(crate) fn ancestor_mask(&self, v: usize) -> Vec<bool> {
        let mut mark = vec![false; self.len()];
        let mut stack: Vec<usize> = self.parents[v].clone();
        while let Some(u) = stack.pop() {
            if !mark[u] {
                mark[u] = true;
                stack.extend(&self.parents[u]);
            }
        }
        mark
    }

    /// All nodes reachable from `v` through directed edges, excluding `v`.
    pub fn descendants(&self, v: &str) -> Result<BTreeSet<String>, GraphError> {
        let i = self.node_index(v)?;
        Ok(self
            .descendant_mask(i)
            .into_iter()
            .enumerate()
            .filter(|(_, m)| *m)
            .map(|(j, _)| self.nodes[j].name.clone())
            .collect())
    }

    /// Copy of the diagram with every directed edge leaving `v` removed.
    pub fn without_edges_out_of(&self, v: &str) -> Result<CausalDiagram, GraphError> {
        let i = self.node_index(v)?;
        Ok(self.filtered(|p, _| p != i))
    }

    /// Copy of the diagram with the single edge `parent -> child` removed.
    pub fn without_edge(&self, parent: &str, child: &str) -> Result<CausalDiagram, GraphError> {
        let (p, c) = (self.node_index(parent)?, self.node_index(child)?);
        Ok(self.filtered(|a, b| !(a == p && b == c)))
    }

    fn filtered(&self, keep: impl Fn(usize, usize) -> bool) -> CausalDiagram {
        let mut g = self.clone();
        for c in 0..g.len() {
            g.parents[c].retain(|&p| keep(p, c));
        }
        for p in 0..g.len() {
            g.children[p].retain(|&c| keep(p, c));
        }
        g
    }

    /// Compact human-readable form, e.g. `Z->X, Z->Y, X->Y; X<->Z`.
    pub fn describe(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for CausalDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let spec = self.to_spec();
        let edges: Vec<String> = spec.edges.iter().map(|(a, b)| format!("{a}->{b}")).collect();
        write!(f, "{}", edges.join(", "))?;
        if !spec.latents.is_empty() {
            let lat: Vec<String> = spec.latents.iter().map(|(a, b)| format!("{a}<->{b}")).collect();
            write!(f, "; {}", lat.join(", "))?;
        }
        Ok(())
    }
}

impl Serialize for CausalDiagram {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_spec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for CausalDiagram {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let spec = DiagramSpec::deserialize(d)?;
        CausalDiagram::new(spec).map_err(serde::de::Error::custom)
    }
}

/// Kahn's algorithm with a min-heap so the order is canonical. On a cycle
/// returns some node that lies on it.
fn topological_order(parents: &[Vec<usize>], children: &[Vec<usize>]) -> Result<Vec<usize>, usize> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let n = parents.len();
    let mut indeg: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut heap: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| indeg[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(u)) = heap.pop() {
        order.push(u);
        for &c in &children[u] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                heap.push(Reverse(c));
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).find(|&i| indeg[i] > 0).unwrap_or(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn descendants_of_treatment_in_confounder_graph() {
        let g = presets::fig1a();
        assert_eq!(g.descendants("X").unwrap(), set(&["Y"]));
        assert_eq!(g.descendants("Z").unwrap(), set(&["X", "Y"]));
    }

    #[test]
    fn sink_has_no_descendants() {
        let g = presets::fig3();
        assert!(g.descendants("Y").unwrap().is_empty());
    }

    #[test]
    fn descendants_fig5_transitive() {
        let g = presets::fig5();
        assert_eq!(g.descendants("Z1").unwrap(), set(&["Z2", "X", "Y"]));
    }

    #[test]
    fn descendants_unknown_node() {
        let g = presets::fig1a();
        assert_eq!(g.descendants("W"), Err(GraphError::UnknownNode("W".into())));
    }

    #[test]
    fn rejects_cycle() {
        let err = CausalDiagram::build(&[("X", 2), ("Y", 2), ("Z", 2)], &[("X", "Y"), ("Y", "Z"), ("Z", "X")], &[], "X", "Y");
        assert!(matches!(err, Err(GraphError::Cycle(_))));
    }

    #[test]
    fn rejects_structural_defects() {
        let nodes = [("X", 2), ("Y", 2)];
        assert!(matches!(CausalDiagram::build(&nodes, &[("X", "X")], &[], "X", "Y"), Err(GraphError::SelfLoop(_))));
        assert!(matches!(
            CausalDiagram::build(&nodes, &[("X", "Y"), ("X", "Y")], &[], "X", "Y"),
            Err(GraphError::DuplicateEdge(..))
        ));
        assert!(matches!(
            CausalDiagram::build(&nodes, &[], &[("X", "Y"), ("Y", "X")], "X", "Y"),
            Err(GraphError::DuplicateLatent(..))
        ));
        assert!(matches!(CausalDiagram::build(&nodes, &[("X", "W")], &[], "X", "Y"), Err(GraphError::UnknownNode(_))));
        assert!(matches!(CausalDiagram::build(&nodes, &[], &[], "X", "X"), Err(GraphError::SameTreatmentOutcome(_))));
        assert!(matches!(
            CausalDiagram::build(&[("X", 3), ("Y", 2)], &[], &[], "X", "Y"),
            Err(GraphError::NonBinary { role: "treatment", .. })
        ));
        assert!(matches!(
            CausalDiagram::build(&[("X", 2), ("Y", 2), ("Z", 1)], &[], &[], "X", "Y"),
            Err(GraphError::BadCardinality { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"nodes":[{"name":"Z","card":2},{"name":"X","card":2},{"name":"Y","card":2}],
            "edges":[["Z","X"],["Z","Y"],["X","Y"]],"latents":[],"treatment":"X","outcome":"Y"}"#;
        let g = CausalDiagram::from_json(text).unwrap();
        assert_eq!(g, presets::fig1a());
        let back: CausalDiagram = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn removing_out_edges() {
        let g = presets::fig2().without_edges_out_of("X").unwrap();
        let x = g.node_index("X").unwrap();
        assert!(g.children(x).is_empty());
        assert!(g.has_latent(x, g.node_index("Z").unwrap()));
    }
}
