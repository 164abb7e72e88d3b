//! d-separation via the moralized ancestral graph.
//!
//! Each latent edge `a <-> b` becomes a virtual root `U_ab` with children `a`
//! and `b`. Virtual roots are never conditioned on.

use super::{CausalDiagram, GraphError};

impl CausalDiagram {
    /// True iff `c` d-separates every node in `a` from every node in `b`.
    pub fn d_separated(&self, a: &[&str], b: &[&str], c: &[&str]) -> Result<bool, GraphError> {
        let (a, b, c) = (self.resolve(a)?, self.resolve(b)?, self.resolve(c)?);
        for (s, t) in [(&a, &b), (&a, &c), (&b, &c)] {
            if let Some(&i) = s.iter().find(|i| t.contains(i)) {
                return Err(GraphError::Overlap(self.name(i).to_string()));
            }
        }
        Ok(self.d_separated_idx(&a, &b, &c))
    }

    pub(crate) fn d_separated_idx(&self, a: &[usize], b: &[usize], c: &[usize]) -> bool {
        let n = self.len();
        let total = n + self.latents.len();

        // Parents in the augmented graph.
        let mut parents: Vec<Vec<usize>> = self.parents.clone();
        parents.resize(total, Vec::new());
        for (k, &(u, v)) in self.latents.iter().enumerate() {
            parents[u].push(n + k);
            parents[v].push(n + k);
        }

        // Ancestral closure of a ∪ b ∪ c.
        let mut keep = vec![false; total];
        let mut stack: Vec<usize> = a.iter().chain(b).chain(c).copied().collect();
        while let Some(u) = stack.pop() {
            if !keep[u] {
                keep[u] = true;
                stack.extend(&parents[u]);
            }
        }

        // Moralize: link every kept node to its parents, and co-parents to each other.
        let mut adj = vec![Vec::new(); total];
        for v in (0..total).filter(|&v| keep[v]) {
            let ps = &parents[v];
            for (i, &p) in ps.iter().enumerate() {
                adj[v].push(p);
                adj[p].push(v);
                for &q in &ps[i + 1..] {
                    adj[p].push(q);
                    adj[q].push(p);
                }
            }
        }

        let mut blocked = vec![false; total];
        for &v in c {
            blocked[v] = true;
        }
        let mut target = vec![false; total];
        for &v in b {
            target[v] = true;
        }
        let mut seen = vec![false; total];
        let mut stack: Vec<usize> = a.to_vec();
        while let Some(u) = stack.pop() {
            if seen[u] {
                continue;
            }
            if target[u] {
                return false;
            }
            seen[u] = true;
            for &w in &adj[u] {
                if keep[w] && !blocked[w] && !seen[w] {
                    stack.push(w);
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn confounder_fork_blocked_by_z() {
        let g = presets::fig1a().without_edge("X", "Y").unwrap();
        assert!(g.d_separated(&["X"], &["Y"], &["Z"]).unwrap());
        assert!(!g.d_separated(&["X"], &["Y"], &[]).unwrap());
    }

    #[test]
    fn mediator_chain_open_without_conditioning() {
        let g = presets::fig2().without_edge("X", "Y").unwrap();
        assert!(!g.d_separated(&["X"], &["Y"], &[]).unwrap());
    }

    #[test]
    fn fig5_backdoor_blocked() {
        let g = presets::fig5().without_edge("X", "Y").unwrap();
        assert!(g.d_separated(&["X"], &["Y"], &["Z1", "Z3"]).unwrap());
        // conditioning on the collider Z2 alone opens X <- Z1 -> Z2 <- Z3 -> Y
        assert!(!g.d_separated(&["X"], &["Y"], &["Z2"]).unwrap());
        assert!(g.d_separated(&["X"], &["Y"], &[]).unwrap());
    }

    #[test]
    fn latent_edge_is_a_fork() {
        let g = CausalDiagram::build(&[("X", 2), ("Y", 2), ("W", 2)], &[("W", "Y")], &[("X", "W")], "X", "Y").unwrap();
        assert!(!g.d_separated(&["X"], &["Y"], &[]).unwrap());
        assert!(g.d_separated(&["X"], &["Y"], &["W"]).unwrap());
    }

    #[test]
    fn overlapping_sets_rejected() {
        let g = presets::fig1a();
        assert_eq!(g.d_separated(&["X"], &["X"], &[]), Err(GraphError::Overlap("X".into())));
        assert_eq!(g.d_separated(&["X"], &["Y"], &["Y"]), Err(GraphError::Overlap("Y".into())));
        assert!(matches!(g.d_separated(&["X"], &["Q"], &[]), Err(GraphError::UnknownNode(_))));
    }
}
