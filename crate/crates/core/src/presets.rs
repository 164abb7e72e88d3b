//! The small diagrams used throughout: confounder, outcome covariate, partial
//! and pure mediator, the two-covariate and three-covariate back-door graphs,
//! and the bare treatment-outcome pair.

use crate::graph::CausalDiagram;

fn must(g: Result<CausalDiagram, crate::graph::GraphError>) -> CausalDiagram {
    g.expect("preset diagrams are valid")
}

/// `Z -> X, Z -> Y, X -> Y` with a binary confounder.
pub fn fig1a() -> CausalDiagram {
    fig1a_with_card(2)
}

/// The confounder graph with a `card`-valued `Z`.
pub fn fig1a_with_card(card: usize) -> CausalDiagram {
    must(CausalDiagram::build(&[("Z", card), ("X", 2), ("Y", 2)], &[("Z", "X"), ("Z", "Y"), ("X", "Y")], &[], "X", "Y"))
}

/// `Z -> Y, X -> Y`: a covariate that only affects the outcome.
pub fn fig1b() -> CausalDiagram {
    must(CausalDiagram::build(&[("Z", 2), ("X", 2), ("Y", 2)], &[("Z", "Y"), ("X", "Y")], &[], "X", "Y"))
}

/// `X -> Z -> Y, X -> Y` with a latent common cause of `X` and `Z`.
pub fn fig2() -> CausalDiagram {
    must(CausalDiagram::build(&[("X", 2), ("Z", 2), ("Y", 2)], &[("X", "Z"), ("Z", "Y"), ("X", "Y")], &[("X", "Z")], "X", "Y"))
}

/// `X -> Z -> Y`: a mediator with no direct effect.
pub fn fig3() -> CausalDiagram {
    must(CausalDiagram::build(&[("X", 2), ("Z", 2), ("Y", 2)], &[("X", "Z"), ("Z", "Y")], &[], "X", "Y"))
}

/// `Z1, Z2 -> X`, `Z1, Z2 -> Y`, `X -> Y`.
pub fn fig4() -> CausalDiagram {
    must(CausalDiagram::build(
        &[("Z1", 2), ("Z2", 2), ("X", 2), ("Y", 2)],
        &[("Z1", "X"), ("Z1", "Y"), ("Z2", "X"), ("Z2", "Y"), ("X", "Y")],
        &[],
        "X",
        "Y",
    ))
}

/// `Z1 -> Z2 <- Z3`, `Z1 -> X`, `Z3 -> Y`, `X -> Y`.
pub fn fig5() -> CausalDiagram {
    must(CausalDiagram::build(
        &[("Z1", 2), ("Z2", 2), ("Z3", 2), ("X", 2), ("Y", 2)],
        &[("Z1", "Z2"), ("Z1", "X"), ("Z3", "Z2"), ("Z3", "Y"), ("X", "Y")],
        &[],
        "X",
        "Y",
    ))
}

/// `X -> Y` with arbitrary latent confounding; the structure-free setting.
pub fn confounded_pair() -> CausalDiagram {
    must(CausalDiagram::build(&[("X", 2), ("Y", 2)], &[("X", "Y")], &[("X", "Y")], "X", "Y"))
}

/// Look up a diagram by its CLI name.
pub fn by_name(name: &str) -> Option<CausalDiagram> {
    Some(match name {
        "fig1a" => fig1a(),
        "fig1a-z1024" => fig1a_with_card(1024),
        "fig1b" => fig1b(),
        "fig2" => fig2(),
        "fig3" => fig3(),
        "fig4" => fig4(),
        "fig5" => fig5(),
        "pair" => confounded_pair(),
        _ => return None,
    })
}
