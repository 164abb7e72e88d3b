use pns_bounds::bounds::{compute, Estimand, EstimandSpec, Method, ProblemData, Term};
use pns_bounds::presets;
use pns_bounds::problem::{bundled, Problem};
use pns_bounds::{BoundsError, ExperimentalTable};

fn load(name: &str) -> Problem {
    Problem::from_json(bundled(name).unwrap()).unwrap()
}

fn spec(estimand: Estimand, method: Method) -> EstimandSpec {
    EstimandSpec { estimand, method, stratum: None }
}

#[test]
fn drug_auto_takes_backdoor_upper() {
    let p = load("drug");
    let r = p.solve().unwrap();
    assert_eq!(r.lower, 0.0);
    assert!((r.upper - 0.0146).abs() < 5e-4, "{}", r.upper);
    assert_eq!(r.upper_from, Method::Thm2);
    assert_eq!(r.binding_upper, Term::BackDoorUpper);
    assert!(r.component(Method::TianPearl).is_some());
    assert!(r.skipped.iter().any(|s| s.method == Method::Thm3));
}

#[test]
fn drug_pn_and_ps() {
    let p = load("drug");
    let pn = compute(&p.graph, &p.data, &spec(Estimand::Pn, Method::Auto)).unwrap();
    let ps = compute(&p.graph, &p.data, &spec(Estimand::Ps, Method::Auto)).unwrap();
    assert!((pn.upper - 0.3318).abs() < 1e-4, "{}", pn.upper);
    assert_eq!(pn.binding_upper, Term::PnUpperRatio);
    assert!(pn.lower == 0.0 && ps.lower == 0.0);
    assert!(ps.upper > pn.upper);
}

#[test]
fn inflammation_auto_takes_mediator_upper() {
    let r = load("inflammation").solve().unwrap();
    assert!(r.lower.abs() < 1e-12 && (r.upper - 0.1).abs() < 1e-12, "{}", r.summary());
    assert_eq!(r.upper_from, Method::Thm4);
    assert_eq!(r.binding_upper, Term::MediatorUpper);
}

#[test]
fn ancestry_auto_and_strata() {
    let p = load("ancestry");
    let r = p.solve().unwrap();
    assert!((r.lower - 0.275).abs() < 1e-12 && (r.upper - 0.5).abs() < 1e-12);
    assert_eq!(r.lower_from, Method::Thm1);
    let s = compute(&p.graph, &p.data, &spec(Estimand::Pns, Method::Auto).with_stratum("z")).unwrap();
    assert!((s.lower - 0.55).abs() < 1e-12 && (s.upper - 0.75).abs() < 1e-12);
    assert_eq!(s.stratum.as_deref(), Some("z"));
}

#[test]
fn ineligible_methods_are_errors_when_forced() {
    let p = load("drug");
    for m in [Method::Thm3, Method::Thm4] {
        let err = compute(&p.graph, &p.data, &spec(Estimand::Pns, m)).unwrap_err();
        assert!(matches!(err, BoundsError::Ineligible { .. }), "{err}");
    }
    let p = load("inflammation");
    let err = compute(&p.graph, &p.data, &spec(Estimand::Pns, Method::Thm2)).unwrap_err();
    assert!(matches!(err, BoundsError::Ineligible { .. } | BoundsError::MissingData(_)), "{err}");
}

#[test]
fn pn_needs_observational_joint() {
    let data = ProblemData {
        experimental: Some(ExperimentalTable::new(0.6, 0.3).unwrap()),
        ..Default::default()
    };
    let err = compute(&presets::confounded_pair(), &data, &spec(Estimand::Pn, Method::TianPearl)).unwrap_err();
    assert!(matches!(err, BoundsError::MissingData(_)), "{err}");
    assert!(EstimandSpec::new(Estimand::Pn, Method::Thm2).is_err());
}

#[test]
fn incoherent_data_reported() {
    // P(y_x) = 0.1 is below P(x, y) = 0.4; rows are (x', y'), (x', y), (x, y'), (x, y)
    let text = r#"{"preset": "pair",
        "observational": {"variables": [{"name": "X", "card": 2}, {"name": "Y", "card": 2}], "probabilities": [0.3, 0.2, 0.1, 0.4]},
        "experimental": {"p_y_do_x": 0.1, "p_y_do_xprime": 0.3}}"#;
    let p = Problem::from_json(text).unwrap();
    let err = p.solve().unwrap_err();
    assert!(err.is_incoherent() || matches!(err, BoundsError::Table(_)), "{err}");
}

#[test]
fn report_json_round_trips() {
    let r = load("ancestry").solve().unwrap();
    let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(v["estimand"], "pns");
    assert_eq!(v["method"], "auto");
    assert!(v["components"].as_array().unwrap().len() >= 2);
}
