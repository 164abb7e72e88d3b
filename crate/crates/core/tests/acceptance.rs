//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach stdout:
//! `cargo test --test acceptance`.

use std::time::{Duration, Instant};

use pns_bounds::bounds::{compute, Estimand, EstimandSpec, Interval, Method, ProblemData};
use pns_bounds::oracle::{betting_scm, extremize_estimand, random_scm, random_scm_with, run_validity, Family, TypeSpace};
use pns_bounds::presets;
use pns_bounds::problem::{bundled, Problem};
use pns_bounds::rng::{substream, Purpose};
use pns_bounds::sim::{run_simulation, summarize, DrawDistribution, SimPreset};

const EFFECT_TOL: f64 = 1e-3;
const DRUG_TP_TOL: f64 = 1e-3;
const DRUG_THM2_TOL: f64 = 5e-4;
const EXACT_TOL: f64 = 1e-12;
const SIM_TOL: f64 = 5e-3;
const CONTAIN_TOL: f64 = 1e-9;
const TIGHT_TOL: f64 = 2e-3;

const EXAMPLE_BUDGET: Duration = Duration::from_secs(1);
const SIM_BUDGET: Duration = Duration::from_secs(600);
const SIM_N: usize = 100_000;
const VALIDITY_N: usize = 10_000;
const CONTAINMENT_N: u64 = 10_000;
const TIGHTNESS_N: u64 = 100;
const SEED: u64 = 20_240_501;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn interval_is(iv: &Interval, lo: f64, hi: f64, tol: f64) -> bool {
    close(iv.lower, lo, tol) && close(iv.upper, hi, tol)
}

fn load(name: &str) -> Problem {
    Problem::from_json(bundled(name).expect("bundled problem")).expect("valid problem")
}

fn run(p: &Problem, estimand: Estimand, method: Method, stratum: Option<&str>) -> Interval {
    let spec = EstimandSpec { estimand, method, stratum: stratum.map(String::from) };
    compute(&p.graph, &p.data, &spec).unwrap_or_else(|e| panic!("{method}: {e}")).interval()
}

fn drug() -> Outcome {
    let start = Instant::now();
    let p = load("drug");
    let obs = p.data.observational.as_ref().unwrap();
    let adj = obs.adjustment_formula("X", "Y", &["Z"]).unwrap();
    let tp = run(&p, Estimand::Pns, Method::TianPearl, None);
    let thm2 = run(&p, Estimand::Pns, Method::Thm2, None);
    let elapsed = start.elapsed();
    let pass = close(adj.p_y_do_x, 0.597, EFFECT_TOL)
        && close(adj.p_y_do_xprime, 0.696, EFFECT_TOL)
        && interval_is(&tp, 0.0, 0.297, DRUG_TP_TOL)
        && interval_is(&thm2, 0.0, 0.0146, DRUG_THM2_TOL)
        && elapsed < EXAMPLE_BUDGET;
    check(
        pass,
        format!(
            "P(y_x)={:.4} P(y_x')={:.4} tian_pearl={tp} thm2={thm2} in {elapsed:.2?}",
            adj.p_y_do_x, adj.p_y_do_xprime
        ),
    )
}

fn inflammation() -> Outcome {
    let start = Instant::now();
    let p = load("inflammation");
    let tp = run(&p, Estimand::Pns, Method::TianPearl, None);
    let thm4 = run(&p, Estimand::Pns, Method::Thm4, None);
    let elapsed = start.elapsed();
    let pass = close(tp.upper, 0.5, EXACT_TOL) && close(thm4.upper, 0.1, EXACT_TOL) && elapsed < EXAMPLE_BUDGET;
    check(pass, format!("tian_pearl={tp} thm4={thm4} in {elapsed:.2?}"))
}

fn ancestry() -> Outcome {
    let p = load("ancestry");
    let got = [
        run(&p, Estimand::Pns, Method::TianPearl, None),
        run(&p, Estimand::Pns, Method::Thm1, None),
        run(&p, Estimand::Pns, Method::Conditional, Some("z")),
        run(&p, Estimand::Pns, Method::Conditional, Some("z'")),
    ];
    let want = [(0.1, 0.5), (0.275, 0.5), (0.55, 0.75), (0.0, 0.25)];
    let pass = got.iter().zip(want).all(|(iv, (lo, hi))| interval_is(iv, lo, hi, EXACT_TOL));
    check(pass, format!("{} {} {} {}", got[0], got[1], got[2], got[3]))
}

fn coin_toss() -> Outcome {
    let p = load("cointoss");
    let exp_only = ProblemData { observational: None, ..p.data.clone() };
    let spec = EstimandSpec { estimand: Estimand::Pns, method: Method::TianPearl, stratum: None };
    let tp = compute(&p.graph, &exp_only, &spec).unwrap().interval();
    let thm1 = run(&p, Estimand::Pns, Method::Thm1, None);
    let truth = betting_scm(0.5).unwrap().true_pns();
    let pass = interval_is(&tp, 0.0, 0.5, EXACT_TOL) && interval_is(&thm1, 0.5, 0.5, EXACT_TOL) && truth == 0.5;
    check(pass, format!("tian_pearl={tp} thm1={thm1} true_pns={truth}"))
}

fn simulation_summary() -> Outcome {
    let targets = [
        (SimPreset::Fig1a, [0.026, 0.026, 0.219, 0.166]),
        (SimPreset::Fig4, [0.050, 0.050, 0.267, 0.166]),
        (SimPreset::Fig5, [0.032, 0.032, 0.231, 0.166]),
        (SimPreset::Fig1aZ1024, [0.158, 0.158, 0.483, 0.166]),
    ];
    let start = Instant::now();
    let mut pass = true;
    let mut lines = Vec::new();
    for (preset, want) in targets {
        let g = preset.graph();
        let records = run_simulation(&g, &preset.covariates(), SIM_N, SEED, DrawDistribution::Exponential).unwrap();
        let s = summarize(&records).unwrap();
        let got = [s.avg_increased_lower, s.avg_decreased_upper, s.avg_gap_without, s.avg_gap_with];
        let ok = got.iter().zip(want).all(|(&a, b)| close(a, b, SIM_TOL));
        pass &= ok;
        lines.push(format!(
            "{}({:.4},{:.4},{:.4},{:.4}){}",
            preset.id(),
            got[0],
            got[1],
            got[2],
            got[3],
            if ok { "" } else { "!" }
        ));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < SIM_BUDGET;
    check(pass, format!("{} in {elapsed:.1?}", lines.join(" ")))
}

fn validity() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for family in Family::ALL {
        let rep = run_validity(family, VALIDITY_N, SEED).unwrap();
        pass &= rep.violations == 0 && rep.complier_failures == 0;
        let mut part = format!("{}: {} checks/{} violations", family, rep.rows.len(), rep.violations);
        if family == Family::Fig3 {
            part.push_str(&format!("/{} complier failures", rep.complier_failures));
        }
        parts.push(part);
    }
    check(pass, parts.join("; "))
}

fn pns(g: &pns_bounds::CausalDiagram, data: &ProblemData, method: Method) -> Interval {
    let spec = EstimandSpec { estimand: Estimand::Pns, method, stratum: None };
    compute(g, data, &spec).unwrap_or_else(|e| panic!("{method}: {e}")).interval()
}

fn containment() -> Outcome {
    // stratified bounds against Tian-Pearl, with and without the joint
    let mut thm1_bad = 0;
    let space = TypeSpace::new(&presets::fig1a()).unwrap();
    for i in 0..CONTAINMENT_N {
        let m = random_scm_with(&space, &mut substream(SEED, Purpose::DataSet, i));
        let obs = m.observables_of(&["Z"]).unwrap();
        for data in [obs.problem_data(), obs.experimental_only()] {
            let tp = pns(space.graph(), &data, Method::TianPearl);
            let t1 = pns(space.graph(), &data, Method::Thm1);
            if !t1.is_within(&tp, CONTAIN_TOL) {
                thm1_bad += 1;
            }
        }
    }
    // mediator upper bounds against the Tian-Pearl upper bound
    let mut med_bad = 0;
    let mut med_checks = 0;
    for (family, methods) in [(Family::Fig2, &[Method::Thm3][..]), (Family::Fig3, &[Method::Thm3, Method::Thm4][..])] {
        let space = TypeSpace::new(&family.graph()).unwrap();
        for i in 0..CONTAINMENT_N {
            let m = random_scm_with(&space, &mut substream(SEED ^ 1, Purpose::DataSet, i));
            let data = m.observables_of(family.covariates()).unwrap().problem_data();
            let tp = pns(space.graph(), &data, Method::TianPearl);
            for &method in methods {
                med_checks += 1;
                if pns(space.graph(), &data, method).upper > tp.upper + CONTAIN_TOL {
                    med_bad += 1;
                }
            }
        }
    }
    check(
        thm1_bad == 0 && med_bad == 0,
        format!(
            "thm1 outside tian_pearl: {thm1_bad}/{}; mediator upper above tian_pearl: {med_bad}/{med_checks}",
            2 * CONTAINMENT_N
        ),
    )
}

fn tightness() -> Outcome {
    let space = TypeSpace::new(&presets::confounded_pair()).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..TIGHTNESS_N {
        let obs = random_scm(&space, SEED + seed).observables_of(&[]).unwrap();
        let data = obs.problem_data();
        for estimand in [Estimand::Pns, Estimand::Pn] {
            let spec = EstimandSpec { estimand, method: Method::TianPearl, stratum: None };
            let tp = compute(space.graph(), &data, &spec).unwrap().interval();
            let r = extremize_estimand(&space, &obs, estimand).unwrap();
            worst = worst.max((r.min - tp.lower).abs()).max((r.max - tp.upper).abs());
        }
    }
    check(worst <= TIGHT_TOL, format!("{TIGHTNESS_N} instances, largest endpoint gap {worst:.2e}"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("drug example", drug),
        ("inflammation example", inflammation),
        ("ancestry example", ancestry),
        ("coin-toss example", coin_toss),
        ("random-CPT simulation summary", simulation_summary),
        ("validity suite", validity),
        ("containment suite", containment),
        ("tightness probe", tightness),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let o = f();
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(name);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed: {failed:?}");
        std::process::exit(1);
    }
}
