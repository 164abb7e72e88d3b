use proptest::prelude::*;

use pns_bounds::bounds::{compute, pn_tian_pearl, pns_thm1, pns_tian_pearl, ps_tian_pearl, Estimand, EstimandSpec, Method, StratumInput};
use pns_bounds::oracle::{random_scm, TypeSpace};
use pns_bounds::presets;
use pns_bounds::tables::{Effects, ExperimentalTable, JointXY, Stratum};
use pns_bounds::bounds::ProblemData;

const TOL: f64 = 1e-9;

/// A joint over (X, Y) plus effects consistent with it.
fn coherent() -> impl Strategy<Value = (Effects, JointXY)> {
    (prop::array::uniform4(0.01f64..1.0), 0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(w, a, b)| {
        let s: f64 = w.iter().sum();
        let j = JointXY::new(w[0] / s, w[1] / s, w[2] / s, w[3] / s);
        let e = Effects::new(j.xy + a * j.p_xprime(), j.xprime_y + b * j.p_x());
        (e, j)
    })
}

fn strata() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((0.01f64..1.0, 0.0f64..=1.0, 0.0f64..=1.0), 2..6).prop_map(|v| {
        let s: f64 = v.iter().map(|t| t.0).sum();
        v.into_iter().map(|(w, a, b)| (w / s, a, b)).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn joint_data_only_narrows((e, j) in coherent()) {
        let with = pns_tian_pearl(&e, Some(&j)).unwrap();
        let without = pns_tian_pearl(&e, None).unwrap();
        prop_assert!(with.is_within(&without, TOL), "{with} vs {without}");
        prop_assert!(0.0 <= with.lower && with.upper <= 1.0);
    }

    #[test]
    fn ps_is_pn_with_labels_exchanged((e, j) in coherent()) {
        let swapped_e = Effects::new(1.0 - e.p_y_do_xprime, 1.0 - e.p_y_do_x);
        let swapped_j = JointXY::new(j.xprime_yprime, j.xprime_y, j.x_yprime, j.xy);
        let ps = ps_tian_pearl(&e, &j).unwrap();
        let pn = pn_tian_pearl(&swapped_e, &swapped_j).unwrap();
        prop_assert!((ps.lower - pn.lower).abs() < 1e-12 && (ps.upper - pn.upper).abs() < 1e-12);
    }

    #[test]
    fn stratified_bound_is_weighted_sum_of_conditionals(rows in strata()) {
        let strata: Vec<Stratum> = rows
            .iter()
            .enumerate()
            .map(|(k, &(w, a, b))| Stratum { value: k, label: None, p_z: w, p_y_do_x: a, p_y_do_xprime: b })
            .collect();
        let exp = ExperimentalTable::from_strata(vec!["Z".into()], strata.clone()).unwrap();
        let g = presets::fig1a_with_card(rows.len());
        let data = ProblemData { experimental: Some(exp), covariates: vec!["Z".into()], ..Default::default() };
        let t1 = compute(&g, &data, &EstimandSpec { estimand: Estimand::Pns, method: Method::Thm1, stratum: None }).unwrap();
        let (mut lo, mut hi) = (0.0, 0.0);
        for s in &strata {
            let spec = EstimandSpec { estimand: Estimand::Pns, method: Method::Conditional, stratum: Some(s.value.to_string()) };
            let c = compute(&g, &data, &spec).unwrap();
            lo += s.p_z * c.lower;
            hi += s.p_z * c.upper;
        }
        prop_assert!((t1.lower - lo).abs() < 1e-12 && (t1.upper - hi).abs() < 1e-12);

        let inputs: Vec<StratumInput> = strata.iter().map(|s| StratumInput { weight: s.p_z, effects: s.effects(), obs: None }).collect();
        let direct = pns_thm1(&inputs).unwrap();
        prop_assert!((direct.lower - t1.lower).abs() < 1e-12 && (direct.upper - t1.upper).abs() < 1e-12);
        let tp = pns_tian_pearl(&data.experimental.as_ref().unwrap().effects(), None).unwrap();
        prop_assert!(t1.interval().is_within(&tp, TOL));
    }

    #[test]
    fn bounds_contain_model_truth(seed in any::<u64>()) {
        let space = TypeSpace::new(&presets::confounded_pair()).unwrap();
        let m = random_scm(&space, seed);
        let obs = m.observables_of(&[]).unwrap();
        let e = obs.experimental.effects();
        let j = obs.observational.joint_xy("X", "Y").unwrap();
        prop_assert!(pns_tian_pearl(&e, Some(&j)).unwrap().contains(m.true_pns(), TOL));
        prop_assert!(pn_tian_pearl(&e, &j).unwrap().contains(m.true_pn().unwrap(), TOL));
        prop_assert!(ps_tian_pearl(&e, &j).unwrap().contains(m.true_ps().unwrap(), TOL));
    }

    #[test]
    fn d_separation_is_symmetric(a in 0usize..5, b in 0usize..5, mask in 0u32..32) {
        let g = presets::fig5();
        prop_assume!(a != b);
        let names: Vec<&str> = g.nodes().iter().map(|n| n.name.as_str()).collect();
        let given: Vec<&str> = (0..names.len()).filter(|&i| mask >> i & 1 == 1 && i != a && i != b).map(|i| names[i]).collect();
        let ab = g.d_separated(&[names[a]], &[names[b]], &given).unwrap();
        let ba = g.d_separated(&[names[b]], &[names[a]], &given).unwrap();
        prop_assert_eq!(ab, ba);
    }
}

#[test]
fn descendants_are_transitive() {
    for name in ["fig1a", "fig1b", "fig2", "fig3", "fig4", "fig5", "pair"] {
        let g = presets::by_name(name).unwrap();
        for n in g.nodes() {
            let d = g.descendants(&n.name).unwrap();
            for m in &d {
                let dd = g.descendants(m).unwrap();
                assert!(dd.is_subset(&d), "{name}: descendants of {m} not within those of {}", n.name);
            }
        }
    }
}
