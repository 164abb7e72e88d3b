use crate::tables::{check_coherence, compensated_sum, CompensatedSum, Effects, JointXY, MediatorTables, ObservationalTable, Stratum, TableError, NORM_TOL};

use super::{BoundsError, Interval, Term};

fn check_effects(effects: &Effects) -> Result<(), BoundsError> {
    for (what, v) in [("P(y_x)", effects.p_y_do_x), ("P(y_x')", effects.p_y_do_xprime)] {
        if !(v.is_finite() && (-NORM_TOL..=1.0 + NORM_TOL).contains(&v)) {
            return Err(TableError::OutOfRange { what: what.into(), value: v }.into());
        }
    }
    Ok(())
}

fn check_joint(joint: &JointXY) -> Result<(), BoundsError> {
    let cells = [joint.xy, joint.x_yprime, joint.xprime_y, joint.xprime_yprime];
    if cells.iter().any(|c| !c.is_finite() || *c < -NORM_TOL) {
        return Err(TableError::OutOfRange { what: "observational cell".into(), value: cells.into_iter().fold(f64::NAN, f64::min) }.into());
    }
    let total = joint.total();
    if (total - 1.0).abs() > NORM_TOL {
        return Err(TableError::NotNormalized { what: "P(X, Y)".into(), sum: total }.into());
    }
    Ok(())
}

fn lower_arguments(e: &Effects, obs: Option<&JointXY>) -> Vec<(Term, f64)> {
    let mut v = vec![(Term::Zero, 0.0), (Term::ExpDiff, e.p_y_do_x - e.p_y_do_xprime)];
    if let Some(j) = obs {
        let p_y = j.p_y();
        v.push((Term::ObsLowerY, p_y - e.p_y_do_xprime));
        v.push((Term::ObsUpperY, e.p_y_do_x - p_y));
    }
    v
}

fn upper_arguments(e: &Effects, obs: Option<&JointXY>) -> Vec<(Term, f64)> {
    let mut v = vec![(Term::ExpTreated, e.p_y_do_x), (Term::ExpUntreatedFail, 1.0 - e.p_y_do_xprime)];
    if let Some(j) = obs {
        v.push((Term::ObsAgreement, j.xy + j.xprime_yprime));
        v.push((Term::ObsCrossed, e.p_y_do_x - e.p_y_do_xprime + j.x_yprime + j.xprime_y));
    }
    v
}

/// Structure-free PNS bounds. Observational arguments are dropped when no
/// observational joint is supplied.
pub fn pns_tian_pearl(effects: &Effects, obs: Option<&JointXY>) -> Result<Interval, BoundsError> {
    check_effects(effects)?;
    if let Some(j) = obs {
        check_joint(j)?;
        check_coherence(effects, j)?;
    }
    Interval::resolve(&lower_arguments(effects, obs), &upper_arguments(effects, obs))
}

/// Structure-free PN bounds; requires `P(x, y) > 0`.
pub fn pn_tian_pearl(effects: &Effects, obs: &JointXY) -> Result<Interval, BoundsError> {
    check_effects(effects)?;
    check_joint(obs)?;
    check_coherence(effects, obs)?;
    if obs.xy <= 0.0 {
        return Err(BoundsError::Undefined("PN conditions on (x, y), which has zero probability".into()));
    }
    let lower = [(Term::Zero, 0.0), (Term::PnLowerRatio, (obs.p_y() - effects.p_y_do_xprime) / obs.xy)];
    let upper = [(Term::One, 1.0), (Term::PnUpperRatio, ((1.0 - effects.p_y_do_xprime) - obs.xprime_yprime) / obs.xy)];
    Interval::resolve(&lower, &upper)
}

/// Structure-free PS bounds: PN of the problem with `x <-> x'`, `y <-> y'`.
pub fn ps_tian_pearl(effects: &Effects, obs: &JointXY) -> Result<Interval, BoundsError> {
    if obs.xprime_yprime <= 0.0 {
        return Err(BoundsError::Undefined("PS conditions on (x', y'), which has zero probability".into()));
    }
    let rename = |t: Term| match t {
        Term::PnLowerRatio => Term::PsLowerRatio,
        Term::PnUpperRatio => Term::PsUpperRatio,
        other => other,
    };
    let iv = pn_tian_pearl(&effects.relabeled(), &obs.relabeled())?;
    Ok(Interval { binding_lower: rename(iv.binding_lower), binding_upper: rename(iv.binding_upper), ..iv })
}

/// Population-specific PNS bounds: every term conditioned on one stratum.
/// `obs_given_z` is `P(X, Y | z)`.
pub fn pns_conditional(stratum: &Stratum, obs_given_z: Option<&JointXY>) -> Result<Interval, BoundsError> {
    if stratum.p_z <= 0.0 {
        return Err(BoundsError::Undefined(format!("stratum {} has zero probability", stratum.name())));
    }
    pns_tian_pearl(&stratum.effects(), obs_given_z)
}

/// One stratum of the non-descendant covariate bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StratumInput {
    /// `P(z)`
    pub weight: f64,
    /// `P(y_x|z)`, `P(y_{x'}|z)`
    pub effects: Effects,
    /// `P(X, Y | z)` when observational data exist.
    pub obs: Option<JointXY>,
}

/// PNS bounds for a covariate set with no descendant of the treatment:
/// the z-specific structure-free arguments, resolved per stratum and
/// averaged with weights `P(z)`. Strata with zero weight are skipped.
pub fn pns_thm1(strata: &[StratumInput]) -> Result<Interval, BoundsError> {
    if strata.is_empty() {
        return Err(BoundsError::MissingData("no strata".into()));
    }
    let total = compensated_sum(strata.iter().map(|s| s.weight));
    if strata.iter().any(|s| !(s.weight >= 0.0)) || (total - 1.0).abs() > NORM_TOL {
        return Err(TableError::NotNormalized { what: "stratum weights P(z)".into(), sum: total }.into());
    }
    let mut lower = CompensatedSum::default();
    let mut upper = CompensatedSum::default();
    for (k, s) in strata.iter().enumerate().filter(|(_, s)| s.weight > 0.0) {
        check_effects(&s.effects)?;
        if let Some(j) = &s.obs {
            check_joint(j)?;
            check_coherence(&s.effects, j).map_err(|e| match e {
                TableError::Incoherent(msg) => TableError::Incoherent(format!("stratum {k}: {msg}")),
                other => other,
            })?;
        }
        let iv = Interval::resolve(&lower_arguments(&s.effects, s.obs.as_ref()), &upper_arguments(&s.effects, s.obs.as_ref()))?;
        lower.add(iv.lower * s.weight);
        upper.add(iv.upper * s.weight);
    }
    Interval::from_ends((Term::StratifiedLower, lower.value()), (Term::StratifiedUpper, upper.value()))
}

/// Back-door bound from per-stratum masses `P(z, X, Y)`.
pub fn pns_backdoor(cells: &[JointXY]) -> Result<Interval, BoundsError> {
    let mut lower = CompensatedSum::default();
    let mut upper = CompensatedSum::default();
    let mut total = CompensatedSum::default();
    for (k, cell) in cells.iter().enumerate() {
        let p_z = cell.total();
        total.add(p_z);
        if p_z <= 0.0 {
            continue;
        }
        let a = cell.y_given_x().ok_or_else(|| TableError::ZeroCell(format!("(x, z={k})")))?;
        let b = cell.y_given_xprime().ok_or_else(|| TableError::ZeroCell(format!("(x', z={k})")))?;
        lower.add((a - b).max(0.0) * p_z);
        upper.add(a.min(1.0 - b) * p_z);
    }
    if (total.value() - 1.0).abs() > NORM_TOL {
        return Err(TableError::NotNormalized { what: "P(z, X, Y)".into(), sum: total.value() }.into());
    }
    Interval::from_ends((Term::BackDoorLower, lower.value()), (Term::BackDoorUpper, upper.value()))
}

/// Back-door bound on an observational table; purely observational.
pub fn pns_thm2(obs: &ObservationalTable, treatment: &str, outcome: &str, z: &[&str]) -> Result<Interval, BoundsError> {
    let cells = obs.strata(treatment, outcome, z)?;
    pns_backdoor(&cells).map_err(|e| match e {
        BoundsError::Table(TableError::ZeroCell(_)) => {
            let zpos: Vec<usize> = z.iter().map(|n| obs.position(n)).collect::<Result<_, _>>().unwrap_or_default();
            let bad = cells
                .iter()
                .enumerate()
                .find_map(|(k, c)| {
                    if c.total() <= 0.0 {
                        None
                    } else if c.p_x() <= 0.0 {
                        Some(obs.describe_cell(treatment, 1, &zpos, k))
                    } else if c.p_xprime() <= 0.0 {
                        Some(obs.describe_cell(treatment, 0, &zpos, k))
                    } else {
                        None
                    }
                })
                .unwrap_or_default();
            TableError::ZeroCell(bad).into()
        }
        other => other,
    })
}

fn mediator_interval(effects: &Effects, obs: Option<&JointXY>, core: f64) -> Result<Interval, BoundsError> {
    let tp = pns_tian_pearl(effects, obs)?;
    let mut upper = upper_arguments(effects, obs);
    upper.push((Term::MediatorUpper, core));
    let mut iv = Interval::resolve(&lower_arguments(effects, obs), &upper)?;
    // lower bound is the structure-free one by construction
    iv.lower = tp.lower.min(iv.upper);
    iv.binding_lower = tp.binding_lower;
    Ok(iv)
}

/// Mediator with a direct effect: the structure-free bound with the extra
/// upper argument `Σ_z Σ_z' min{P(y|z,x), P(y'|z',x')} min{P(z_x), P(z'_{x'})}`.
pub fn pns_thm3(effects: &Effects, obs: Option<&JointXY>, med: &MediatorTables) -> Result<Interval, BoundsError> {
    let (treated, untreated) = med
        .by_arm()
        .ok_or_else(|| BoundsError::MissingData("P(y|z,x) and P(y|z,x') are required for the partial-mediator bound".into()))?;
    let mut core = CompensatedSum::default();
    for z in 0..med.card() {
        for zp in 0..med.card() {
            let outcome = treated[z].min(1.0 - untreated[zp]);
            let mediator = med.p_z_do_x[z].min(med.p_z_do_xprime[zp]);
            core.add(outcome * mediator);
        }
    }
    mediator_interval(effects, obs, core.value())
}

/// Pure mediator: extra upper argument
/// `Σ_z Σ_{z'≠z} min{P(y|z), P(y'|z')} min{P(z|x), P(z'|x')}`.
pub fn pns_thm4(effects: &Effects, obs: Option<&JointXY>, med: &MediatorTables) -> Result<Interval, BoundsError> {
    let p_y = med
        .p_y_given_z
        .as_ref()
        .ok_or_else(|| BoundsError::MissingData("P(y|z) is required for the pure-mediator bound".into()))?;
    let mut core = CompensatedSum::default();
    for z in 0..med.card() {
        for zp in (0..med.card()).filter(|&zp| zp != z) {
            let outcome = p_y[z].min(1.0 - p_y[zp]);
            let mediator = med.p_z_do_x[z].min(med.p_z_do_xprime[zp]);
            core.add(outcome * mediator);
        }
    }
    mediator_interval(effects, obs, core.value())
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::tables::{MediatorSource, Variable};

    fn drug_table() -> ObservationalTable {
        let vars = vec![Variable::new("Z", 2), Variable::new("X", 2), Variable::new("Y", 2)];
        ObservationalTable::from_counts(vars, &[107.0, 13.0, 109.0, 1.0, 2.0, 114.0, 41.0, 313.0]).unwrap()
    }

    /// Direct evaluation of the back-door formulas on the exact drug-study fractions.
    fn drug_backdoor_by_hand() -> (f64, f64) {
        let (pz_w, pz_m) = (230.0 / 700.0, 470.0 / 700.0);
        let (a_w, b_w): (f64, f64) = (1.0 / 110.0, 13.0 / 120.0);
        let (a_m, b_m): (f64, f64) = (313.0 / 354.0, 114.0 / 116.0);
        let lower = (a_w - b_w).max(0.0) * pz_w + (a_m - b_m).max(0.0) * pz_m;
        let upper = a_w.min(1.0 - b_w) * pz_w + a_m.min(1.0 - b_m) * pz_m;
        (lower, upper)
    }

    fn stratum(p_z: f64, a: f64, b: f64) -> Stratum {
        Stratum { value: 0, label: None, p_z, p_y_do_x: a, p_y_do_xprime: b }
    }

    #[test]
    fn tian_pearl_drug_study() {
        let t = drug_table();
        let e = t.adjustment_formula("X", "Y", &["Z"]).unwrap();
        let j = t.joint_xy("X", "Y").unwrap();
        let iv = pns_tian_pearl(&e.effects(), Some(&j)).unwrap();
        assert_eq!(iv.lower, 0.0);
        assert!((iv.upper - 0.297).abs() < 1e-3, "{}", iv.upper);
        assert_eq!(iv.binding_upper, Term::ObsCrossed);
    }

    #[test]
    fn tian_pearl_experimental_only() {
        let iv = pns_tian_pearl(&Effects::new(0.5, 0.4), None).unwrap();
        assert!((iv.lower - 0.1).abs() < 1e-12 && (iv.upper - 0.5).abs() < 1e-12);
        assert_eq!(iv.binding_lower, Term::ExpDiff);
    }

    #[test]
    fn tian_pearl_deterministic_effect() {
        let j = JointXY::from_conditionals(0.5, 1.0, 0.0);
        let iv = pns_tian_pearl(&Effects::new(1.0, 0.0), Some(&j)).unwrap();
        assert_eq!((iv.lower, iv.upper), (1.0, 1.0));
    }

    #[test]
    fn tian_pearl_rejects_incoherent_tables() {
        let j = JointXY::from_conditionals(0.5, 0.8, 0.2);
        let err = pns_tian_pearl(&Effects::new(0.2, 0.3), Some(&j)).unwrap_err();
        assert!(err.is_incoherent());
    }

    #[test]
    fn pn_zero_numerators() {
        // P(y) = P(y_x') gives lower 0
        let j = JointXY::from_conditionals(0.5, 0.8, 0.2);
        let iv = pn_tian_pearl(&Effects::new(0.6, j.p_y()), &j).unwrap();
        assert_eq!(iv.lower, 0.0);
        // P(y'_x') = P(x',y') forces PN = 0
        let iv = pn_tian_pearl(&Effects::new(0.6, 1.0 - j.xprime_yprime), &j).unwrap();
        assert_eq!((iv.lower, iv.upper), (0.0, 0.0));
        assert_eq!(iv.binding_upper, Term::PnUpperRatio);
    }

    #[test]
    fn pn_undefined_without_treated_recoveries() {
        let j = JointXY::new(0.0, 0.5, 0.25, 0.25);
        assert!(matches!(pn_tian_pearl(&Effects::new(0.2, 0.4), &j), Err(BoundsError::Undefined(_))));
        let j = JointXY::new(0.5, 0.25, 0.25, 0.0);
        assert!(matches!(ps_tian_pearl(&Effects::new(0.6, 0.4), &j), Err(BoundsError::Undefined(_))));
    }

    #[test]
    fn ps_equals_pn_on_symmetric_problem() {
        // P(y_x) = P(y'_x'), P(x,y) = P(x',y')
        let j = JointXY::new(0.3, 0.2, 0.2, 0.3);
        let e = Effects::new(0.55, 0.45);
        let pn = pn_tian_pearl(&e, &j).unwrap();
        let ps = ps_tian_pearl(&e, &j).unwrap();
        assert!((pn.lower - ps.lower).abs() < 1e-15 && (pn.upper - ps.upper).abs() < 1e-15);
    }

    #[test]
    fn ps_point_when_everyone_untreated_and_failing() {
        let j = JointXY::new(0.0, 0.0, 0.0, 1.0);
        let iv = ps_tian_pearl(&Effects::new(0.35, 0.0), &j).unwrap();
        assert!((iv.lower - 0.35).abs() < 1e-15 && (iv.upper - 0.35).abs() < 1e-15);
    }

    #[test]
    fn conditional_ancestry_rows() {
        let iv = pns_conditional(&stratum(0.5, 0.75, 0.2), None).unwrap();
        assert!((iv.lower - 0.55).abs() < 1e-12 && (iv.upper - 0.75).abs() < 1e-12);
        let iv = pns_conditional(&stratum(0.5, 0.25, 0.6), None).unwrap();
        assert!(iv.lower.abs() < 1e-12 && (iv.upper - 0.25).abs() < 1e-12);
        let iv = pns_conditional(&stratum(0.5, 1.0, 0.0), None).unwrap();
        assert_eq!((iv.lower, iv.upper), (1.0, 1.0));
        assert!(matches!(pns_conditional(&stratum(0.0, 1.0, 0.0), None), Err(BoundsError::Undefined(_))));
    }

    fn exp_strata(rows: &[(f64, f64, f64)]) -> Vec<StratumInput> {
        rows.iter().map(|&(w, a, b)| StratumInput { weight: w, effects: Effects::new(a, b), obs: None }).collect()
    }

    #[test]
    fn thm1_ancestry_and_coin() {
        let iv = pns_thm1(&exp_strata(&[(0.5, 0.75, 0.2), (0.5, 0.25, 0.6)])).unwrap();
        assert!((iv.lower - 0.275).abs() < 1e-12 && (iv.upper - 0.5).abs() < 1e-12);
        let iv = pns_thm1(&exp_strata(&[(0.5, 1.0, 0.0), (0.5, 0.0, 1.0)])).unwrap();
        assert_eq!((iv.lower, iv.upper), (0.5, 0.5));
    }

    #[test]
    fn thm1_single_stratum_is_tian_pearl() {
        let j = JointXY::from_conditionals(0.4, 0.7, 0.3);
        let e = Effects::new(0.6, 0.35);
        let iv = pns_thm1(&[StratumInput { weight: 1.0, effects: e, obs: Some(j) }]).unwrap();
        let tp = pns_tian_pearl(&e, Some(&j)).unwrap();
        assert_eq!((iv.lower, iv.upper), (tp.lower, tp.upper));
    }

    #[test]
    fn thm1_requires_normalized_weights() {
        assert!(pns_thm1(&exp_strata(&[(0.5, 0.75, 0.2), (0.4, 0.25, 0.6)])).is_err());
    }

    #[test]
    fn thm2_drug_study() {
        let iv = pns_thm2(&drug_table(), "X", "Y", &["Z"]).unwrap();
        let (lo, hi) = drug_backdoor_by_hand();
        assert_eq!(lo, 0.0);
        assert!((iv.lower - lo).abs() < 1e-15);
        assert!((iv.upper - hi).abs() < 1e-15);
        assert!((iv.upper - 0.0146).abs() < 5e-4, "{}", iv.upper);
    }

    #[test]
    fn thm2_no_stratum_effect() {
        // P(y|x,z) = P(y|x',z) in both strata
        let cells = [JointXY::from_conditionals(0.3, 0.6, 0.6), JointXY::from_conditionals(0.8, 0.1, 0.1)];
        let cells: Vec<JointXY> = cells.iter().zip([0.4, 0.6]).map(|(c, w)| scale(c, w)).collect();
        let iv = pns_backdoor(&cells).unwrap();
        assert_eq!(iv.lower, 0.0);
        assert!((iv.upper - (0.4 * 0.4 + 0.6 * 0.1)).abs() < 1e-15);
    }

    #[test]
    fn thm2_deterministic_coin() {
        let cells = [scale(&JointXY::from_conditionals(0.5, 1.0, 0.0), 0.5), scale(&JointXY::from_conditionals(0.5, 0.0, 1.0), 0.5)];
        let iv = pns_backdoor(&cells).unwrap();
        assert_eq!((iv.lower, iv.upper), (0.5, 0.5));
    }

    #[test]
    fn thm2_zero_cell() {
        let vars = vec![Variable::new("Z", 2), Variable::new("X", 2), Variable::new("Y", 2)];
        let t = ObservationalTable::new(vars, vec![0.1, 0.1, 0.0, 0.0, 0.2, 0.2, 0.2, 0.2]).unwrap();
        match pns_thm2(&t, "X", "Y", &["Z"]) {
            Err(BoundsError::Table(TableError::ZeroCell(c))) => assert_eq!(c, "(X=1, Z=0)"),
            other => panic!("{other:?}"),
        }
    }

    fn scale(c: &JointXY, w: f64) -> JointXY {
        JointXY::new(c.xy * w, c.x_yprime * w, c.xprime_y * w, c.xprime_yprime * w)
    }

    fn pooled(p_zx: [f64; 2], p_zxp: [f64; 2], p_y: [f64; 2]) -> MediatorTables {
        MediatorTables::new(vec!["Z".into()], MediatorSource::Observational, p_zx.to_vec(), p_zxp.to_vec(), Some(p_y.to_vec()), None, None).unwrap()
    }

    #[test]
    fn thm4_inflammation() {
        let med = pooled([0.1, 0.9], [0.1, 0.9], [0.5, 0.5]);
        let effects = med.implied_effects().unwrap();
        let tp = pns_tian_pearl(&effects, None).unwrap();
        assert!((tp.upper - 0.5).abs() < 1e-12);
        let iv = pns_thm4(&effects, None, &med).unwrap();
        assert!((iv.upper - 0.1).abs() < 1e-12);
        assert_eq!(iv.binding_upper, Term::MediatorUpper);
        assert_eq!(iv.lower, tp.lower);
    }

    #[test]
    fn thm4_deterministic_chain() {
        // value 1 = z, value 0 = z'
        let med = pooled([0.0, 1.0], [1.0, 0.0], [0.0, 1.0]);
        let iv = pns_thm4(&med.implied_effects().unwrap(), None, &med).unwrap();
        assert_eq!((iv.lower, iv.upper), (1.0, 1.0));
    }

    #[test]
    fn thm4_constant_outcome() {
        let med = pooled([0.3, 0.7], [0.6, 0.4], [1.0, 1.0]);
        let iv = pns_thm4(&med.implied_effects().unwrap(), None, &med).unwrap();
        assert_eq!((iv.lower, iv.upper), (0.0, 0.0));
    }

    #[test]
    fn thm3_constant_outcome_kills_upper() {
        let med = MediatorTables::new(
            vec!["Z".into()],
            MediatorSource::Experimental,
            vec![0.4, 0.6],
            vec![0.4, 0.6],
            None,
            Some(vec![0.0, 0.0]),
            Some(vec![0.0, 0.0]),
        )
        .unwrap();
        // y never occurs under either arm
        let iv = pns_thm3(&Effects::new(0.0, 0.0), None, &med).unwrap();
        assert_eq!(iv.upper, 0.0);
    }

    #[test]
    fn thm3_single_mediator_value() {
        let med = MediatorTables::new(vec!["Z".into()], MediatorSource::Experimental, vec![1.0], vec![1.0], None, Some(vec![0.7]), Some(vec![0.4])).unwrap();
        let e = Effects::new(0.7, 0.4);
        let iv = pns_thm3(&e, None, &med).unwrap();
        // the extra argument equals min{P(y|x), P(y'|x')} = 0.6 here
        assert!((iv.upper - 0.6).abs() < 1e-15);
        assert!(matches!(pns_thm3(&e, None, &pooled([0.5, 0.5], [0.5, 0.5], [0.5, 0.5])), Err(BoundsError::MissingData(_))));
    }
}
