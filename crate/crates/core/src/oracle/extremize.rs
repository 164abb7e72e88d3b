//! Extremes of an estimand over every law on joint response types that
//! reproduces the given observables.
//!
//! The feasible set is a polytope in the dense law vector; it ignores the
//! block factorization, so it is exact for single-block models (for example
//! the confounded treatment-outcome pair) and an outer relaxation otherwise.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::bounds::Estimand;

use super::{Observables, OracleError, TypeSpace};

/// Slack on each equality constraint in the LP.
const EQ_TOL: f64 = 1e-9;
/// Feasibility slack on nonnegativity in the grid search.
const GRID_TOL: f64 = 1e-12;
/// Largest type space handed to the LP.
const MAX_LP_TYPES: usize = 1 << 12;
/// Largest number of free directions the grid search explores.
const MAX_FREE_DIMS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

struct System {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    objective: Vec<f64>,
}

fn build(space: &TypeSpace, obs: &Observables, estimand: Estimand) -> Result<System, OracleError> {
    let n = space.len();
    if n > MAX_LP_TYPES {
        return Err(OracleError::TooLarge { what: "type space for extremization".into(), size: n, limit: MAX_LP_TYPES });
    }
    let g = space.graph();
    let (x, y) = (g.treatment(), g.outcome());
    let z: Vec<usize> = obs.covariates.iter().map(|c| g.node_index(c)).collect::<Result<_, _>>()?;

    let mut rows = vec![vec![1.0; n]];
    let mut rhs = vec![1.0];
    let add = |pred: &dyn Fn(u32, u32, u32) -> bool, value: f64, rows: &mut Vec<Vec<f64>>, rhs: &mut Vec<f64>| -> Result<(), OracleError> {
        let row: Vec<f64> = (0..n)
            .map(|t| {
                let (a, b, c) = space.worlds(t);
                if pred(a, b, c) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        if row.iter().all(|&v| v == 0.0) {
            if value.abs() > EQ_TOL {
                return Err(OracleError::Infeasible(format!("mass {value} on an impossible event")));
            }
            return Ok(());
        }
        rows.push(row);
        rhs.push(value);
        Ok(())
    };

    for (cell, &p) in obs.observational.probabilities().iter().enumerate() {
        add(&|nat, _, _| nat as usize == cell, p, &mut rows, &mut rhs)?;
    }
    let exp = &obs.experimental;
    add(&|_, t1, _| space.value(t1, y) == 1, exp.p_y_do_x, &mut rows, &mut rhs)?;
    add(&|_, _, t0| space.value(t0, y) == 1, exp.p_y_do_xprime, &mut rows, &mut rhs)?;
    for s in &exp.strata {
        let k = s.value;
        add(&|_, t1, _| space.value(t1, y) == 1 && space.compound(t1, &z) == k, s.p_z * s.p_y_do_x, &mut rows, &mut rhs)?;
        add(&|_, _, t0| space.value(t0, y) == 1 && space.compound(t0, &z) == k, s.p_z * s.p_y_do_xprime, &mut rows, &mut rhs)?;
    }
    if let Some(m) = obs.mediator.as_ref().filter(|m| m.source == crate::tables::MediatorSource::Experimental) {
        for k in 0..m.card() {
            add(&|_, t1, _| space.compound(t1, &z) == k, m.p_z_do_x[k], &mut rows, &mut rhs)?;
            add(&|_, _, t0| space.compound(t0, &z) == k, m.p_z_do_xprime[k], &mut rows, &mut rhs)?;
        }
    }

    let (p_xy, p_xpyp) = {
        let j = obs.observational.joint_xy(g.treatment_name(), g.outcome_name())?;
        (j.xy, j.xprime_yprime)
    };
    let objective: Vec<f64> = (0..n)
        .map(|t| {
            let (nat, t1, t0) = space.worlds(t);
            let (xv, yv, y1, y0) = (space.value(nat, x), space.value(nat, y), space.value(t1, y), space.value(t0, y));
            match estimand {
                Estimand::Pns => f64::from(u8::from(y1 == 1 && y0 == 0)),
                Estimand::Pn => f64::from(u8::from(xv == 1 && yv == 1 && y0 == 0)) / p_xy,
                Estimand::Ps => f64::from(u8::from(xv == 0 && yv == 0 && y1 == 1)) / p_xpyp,
            }
        })
        .collect();
    match estimand {
        Estimand::Pn if p_xy <= 0.0 => return Err(OracleError::Undefined("P(x, y) = 0".into())),
        Estimand::Ps if p_xpyp <= 0.0 => return Err(OracleError::Undefined("P(x', y') = 0".into())),
        _ => {}
    }
    Ok(System { rows, rhs, objective })
}

fn solve_lp(sys: &System, direction: OptimizationDirection) -> Result<f64, OracleError> {
    let mut lp = Problem::new(direction);
    let vars: Vec<_> = sys.objective.iter().map(|&c| lp.add_var(c, (0.0, 1.0))).collect();
    for (row, &b) in sys.rows.iter().zip(&sys.rhs) {
        let terms: Vec<_> = row.iter().enumerate().filter(|(_, &a)| a != 0.0).map(|(j, &a)| (vars[j], a)).collect();
        lp.add_constraint(terms.as_slice(), ComparisonOp::Le, b + EQ_TOL);
        lp.add_constraint(terms.as_slice(), ComparisonOp::Ge, b - EQ_TOL);
    }
    match lp.solve() {
        Ok(sol) => Ok(sol.objective()),
        Err(microlp::Error::Infeasible) => Err(OracleError::Infeasible("the linear constraints have no nonnegative solution".into())),
        Err(e) => Err(OracleError::Lp(e.to_string())),
    }
}

/// Minimum and maximum of `estimand` by linear programming.
pub fn extremize_estimand(space: &TypeSpace, obs: &Observables, estimand: Estimand) -> Result<Range, OracleError> {
    let sys = build(space, obs, estimand)?;
    let min = solve_lp(&sys, OptimizationDirection::Minimize)?;
    let max = solve_lp(&sys, OptimizationDirection::Maximize)?;
    Ok(Range { min: min.clamp(0.0, 1.0), max: max.clamp(0.0, 1.0) })
}

/// The equality system in reduced row-echelon form: pivot variable `i`
/// equals `rhs[i] - Σ_j coef[i][j] * free[j]`.
struct Reduced {
    pivots: Vec<usize>,
    free: Vec<usize>,
    coef: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

fn reduce(sys: &System) -> Result<Reduced, OracleError> {
    let n = sys.objective.len();
    let mut a: Vec<Vec<f64>> = sys.rows.iter().zip(&sys.rhs).map(|(r, &b)| r.iter().copied().chain([b]).collect()).collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..n {
        if r == a.len() {
            break;
        }
        let best = (r..a.len()).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if a[best][c].abs() < 1e-10 {
            continue;
        }
        a.swap(r, best);
        let p = a[r][c];
        a[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = a[r].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i != r && row[c] != 0.0 {
                let f = row[c];
                row.iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
            }
        }
        pivots.push(c);
        r += 1;
    }
    if a[r..].iter().any(|row| row[n].abs() > 1e-8) {
        return Err(OracleError::Infeasible("the observables are inconsistent".into()));
    }
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    let coef = a[..r].iter().map(|row| free.iter().map(|&f| row[f]).collect()).collect();
    let rhs = a[..r].iter().map(|row| row[n]).collect();
    Ok(Reduced { pivots, free, coef, rhs })
}

impl Reduced {
    /// Objective as `c0 + Σ_j d[j] free[j]`.
    fn objective(&self, obj: &[f64]) -> (f64, Vec<f64>) {
        let mut c0 = 0.0;
        let mut d: Vec<f64> = self.free.iter().map(|&f| obj[f]).collect();
        for (i, &p) in self.pivots.iter().enumerate() {
            c0 += obj[p] * self.rhs[i];
            for (j, dj) in d.iter_mut().enumerate() {
                *dj -= obj[p] * self.coef[i][j];
            }
        }
        (c0, d)
    }

    /// Feasible range of the last free variable with the others fixed.
    fn line(&self, outer: &[f64]) -> Option<(f64, f64)> {
        let last = self.free.len() - 1;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for (i, row) in self.coef.iter().enumerate() {
            let r = self.rhs[i] - outer.iter().zip(row).map(|(f, a)| f * a).sum::<f64>();
            let a = row[last];
            if a > 1e-15 {
                hi = hi.min((r + GRID_TOL) / a);
            } else if a < -1e-15 {
                lo = lo.max((r + GRID_TOL) / a);
            } else if r < -GRID_TOL {
                return None;
            }
        }
        (lo <= hi).then_some((lo, hi))
    }
}

fn grid_points(lo: &[f64], hi: &[f64], step: f64) -> Vec<Vec<f64>> {
    let mut pts = vec![Vec::new()];
    for (&l, &h) in lo.iter().zip(hi) {
        let count = ((h - l) / step).round() as usize;
        let axis: Vec<f64> = (0..=count).map(|k| (l + k as f64 * step).min(h)).collect();
        pts = pts.into_iter().flat_map(|p| axis.iter().map(move |&v| p.iter().copied().chain([v]).collect())).collect();
    }
    pts
}

/// Minimum and maximum of `estimand` by dense grid search over the free
/// directions left after eliminating the equality constraints.
///
/// All free directions but the last are gridded with spacing `step` over
/// `[0, 1]`; along the last one the objective is linear, so its extremes sit at
/// the ends of the feasible segment. The best grid point of each sense is then
/// refined on a grid one hundred times finer within one step of it.
pub fn extremize_estimand_grid(space: &TypeSpace, obs: &Observables, estimand: Estimand, step: f64) -> Result<Range, OracleError> {
    let sys = build(space, obs, estimand)?;
    let red = reduce(&sys)?;
    let (c0, d) = red.objective(&sys.objective);
    if red.free.is_empty() {
        if red.rhs.iter().any(|&v| v < -GRID_TOL) {
            return Err(OracleError::Infeasible("the unique solution has negative mass".into()));
        }
        return Ok(Range { min: c0.clamp(0.0, 1.0), max: c0.clamp(0.0, 1.0) });
    }
    if red.free.len() > MAX_FREE_DIMS {
        return Err(OracleError::TooLarge { what: "free dimensions for grid search".into(), size: red.free.len(), limit: MAX_FREE_DIMS });
    }
    let outer_dims = red.free.len() - 1;
    let last = d[outer_dims];
    let eval = |outer: &[f64]| -> Option<(f64, f64)> {
        let (lo, hi) = red.line(outer)?;
        let base = c0 + outer.iter().zip(&d).map(|(f, dj)| f * dj).sum::<f64>();
        let (a, b) = (base + last * lo, base + last * hi);
        Some((a.min(b), a.max(b)))
    };

    let search = |lo: &[f64], hi: &[f64], step: f64| -> (Option<(f64, Vec<f64>)>, Option<(f64, Vec<f64>)>) {
        let mut best_min: Option<(f64, Vec<f64>)> = None;
        let mut best_max: Option<(f64, Vec<f64>)> = None;
        for p in grid_points(lo, hi, step) {
            if let Some((mn, mx)) = eval(&p) {
                if best_min.as_ref().is_none_or(|(v, _)| mn < *v) {
                    best_min = Some((mn, p.clone()));
                }
                if best_max.as_ref().is_none_or(|(v, _)| mx > *v) {
                    best_max = Some((mx, p));
                }
            }
        }
        (best_min, best_max)
    };

    let zeros = vec![0.0; outer_dims];
    let ones = vec![1.0; outer_dims];
    let (coarse_min, coarse_max) = search(&zeros, &ones, step);
    let (Some((mut min, pmin)), Some((mut max, pmax))) = (coarse_min, coarse_max) else {
        return Err(OracleError::Infeasible("no grid point is feasible".into()));
    };
    if outer_dims > 0 {
        let window = |p: &[f64]| -> (Vec<f64>, Vec<f64>) { (p.iter().map(|v| (v - step).max(0.0)).collect(), p.iter().map(|v| (v + step).min(1.0)).collect()) };
        let (lo, hi) = window(&pmin);
        if let (Some((v, _)), _) = search(&lo, &hi, step / 100.0) {
            min = min.min(v);
        }
        let (lo, hi) = window(&pmax);
        if let (_, Some((v, _))) = search(&lo, &hi, step / 100.0) {
            max = max.max(v);
        }
    }
    Ok(Range { min: min.clamp(0.0, 1.0), max: max.clamp(0.0, 1.0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{betting_scm, random_scm, ResponseTypeSCM};
    use crate::presets;

    #[test]
    fn betting_observables_pin_pns() {
        let m = betting_scm(0.5).unwrap();
        let obs = m.observables_of(&["Z"]).unwrap();
        let r = extremize_estimand(m.space(), &obs, Estimand::Pns).unwrap();
        assert!((r.min - 0.5).abs() < 1e-7 && (r.max - 0.5).abs() < 1e-7, "{r:?}");
    }

    #[test]
    fn deterministic_benefit_pins_pns_to_one() {
        let space = crate::oracle::TypeSpace::new(&presets::confounded_pair()).unwrap();
        // every unit is a complier; half are treated
        let m = ResponseTypeSCM::from_block_laws(space.clone(), vec![vec![0.0, 0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0]]).unwrap();
        let obs = m.observables_of(&[]).unwrap();
        assert_eq!((obs.experimental.p_y_do_x, obs.experimental.p_y_do_xprime), (1.0, 0.0));
        for r in [extremize_estimand(&space, &obs, Estimand::Pns).unwrap(), extremize_estimand_grid(&space, &obs, Estimand::Pns, 1e-3).unwrap()] {
            assert!((r.min - 1.0).abs() < 1e-7 && (r.max - 1.0).abs() < 1e-7, "{r:?}");
        }
    }

    #[test]
    fn lp_and_grid_agree_on_pair() {
        let space = crate::oracle::TypeSpace::new(&presets::confounded_pair()).unwrap();
        for seed in 0..5 {
            let obs = random_scm(&space, seed).observables_of(&[]).unwrap();
            for est in [Estimand::Pns, Estimand::Pn, Estimand::Ps] {
                let lp = extremize_estimand(&space, &obs, est).unwrap();
                let grid = extremize_estimand_grid(&space, &obs, est, 1e-3).unwrap();
                assert!((lp.min - grid.min).abs() < 2e-3 && (lp.max - grid.max).abs() < 2e-3, "{est}: {lp:?} vs {grid:?}");
            }
        }
    }

    #[test]
    fn inconsistent_observables_are_infeasible() {
        let space = crate::oracle::TypeSpace::new(&presets::confounded_pair()).unwrap();
        let mut obs = random_scm(&space, 1).observables_of(&[]).unwrap();
        // P(y_x) below P(x, y) cannot be reproduced
        let j = obs.observational.joint_xy("X", "Y").unwrap();
        obs.experimental.p_y_do_x = j.xy / 2.0;
        assert!(matches!(extremize_estimand(&space, &obs, Estimand::Pns), Err(OracleError::Infeasible(_))));
        assert!(matches!(extremize_estimand_grid(&space, &obs, Estimand::Pns, 1e-2), Err(OracleError::Infeasible(_))));
    }
}
