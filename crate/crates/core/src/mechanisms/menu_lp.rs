//! LP-optimal menus for a finite-type buyer: incentive and participation
//! constraints over allocations in `[0,1]^m` and free payments, objective
//! the expected payment.
//!
//! The full program has `K^2` incentive rows, which is too large to keep
//! dense at `K = 400`. The solve therefore grows the active set: start with
//! participation and allocation bounds, solve, add the worst violated
//! incentive rows per type, repeat until the relaxed optimum satisfies every
//! one of the `K^2` constraints. The result is exact for the full program:
//! the relaxation can only overshoot, and it terminates feasible.

use crate::distributions::DiscreteDistribution;
use crate::mechanisms::lp::{lp_solve, LinearProgram, LpStatus, Sense};
use crate::mechanisms::menu::Menu;
use crate::mechanisms::{MechanismError, Method, Optimizer, RevenueReport};

/// Cap on the number of buyer types the dense solve accepts.
pub const MAX_TYPES: usize = 400;

const IC_FEAS_TOL: f64 = 1e-7;
const IC_GEN_TOL: f64 = 1e-9;

/// Revenue-optimal menu for a discrete type distribution. Types are the
/// atoms plus an origin type carrying any residual mass.
pub fn optimal_menu_lp(
    dist: &DiscreteDistribution,
    max_types: usize,
) -> Result<(Menu, RevenueReport), MechanismError> {
    let m = dist.m();
    let mut types: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dist.atoms().len() + 1);
    for a in dist.atoms() {
        if a.ln_scale.abs() > 700.0 {
            return Err(MechanismError::SizeLimit(
                "type values outside f64 range; the dense menu program needs plain values".into(),
            ));
        }
        let s = a.ln_scale.exp();
        types.push((a.point.iter().map(|&x| s * x).collect(), a.prob()));
    }
    let residual = dist.residual();
    if residual > 1e-15 {
        types.push((vec![0.0; m], residual));
    }
    let k = types.len();
    if k == 0 {
        let menu = Menu::new(m, vec![]).map_err(|_| MechanismError::BadInput("empty".into()))?;
        return Ok((
            menu,
            RevenueReport {
                ln_revenue: f64::NEG_INFINITY,
                method: Method::Exact,
                optimizer: Optimizer::Menu,
            },
        ));
    }
    if k > max_types.min(MAX_TYPES) {
        return Err(MechanismError::SizeLimit(format!(
            "{k} types exceeds the cap {}",
            max_types.min(MAX_TYPES)
        )));
    }

    // variables: q (k*m), then t+ (k), then t- (k)
    let n_vars = k * m + 2 * k;
    let qv = |i: usize, h: usize| i * m + h;
    let tp = |i: usize| k * m + i;
    let tm = |i: usize| k * m + k + i;

    let mut objective = vec![0.0; n_vars];
    for (i, (_, f)) in types.iter().enumerate() {
        objective[tp(i)] = *f;
        objective[tm(i)] = -*f;
    }

    // per-type row scale keeps the simplex well conditioned for large values
    let scale: Vec<f64> = types
        .iter()
        .map(|(v, _)| v.iter().fold(1.0f64, |acc, &x| acc.max(x.abs())))
        .collect();

    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::new();
    for (i, (v, _)) in types.iter().enumerate() {
        // participation: t_i <= v_i . q_i
        let mut row = vec![0.0; n_vars];
        for h in 0..m {
            row[qv(i, h)] = -v[h] / scale[i];
        }
        row[tp(i)] = 1.0 / scale[i];
        row[tm(i)] = -1.0 / scale[i];
        rows.push((row, Sense::Le, 0.0));
    }
    for i in 0..k {
        for h in 0..m {
            let mut row = vec![0.0; n_vars];
            row[qv(i, h)] = 1.0;
            rows.push((row, Sense::Le, 1.0));
        }
    }

    let ic_row = |i: usize, j: usize| -> (Vec<f64>, Sense, f64) {
        // v_i . q_j - t_j <= v_i . q_i - t_i
        let v = &types[i].0;
        let mut row = vec![0.0; n_vars];
        for h in 0..m {
            row[qv(j, h)] += v[h] / scale[i];
            row[qv(i, h)] -= v[h] / scale[i];
        }
        row[tp(j)] -= 1.0 / scale[i];
        row[tm(j)] += 1.0 / scale[i];
        row[tp(i)] += 1.0 / scale[i];
        row[tm(i)] -= 1.0 / scale[i];
        (row, Sense::Le, 0.0)
    };

    let mut active: Vec<(usize, usize)> = Vec::new();
    let mut solution = None;
    for _round in 0..200 {
        let lp = LinearProgram {
            maximize: objective.clone(),
            rows: rows
                .iter()
                .cloned()
                .chain(active.iter().map(|&(i, j)| ic_row(i, j)))
                .collect(),
        };
        let sol = lp_solve(&lp)?;
        if sol.status != LpStatus::Optimal {
            return Err(MechanismError::BadInput(format!(
                "menu program unexpectedly {:?}",
                sol.status
            )));
        }
        // scan every incentive constraint against the relaxed optimum
        let utility = |i: usize, j: usize| -> f64 {
            let v = &types[i].0;
            let q: f64 = (0..m).map(|h| v[h] * sol.x[qv(j, h)]).sum();
            q - (sol.x[tp(j)] - sol.x[tm(j)])
        };
        let mut new_rows: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..k {
            let own = utility(i, i);
            let mut worst: Vec<(f64, usize, usize)> = Vec::new();
            for j in 0..k {
                if i == j {
                    continue;
                }
                let viol = (utility(i, j) - own) / scale[i];
                if viol > IC_GEN_TOL {
                    worst.push((viol, i, j));
                }
            }
            worst.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.2.cmp(&b.2)));
            new_rows.extend(worst.into_iter().take(2));
        }
        if new_rows.is_empty() {
            solution = Some(sol);
            break;
        }
        for (_, i, j) in new_rows {
            if !active.contains(&(i, j)) {
                active.push((i, j));
            }
        }
    }
    let sol = solution.ok_or_else(|| {
        MechanismError::BadInput("incentive row generation failed to converge".into())
    })?;
    debug_assert!(sol.residual <= IC_FEAS_TOL);

    let entries: Vec<(Vec<f64>, f64)> = (0..k)
        .map(|i| {
            let q: Vec<f64> = (0..m).map(|h| sol.x[qv(i, h)].clamp(0.0, 1.0)).collect();
            let t = (sol.x[tp(i)] - sol.x[tm(i)]).max(0.0);
            (q, t)
        })
        .collect();
    let menu = Menu::new(m, entries)?;
    Ok((
        menu,
        RevenueReport {
            ln_revenue: sol.objective.max(0.0).ln(),
            method: Method::Exact,
            optimizer: Optimizer::Menu,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::menu::menu_revenue_discrete;
    use crate::mechanisms::pricing::{brev_discrete, srev_discrete};

    fn plain(m: usize, atoms: &[(&[f64], f64)]) -> DiscreteDistribution {
        DiscreteDistribution::from_plain(
            m,
            atoms.iter().map(|(v, p)| (v.to_vec(), *p)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_type_extracts_full_surplus() {
        let d = plain(2, &[(&[1.5, 2.5], 1.0)]);
        let (_, rev) = optimal_menu_lp(&d, 400).unwrap();
        assert!((rev.revenue() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn two_scaled_types_cannot_be_screened() {
        let d = plain(2, &[(&[1.0, 1.0], 0.5), (&[2.0, 2.0], 0.5)]);
        let (_, rev) = optimal_menu_lp(&d, 400).unwrap();
        assert!((rev.revenue() - 2.0).abs() < 1e-8, "{}", rev.revenue());
    }

    #[test]
    fn sandwiched_between_simple_benchmarks_and_welfare() {
        let d = plain(
            2,
            &[
                (&[1.0, 0.2], 0.25),
                (&[0.4, 1.6], 0.25),
                (&[2.0, 2.0], 0.25),
                (&[0.1, 0.5], 0.25),
            ],
        );
        let (menu, rev) = optimal_menu_lp(&d, 400).unwrap();
        let brev = brev_discrete(&d).revenue();
        let srev = srev_discrete(&d).revenue();
        assert!(rev.revenue() >= brev - 1e-8);
        assert!(rev.revenue() >= srev - 1e-8);
        assert!(rev.revenue() <= d.expected_welfare() + 1e-8);
        // the returned menu must actually achieve the reported revenue
        let achieved = menu_revenue_discrete(&menu, &d).unwrap();
        assert!((achieved.revenue() - rev.revenue()).abs() < 1e-6);
    }

    #[test]
    fn residual_origin_type_is_harmless() {
        let d = plain(2, &[(&[3.0, 1.0], 0.5)]);
        let (_, rev) = optimal_menu_lp(&d, 400).unwrap();
        assert!((rev.revenue() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn size_cap_enforced() {
        let atoms: Vec<(Vec<f64>, f64)> =
            (0..40).map(|i| (vec![1.0 + i as f64, 1.0], 0.025)).collect();
        let d = DiscreteDistribution::from_plain(2, atoms).unwrap();
        assert!(matches!(
            optimal_menu_lp(&d, 10),
            Err(MechanismError::SizeLimit(_))
        ));
    }
}
