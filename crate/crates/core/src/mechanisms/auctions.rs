//! Multi-buyer single-item auctions over the grand bundle: second price, the
//! lookahead auction with a conditional reserve, and the LP-optimal
//! dominant-strategy truthful ex-post individually-rational benchmark.

use crate::distributions::JointDiscreteDistribution;
use crate::mechanisms::lp::{lp_solve, LinearProgram, LpStatus, Sense};
use crate::mechanisms::pricing::monopoly_price;
use crate::mechanisms::{MechanismError, Method, Optimizer, RevenueReport};

/// Second-price auction for the grand bundle: highest bundle value wins
/// (ties to the lowest index) and pays the second-highest. Exact expectation.
pub fn second_price_bundle(joint: &JointDiscreteDistribution) -> Result<RevenueReport, MechanismError> {
    if joint.n < 2 {
        return Err(MechanismError::NeedsTwoBuyers);
    }
    let mut revenue = 0.0;
    for (bundles, p) in joint.bundle_profiles() {
        let (_, second) = top_two(&bundles);
        revenue += p * second;
    }
    Ok(RevenueReport {
        ln_revenue: revenue.ln(),
        method: Method::Exact,
        optimizer: Optimizer::Auction,
    })
}

fn top_two(vals: &[f64]) -> (usize, f64) {
    let mut win = 0;
    for (i, &v) in vals.iter().enumerate() {
        if v > vals[win] {
            win = i;
        }
    }
    let second = vals
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != win)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    (win, second)
}

/// The lookahead auction: the highest bundle bidder is offered the better of
/// the second-highest bid and the monopoly price of their bundle-value
/// distribution conditioned on the other buyers' exact values; they pay the
/// offer iff their value meets it. Exact expectation over profiles.
pub fn ronen_lookahead(joint: &JointDiscreteDistribution) -> Result<RevenueReport, MechanismError> {
    if joint.n < 2 {
        return Err(MechanismError::NeedsTwoBuyers);
    }
    let profiles = joint.bundle_profiles();
    if profiles.len() > 1_000_000 {
        return Err(MechanismError::SizeLimit("profile enumeration above 1e6".into()));
    }
    let mut revenue = 0.0;
    for (bundles, p) in &profiles {
        let (winner, floor) = top_two(bundles);
        let offer = lookahead_offer(&profiles, bundles, winner, floor);
        if bundles[winner] >= offer {
            revenue += p * offer;
        }
    }
    Ok(RevenueReport {
        ln_revenue: revenue.ln(),
        method: Method::Exact,
        optimizer: Optimizer::Auction,
    })
}

/// Monopoly offer to `winner` given everyone else's exact bundle values.
fn lookahead_offer(
    profiles: &[(Vec<f64>, f64)],
    bundles: &[f64],
    winner: usize,
    floor: f64,
) -> f64 {
    let conditional: Vec<(f64, f64)> = profiles
        .iter()
        .filter(|(other, _)| {
            other
                .iter()
                .enumerate()
                .all(|(i, &v)| i == winner || v == bundles[i])
        })
        .map(|(other, q)| (other[winner], *q))
        .collect();
    let total: f64 = conditional.iter().map(|&(_, q)| q).sum();
    let normalized: Vec<(f64, f64)> =
        conditional.into_iter().map(|(v, q)| (v, q / total)).collect();
    monopoly_price(&normalized, floor).0
}

/// Utility of `buyer` in the lookahead auction when the profile is `bundles`
/// but the buyer bids `bid` instead; used by the truthfulness checks.
pub fn lookahead_utility_with_bid(
    profiles: &[(Vec<f64>, f64)],
    bundles: &[f64],
    buyer: usize,
    bid: f64,
) -> f64 {
    let mut reported = bundles.to_vec();
    reported[buyer] = bid;
    let (winner, floor) = top_two(&reported);
    if winner != buyer {
        return 0.0;
    }
    let offer = lookahead_offer(profiles, &reported, winner, floor);
    if bid >= offer {
        bundles[buyer] - offer
    } else {
        0.0
    }
}

/// LP-optimal dominant-strategy truthful, ex-post individually rational
/// single-item mechanism (randomized allocations allowed). The program runs
/// over the full grid of per-buyer bundle-value supports.
pub fn dsic_optimal_lp(joint: &JointDiscreteDistribution) -> Result<RevenueReport, MechanismError> {
    let n = joint.n;
    if n < 2 {
        return Err(MechanismError::NeedsTwoBuyers);
    }
    if n > 3 {
        return Err(MechanismError::SizeLimit("dsic program supports up to 3 buyers".into()));
    }
    let profiles = joint.bundle_profiles();
    // per-buyer supports, ascending
    let mut supports: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut s: Vec<f64> = profiles.iter().map(|(b, _)| b[i]).collect();
            s.sort_by(f64::total_cmp);
            s.dedup();
            s
        })
        .collect();
    for s in &mut supports {
        if s.len() > 6 {
            return Err(MechanismError::SizeLimit("per-buyer support above 6".into()));
        }
    }
    let sizes: Vec<usize> = supports.iter().map(Vec::len).collect();
    let grid: usize = sizes.iter().product();

    // grid index helpers
    let unrank = |mut g: usize| -> Vec<usize> {
        let mut idx = vec![0; n];
        for i in (0..n).rev() {
            idx[i] = g % sizes[i];
            g /= sizes[i];
        }
        idx
    };
    let rank = |idx: &[usize]| -> usize {
        let mut g = 0;
        for i in 0..n {
            g = g * sizes[i] + idx[i];
        }
        g
    };
    let value = |idx: &[usize], i: usize| supports[i][idx[i]];

    // probability of each grid cell (zero off the joint support)
    let mut prob = vec![0.0; grid];
    for (b, p) in &profiles {
        let idx: Vec<usize> = (0..n)
            .map(|i| supports[i].iter().position(|&v| v == b[i]).expect("value in support"))
            .collect();
        prob[rank(&idx)] += p;
    }

    // variables: x[i][g], then p+[i][g], then p-[i][g]
    let nv = 3 * n * grid;
    let xv = |i: usize, g: usize| i * grid + g;
    let pp = |i: usize, g: usize| n * grid + i * grid + g;
    let pm = |i: usize, g: usize| 2 * n * grid + i * grid + g;

    let mut objective = vec![0.0; nv];
    for i in 0..n {
        for g in 0..grid {
            objective[pp(i, g)] = prob[g];
            objective[pm(i, g)] = -prob[g];
        }
    }

    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::new();
    for g in 0..grid {
        let mut row = vec![0.0; nv];
        for i in 0..n {
            row[xv(i, g)] = 1.0;
        }
        rows.push((row, Sense::Le, 1.0));
    }
    for i in 0..n {
        for g in 0..grid {
            let idx = unrank(g);
            let v = value(&idx, i);
            // ex-post participation: p_i(v) <= v x_i(v)
            let mut row = vec![0.0; nv];
            row[xv(i, g)] = -v;
            row[pp(i, g)] = 1.0;
            row[pm(i, g)] = -1.0;
            rows.push((row, Sense::Le, 0.0));
            // truthfulness against every alternative report
            for alt in 0..sizes[i] {
                if alt == idx[i] {
                    continue;
                }
                let mut jdx = idx.clone();
                jdx[i] = alt;
                let gj = rank(&jdx);
                let mut row = vec![0.0; nv];
                row[xv(i, gj)] += v;
                row[pp(i, gj)] -= 1.0;
                row[pm(i, gj)] += 1.0;
                row[xv(i, g)] -= v;
                row[pp(i, g)] += 1.0;
                row[pm(i, g)] -= 1.0;
                rows.push((row, Sense::Le, 0.0));
            }
        }
    }

    let sol = lp_solve(&LinearProgram { maximize: objective, rows })?;
    if sol.status != LpStatus::Optimal {
        return Err(MechanismError::BadInput(format!(
            "dsic program unexpectedly {:?}",
            sol.status
        )));
    }
    Ok(RevenueReport {
        ln_revenue: sol.objective.max(0.0).ln(),
        method: Method::Exact,
        optimizer: Optimizer::Auction,
    })
}

/// Exhaustive deterministic-mechanism benchmark for two buyers: every
/// monotone 0/1 allocation pair with threshold payments. Used as an
/// independent oracle for [`dsic_optimal_lp`] on small supports.
pub fn dsic_deterministic_exhaustive(
    joint: &JointDiscreteDistribution,
) -> Result<f64, MechanismError> {
    if joint.n != 2 {
        return Err(MechanismError::BadInput("exhaustive oracle is two-buyer only".into()));
    }
    let profiles = joint.bundle_profiles();
    let mut supports: Vec<Vec<f64>> = (0..2)
        .map(|i| {
            let mut s: Vec<f64> = profiles.iter().map(|(b, _)| b[i]).collect();
            s.sort_by(f64::total_cmp);
            s.dedup();
            s
        })
        .collect();
    for s in &mut supports {
        if s.len() > 3 {
            return Err(MechanismError::SizeLimit("oracle supports up to 3 values".into()));
        }
    }
    let (s1, s2) = (supports[0].clone(), supports[1].clone());
    let prob = |v1: f64, v2: f64| -> f64 {
        profiles
            .iter()
            .filter(|(b, _)| b[0] == v1 && b[1] == v2)
            .map(|(_, p)| *p)
            .sum()
    };
    // buyer 1's allocation column per v2 is a monotone 0/1 vector in v1:
    // encoded by a threshold index 0..=|s1| (and symmetrically for buyer 2);
    // feasibility demands the two never both allocate on the same profile
    let mut best = 0.0f64;
    let t1_max = s1.len();
    let t2_max = s2.len();
    let count1 = (t1_max + 1).pow(s2.len() as u32);
    let count2 = (t2_max + 1).pow(s1.len() as u32);
    for enc1 in 0..count1 {
        // threshold index of buyer 1 for each v2
        let mut th1 = Vec::with_capacity(s2.len());
        let mut e = enc1;
        for _ in 0..s2.len() {
            th1.push(e % (t1_max + 1));
            e /= t1_max + 1;
        }
        for enc2 in 0..count2 {
            let mut th2 = Vec::with_capacity(s1.len());
            let mut e = enc2;
            for _ in 0..s1.len() {
                th2.push(e % (t2_max + 1));
                e /= t2_max + 1;
            }
            let alloc1 = |a: usize, b: usize| a >= th1[b];
            let alloc2 = |a: usize, b: usize| b >= th2[a];
            let mut feasible = true;
            let mut revenue = 0.0;
            for (a, &v1) in s1.iter().enumerate() {
                for (b, &v2) in s2.iter().enumerate() {
                    let x1 = alloc1(a, b);
                    let x2 = alloc2(a, b);
                    if x1 && x2 {
                        feasible = false;
                        break;
                    }
                    let p = prob(v1, v2);
                    if p == 0.0 {
                        continue;
                    }
                    // threshold payments
                    if x1 {
                        revenue += p * s1[th1[b]];
                    }
                    if x2 {
                        revenue += p * s2[th2[a]];
                    }
                }
                if !feasible {
                    break;
                }
            }
            if feasible {
                best = best.max(revenue);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iid_u12() -> JointDiscreteDistribution {
        let mut profiles = Vec::new();
        for a in [1.0, 2.0] {
            for b in [1.0, 2.0] {
                profiles.push((vec![vec![a], vec![b]], 0.25));
            }
        }
        JointDiscreteDistribution::new(2, 1, profiles).unwrap()
    }

    #[test]
    fn second_price_on_iid_u12() {
        let r = second_price_bundle(&iid_u12()).unwrap();
        assert!((r.revenue() - 1.25).abs() < 1e-12);
    }

    #[test]
    fn second_price_degenerate_cases() {
        let same = JointDiscreteDistribution::new(
            2,
            1,
            vec![(vec![vec![3.0], vec![3.0]], 1.0)],
        )
        .unwrap();
        assert!((second_price_bundle(&same).unwrap().revenue() - 3.0).abs() < 1e-12);
        let zero = JointDiscreteDistribution::new(
            2,
            1,
            vec![(vec![vec![2.0], vec![0.0]], 1.0)],
        )
        .unwrap();
        assert!(second_price_bundle(&zero).unwrap().revenue() < 1e-12);
    }

    #[test]
    fn lookahead_on_iid_u12() {
        let r = ronen_lookahead(&iid_u12()).unwrap();
        assert!((r.revenue() - 1.25).abs() < 1e-12, "{}", r.revenue());
    }

    #[test]
    fn lookahead_extracts_common_value_under_perfect_correlation() {
        let joint = JointDiscreteDistribution::new(
            2,
            1,
            vec![
                (vec![vec![1.0], vec![1.0]], 0.5),
                (vec![vec![4.0], vec![4.0]], 0.5),
            ],
        )
        .unwrap();
        let r = ronen_lookahead(&joint).unwrap();
        assert!((r.revenue() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn lookahead_is_truthful_by_enumeration() {
        let joint = JointDiscreteDistribution::new(
            2,
            1,
            vec![
                (vec![vec![1.0], vec![1.0]], 0.2),
                (vec![vec![1.0], vec![3.0]], 0.3),
                (vec![vec![2.0], vec![1.0]], 0.4),
                (vec![vec![2.0], vec![3.0]], 0.1),
            ],
        )
        .unwrap();
        let profiles = joint.bundle_profiles();
        let supports: Vec<Vec<f64>> = vec![vec![1.0, 2.0], vec![1.0, 3.0]];
        for (bundles, _) in &profiles {
            for buyer in 0..2 {
                let truthful =
                    lookahead_utility_with_bid(&profiles, bundles, buyer, bundles[buyer]);
                for &bid in &supports[buyer] {
                    let dev = lookahead_utility_with_bid(&profiles, bundles, buyer, bid);
                    assert!(dev <= truthful + 1e-12);
                }
            }
        }
    }

    #[test]
    fn dsic_lp_one_effective_buyer_is_monopoly() {
        // buyer 2 always values 0: program reduces to a posted price to buyer 1
        let joint = JointDiscreteDistribution::new(
            2,
            1,
            vec![
                (vec![vec![1.0], vec![0.0]], 0.5),
                (vec![vec![2.0], vec![0.0]], 0.5),
            ],
        )
        .unwrap();
        let r = dsic_optimal_lp(&joint).unwrap();
        assert!((r.revenue() - 1.0).abs() < 1e-8, "{}", r.revenue());
    }

    #[test]
    fn dsic_lp_matches_exhaustive_on_iid_u12() {
        let joint = iid_u12();
        let lp = dsic_optimal_lp(&joint).unwrap().revenue();
        let det = dsic_deterministic_exhaustive(&joint).unwrap();
        assert!((lp - det).abs() < 1e-8, "lp {lp} vs exhaustive {det}");
        assert!((lp - 1.5).abs() < 1e-8, "iid U{{1,2}} dsic optimum is 1.5, got {lp}");
    }

    #[test]
    fn dsic_lp_beats_lookahead_but_not_twice() {
        let joint = JointDiscreteDistribution::new(
            2,
            1,
            vec![
                (vec![vec![1.0], vec![2.0]], 0.35),
                (vec![vec![3.0], vec![2.0]], 0.25),
                (vec![vec![3.0], vec![5.0]], 0.4),
            ],
        )
        .unwrap();
        let lp = dsic_optimal_lp(&joint).unwrap().revenue();
        let look = ronen_lookahead(&joint).unwrap().revenue();
        assert!(2.0 * look >= lp - 1e-9);
        assert!(lp >= look - 1e-9, "the lookahead auction is itself DSIC ex-post IR");
    }
}
