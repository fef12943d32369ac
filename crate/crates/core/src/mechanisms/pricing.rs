//! Posted-price benchmarks: the optimal grand-bundle price (exact, including
//! smoothed distributions with log-scaled atoms), per-item prices, and the
//! monopoly price scan used by the lookahead auction.

use crate::distributions::{DiscreteDistribution, SmoothedDistribution};
use crate::logscale::ln_sum_exp;
use crate::mechanisms::{MechanismError, Method, Optimizer, RevenueReport};
use crate::rng;

/// Optimal posted price over a one-dimensional discrete value distribution.
/// Candidates are the support values at or above `floor`, plus `floor`
/// itself; ties resolve to the lowest price. Returns `(price, revenue)`.
pub fn monopoly_price(values: &[(f64, f64)], floor: f64) -> (f64, f64) {
    let mut candidates: Vec<f64> =
        values.iter().map(|&(v, _)| v).filter(|&v| v >= floor).collect();
    candidates.push(floor);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut best = (floor, 0.0);
    for &w in &candidates {
        let tail: f64 = values.iter().filter(|&&(v, _)| v >= w).map(|&(_, p)| p).sum();
        let rev = w * tail;
        if rev > best.1 {
            best = (w, rev);
        }
    }
    best
}

/// Optimal revenue from a single posted price for the grand bundle against a
/// discrete distribution. Exact; candidate prices are the distinct bundle
/// sums, ties resolve to the lowest price.
pub fn brev_discrete(dist: &DiscreteDistribution) -> RevenueReport {
    // (ln bundle sum, ln prob) per atom with a positive bundle
    let mut sums: Vec<(f64, f64)> = dist
        .atoms()
        .iter()
        .filter(|a| !a.is_origin())
        .map(|a| (a.ln_scale + a.point.iter().sum::<f64>().ln(), a.ln_prob))
        .collect();
    sums.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best_ln_rev = f64::NEG_INFINITY;
    let mut best_ln_price = f64::NEG_INFINITY;
    // scan candidates in ascending price order, keeping strict improvements
    // only, so ties settle on the lowest price
    let mut i = 0;
    while i < sums.len() {
        let ln_p = sums[i].0;
        let tail = ln_sum_exp(&sums[i..].iter().map(|&(_, lp)| lp).collect::<Vec<_>>());
        let ln_rev = ln_p + tail;
        if ln_rev > best_ln_rev + 1e-15 {
            best_ln_rev = ln_rev;
            best_ln_price = ln_p;
        }
        let mut j = i;
        while j < sums.len() && sums[j].0 == ln_p {
            j += 1;
        }
        i = j;
    }
    if best_ln_rev == f64::NEG_INFINITY {
        best_ln_rev = f64::NEG_INFINITY;
        best_ln_price = f64::NEG_INFINITY;
    }
    RevenueReport {
        ln_revenue: best_ln_rev.max(f64::NEG_INFINITY),
        method: Method::Exact,
        optimizer: Optimizer::BundlePrice { ln_price: best_ln_price },
    }
}

/// Optimal selling-separately revenue: one posted price per item against its
/// marginal distribution, summed over items. Exact, log-safe.
pub fn srev_discrete(dist: &DiscreteDistribution) -> RevenueReport {
    let mut total_ln = f64::NEG_INFINITY;
    let mut prices = Vec::with_capacity(dist.m());
    let mut item_terms = Vec::new();
    for item in 0..dist.m() {
        let mut vals: Vec<(f64, f64)> = dist
            .atoms()
            .iter()
            .filter(|a| a.point[item] > 0.0)
            .map(|a| (a.ln_scale + a.point[item].ln(), a.ln_prob))
            .collect();
        vals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best = (f64::NEG_INFINITY, f64::NEG_INFINITY); // (ln price, ln revenue)
        let mut i = 0;
        while i < vals.len() {
            let ln_p = vals[i].0;
            let tail = ln_sum_exp(&vals[i..].iter().map(|&(_, lp)| lp).collect::<Vec<_>>());
            if ln_p + tail > best.1 + 1e-15 {
                best = (ln_p, ln_p + tail);
            }
            let mut j = i;
            while j < vals.len() && vals[j].0 == ln_p {
                j += 1;
            }
            i = j;
        }
        prices.push(best.0.exp());
        if best.1 > f64::NEG_INFINITY {
            item_terms.push(best.1);
        }
    }
    if !item_terms.is_empty() {
        total_ln = ln_sum_exp(&item_terms);
    }
    RevenueReport {
        ln_revenue: total_ln,
        method: Method::Exact,
        optimizer: Optimizer::ItemPrices(prices),
    }
}

/// Exact optimal bundle price against a smoothed distribution, maximizing
/// `p * P[bundle >= p]` over the full piecewise revenue curve. Needs the
/// closed-form tails, hence `m <= 8` for the box models.
pub fn brev_smoothed(smoothed: &SmoothedDistribution) -> Result<RevenueReport, MechanismError> {
    if smoothed.m() > crate::bundle::MAX_UNIFORM_TERMS {
        return Err(MechanismError::NeedsMonteCarlo { m: smoothed.m() });
    }
    let mix = smoothed.mixture();
    match mix.maximize_revenue() {
        None => Ok(RevenueReport {
            ln_revenue: f64::NEG_INFINITY,
            method: Method::Exact,
            optimizer: Optimizer::BundlePrice { ln_price: f64::NEG_INFINITY },
        }),
        Some(opt) => Ok(RevenueReport {
            ln_revenue: opt.ln_revenue,
            method: Method::Exact,
            optimizer: Optimizer::BundlePrice { ln_price: opt.ln_price },
        }),
    }
}

/// Monte Carlo fallback for `m > 8`: empirical revenue maximization over the
/// sampled bundle values, with the plug-in standard error at the optimum.
pub fn brev_smoothed_mc(
    smoothed: &SmoothedDistribution,
    samples: usize,
    seed: u64,
) -> RevenueReport {
    assert!(samples >= 1000);
    let mut sums = Vec::with_capacity(samples);
    let mut drawn = 0usize;
    let mut stream = 0u64;
    while drawn < samples {
        let take = rng::CHUNK.min(samples - drawn);
        let mut r = rng::derive_stream(seed, stream);
        for _ in 0..take {
            sums.push(smoothed.sample(&mut r).iter().sum::<f64>());
        }
        drawn += take;
        stream += 1;
    }
    sums.sort_by(f64::total_cmp);
    let n = sums.len();
    let mut best = (0.0f64, 0.0f64, 1.0f64); // (price, revenue, tail)
    for i in 0..n {
        if i > 0 && sums[i] == sums[i - 1] {
            continue;
        }
        let tail = (n - i) as f64 / n as f64;
        let rev = sums[i] * tail;
        if rev > best.1 {
            best = (sums[i], rev, tail);
        }
    }
    let stderr = best.0 * (best.2 * (1.0 - best.2) / n as f64).sqrt();
    RevenueReport {
        ln_revenue: best.1.ln(),
        method: Method::MonteCarlo { stderr, samples },
        optimizer: Optimizer::BundlePrice { ln_price: best.0.ln() },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbation::PerturbationModel;

    fn plain(m: usize, atoms: &[(&[f64], f64)]) -> DiscreteDistribution {
        DiscreteDistribution::from_plain(
            m,
            atoms.iter().map(|(v, p)| (v.to_vec(), *p)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn brev_discrete_examples() {
        let r = brev_discrete(&plain(2, &[(&[1.0, 2.0], 1.0)]));
        assert!((r.revenue() - 3.0).abs() < 1e-12);

        let r = brev_discrete(&plain(2, &[(&[1.0, 1.0], 0.5), (&[3.0, 3.0], 0.5)]));
        assert!((r.revenue() - 3.0).abs() < 1e-12);
        if let Optimizer::BundlePrice { ln_price } = r.optimizer {
            assert!((ln_price.exp() - 6.0).abs() < 1e-12);
        }

        // equal-revenue ladder: tie goes to the lowest price
        let r = brev_discrete(&plain(
            2,
            &[(&[1.0, 0.0], 0.5), (&[2.0, 0.0], 0.25), (&[4.0, 0.0], 0.25)],
        ));
        assert!((r.revenue() - 1.0).abs() < 1e-12);
        if let Optimizer::BundlePrice { ln_price } = r.optimizer {
            assert!((ln_price.exp() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn srev_examples() {
        let r = srev_discrete(&plain(2, &[(&[1.0, 2.0], 1.0)]));
        assert!((r.revenue() - 3.0).abs() < 1e-12);

        let r = srev_discrete(&plain(2, &[(&[1.0, 0.0], 0.5), (&[0.0, 1.0], 0.5)]));
        assert!((r.revenue() - 1.0).abs() < 1e-12);

        // marginals fixed: re-pairing the atoms leaves srev unchanged
        let a = srev_discrete(&plain(2, &[(&[1.0, 2.0], 0.5), (&[3.0, 4.0], 0.5)]));
        let b = srev_discrete(&plain(2, &[(&[1.0, 4.0], 0.5), (&[3.0, 2.0], 0.5)]));
        assert!((a.revenue() - b.revenue()).abs() < 1e-12);
    }

    #[test]
    fn monopoly_price_examples() {
        let u12 = [(1.0, 0.5), (2.0, 0.5)];
        assert_eq!(monopoly_price(&u12, 0.0), (1.0, 1.0));
        assert_eq!(monopoly_price(&u12, 2.0), (2.0, 1.0));
        assert_eq!(monopoly_price(&[(1.0, 1.0)], 2.0), (2.0, 0.0));
    }

    #[test]
    fn brev_smoothed_point_mass_and_continuity() {
        let base = plain(2, &[(&[1.0, 1.0], 1.0)]);
        let sm = SmoothedDistribution::new(
            base.clone(),
            PerturbationModel::SquareShift { delta: 0.1 },
        )
        .unwrap();
        let r = brev_smoothed(&sm).unwrap();
        // (2+x)(1-50x^2) maximized at the interior stationary point
        let x = ((40600.0f64).sqrt() - 200.0) / 300.0;
        let expect = (2.0 + x) * (1.0 - 50.0 * x * x);
        assert!((r.revenue() - expect).abs() < 1e-10);

        let tiny = SmoothedDistribution::new(
            plain(2, &[(&[1.0, 1.0], 0.5), (&[3.0, 3.0], 0.5)]),
            PerturbationModel::SquareShift { delta: 1e-6 },
        )
        .unwrap();
        let exact = brev_discrete(&plain(2, &[(&[1.0, 1.0], 0.5), (&[3.0, 3.0], 0.5)]));
        let r = brev_smoothed(&tiny).unwrap();
        assert!((r.revenue() - exact.revenue()).abs() < 1e-5);
    }

    #[test]
    fn brev_smoothed_dominates_base_brev() {
        let base = plain(2, &[(&[1.0, 0.4], 0.3), (&[0.6, 2.0], 0.45), (&[0.1, 0.1], 0.2)]);
        for model in [
            PerturbationModel::RectangleShift { delta: 0.35 },
            PerturbationModel::SquareShift { delta: 0.35 },
            PerturbationModel::AngleShift { delta: 0.35 },
        ] {
            let sm = SmoothedDistribution::new(base.clone(), model).unwrap();
            let smoothed = brev_smoothed(&sm).unwrap();
            // every smoothed value dominates its base point except under the
            // angle model, where only the norm is preserved; there we just
            // check positivity
            if matches!(model, PerturbationModel::AngleShift { .. }) {
                assert!(smoothed.revenue() > 0.0);
            } else {
                assert!(smoothed.revenue() >= brev_discrete(&base).revenue() - 1e-10);
            }
        }
    }

    #[test]
    fn brev_smoothed_matches_dense_scan() {
        let base = plain(2, &[(&[1.0, 0.4], 0.3), (&[0.6, 2.0], 0.45), (&[0.1, 0.1], 0.2)]);
        for model in [
            PerturbationModel::RectangleShift { delta: 0.35 },
            PerturbationModel::SquareShift { delta: 0.2 },
            PerturbationModel::AdditiveNoise { delta: 0.15, v_max: 2.0 },
            PerturbationModel::AngleShift { delta: 0.25 },
        ] {
            let sm = SmoothedDistribution::new(base.clone(), model).unwrap();
            let exact = brev_smoothed(&sm).unwrap().revenue();
            let mix = sm.mixture();
            let mut scan: f64 = 0.0;
            for i in 1..=400_000 {
                let p = i as f64 * 1e-5 * 3.2;
                scan = scan.max(p * mix.tail(p));
            }
            assert!(
                exact >= scan - 1e-7 && exact <= scan + 2e-4,
                "{model:?}: exact {exact} vs scan {scan}"
            );
        }
    }

    #[test]
    fn brev_mc_agrees_with_exact() {
        let base = plain(2, &[(&[1.0, 0.4], 0.5), (&[0.2, 0.9], 0.5)]);
        let sm =
            SmoothedDistribution::new(base, PerturbationModel::SquareShift { delta: 0.3 }).unwrap();
        let exact = brev_smoothed(&sm).unwrap().revenue();
        let mc = brev_smoothed_mc(&sm, 200_000, 5);
        if let Method::MonteCarlo { stderr, .. } = mc.method {
            // empirical maximization is upward biased; allow a one-sided band
            assert!(mc.revenue() >= exact - 4.0 * stderr - 1e-3);
            assert!(mc.revenue() <= exact + 6.0 * stderr.max(1e-3));
        } else {
            panic!("expected monte carlo method");
        }
    }
}
