//! Lottery menus: buyer best response, exact and Monte Carlo revenue, and
//! corner-exact incentive verification for the tailored lower-bound menus.

use crate::constructions::{GapSequence, PointSequence};
use crate::distributions::{DiscreteDistribution, SmoothedDistribution};
use crate::logscale::ln_sum_exp;
use crate::mechanisms::{MechanismError, Method, Optimizer, RevenueReport};
use crate::perturbation::PerturbationModel;
use crate::rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One lottery: per-item allocation probabilities and a price. The log form
/// is canonical (construction prices overflow f64); `price` is its
/// materialization, kept exact when the entry was built from a plain price
/// so that exact-tie semantics survive.
#[derive(Clone, Debug, PartialEq)]
pub struct MenuEntry {
    pub allocation: Vec<f64>,
    pub price: f64,
    pub ln_price: f64,
}

impl MenuEntry {
    pub fn price(&self) -> f64 {
        self.price
    }
}

/// A menu of lotteries. The free null entry (zero allocation, zero price) is
/// implicit and always available.
#[derive(Clone, Debug, PartialEq)]
pub struct Menu {
    m: usize,
    pub entries: Vec<MenuEntry>,
}

impl Menu {
    pub fn new(m: usize, entries: Vec<(Vec<f64>, f64)>) -> Result<Self, MechanismError> {
        Self::build(m, entries.into_iter().map(|(q, p)| (q, p, p.ln())).collect())
    }

    /// Entries with prices given as natural logs.
    pub fn new_log(m: usize, entries: Vec<(Vec<f64>, f64)>) -> Result<Self, MechanismError> {
        Self::build(m, entries.into_iter().map(|(q, lp)| (q, lp.exp(), lp)).collect())
    }

    fn build(m: usize, entries: Vec<(Vec<f64>, f64, f64)>) -> Result<Self, MechanismError> {
        let mut out = Vec::with_capacity(entries.len());
        for (i, (q, price, ln_price)) in entries.into_iter().enumerate() {
            if q.len() != m {
                return Err(MechanismError::Dimension { expected: m, got: q.len() });
            }
            for (j, &x) in q.iter().enumerate() {
                if !(0.0..=1.0).contains(&x) {
                    return Err(MechanismError::AllocationOutOfRange {
                        entry: i,
                        coord: j,
                        value: x,
                    });
                }
            }
            if ln_price.is_nan() || price < 0.0 {
                return Err(MechanismError::NegativePrice { entry: i });
            }
            out.push(MenuEntry { allocation: q, price, ln_price });
        }
        Ok(Menu { m, entries: out })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Buyer best response: the utility-maximizing entry for value vector `v`,
/// `None` for the null entry. Ties break toward the higher price, then the
/// lower index (the seller-favorable convention used everywhere here).
pub fn best_response(menu: &Menu, v: &[f64]) -> Option<usize> {
    best_response_scaled(menu, v, 0.0)
}

/// Best response of a buyer whose value vector is `exp(ln_scale) * point`.
///
/// Utilities are compared at the buyer's own scale: entry `j` is worth
/// `point . q_j - exp(ln_price_j - ln_scale)`. The exponential under- and
/// overflows are exactly the right semantics: prices negligible at this
/// scale vanish, unaffordable entries become `-inf`.
pub fn best_response_scaled(menu: &Menu, point: &[f64], ln_scale: f64) -> Option<usize> {
    debug_assert_eq!(point.len(), menu.m);
    let mut best: Option<usize> = None;
    let mut best_u = 0.0f64; // null utility
    let mut best_ln_price = f64::NEG_INFINITY;
    for (j, e) in menu.entries.iter().enumerate() {
        let price = if ln_scale == 0.0 {
            e.price // exact for plainly-priced menus
        } else {
            let arg = e.ln_price - ln_scale;
            if arg > 710.0 {
                continue; // price overflows the buyer's scale: utility is -inf
            }
            if arg < -745.0 {
                0.0
            } else {
                arg.exp()
            }
        };
        if price == f64::INFINITY {
            continue;
        }
        let u = dot(point, &e.allocation) - price;
        let better = u > best_u || (u == best_u && e.ln_price > best_ln_price);
        if better {
            best = Some(j);
            best_u = u;
            best_ln_price = e.ln_price;
        }
    }
    best
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact expected revenue of `menu` against a discrete distribution: every
/// atom buys its best-response entry. Log-safe for scaled atoms.
pub fn menu_revenue_discrete(menu: &Menu, dist: &DiscreteDistribution) -> Result<RevenueReport, MechanismError> {
    if dist.m() != menu.m {
        return Err(MechanismError::Dimension { expected: menu.m, got: dist.m() });
    }
    let terms: Vec<f64> = dist
        .atoms()
        .par_iter()
        .filter_map(|a| {
            best_response_scaled(menu, &a.point, a.ln_scale)
                .map(|j| a.ln_prob + menu.entries[j].ln_price)
        })
        .collect();
    Ok(RevenueReport { ln_revenue: ln_sum_exp(&terms), method: Method::Exact, optimizer: Optimizer::Menu })
}

/// Monte Carlo estimate of menu revenue against a smoothed distribution.
pub fn menu_revenue_smoothed(
    menu: &Menu,
    smoothed: &SmoothedDistribution,
    samples: usize,
    seed: u64,
) -> Result<RevenueReport, MechanismError> {
    if smoothed.m() != menu.m {
        return Err(MechanismError::Dimension { expected: menu.m, got: smoothed.m() });
    }
    if samples < 1000 {
        return Err(MechanismError::BadInput("need at least 1e3 samples".into()));
    }
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let mut drawn = 0usize;
    let mut stream = 0u64;
    while drawn < samples {
        let take = rng::CHUNK.min(samples - drawn);
        let mut r = rng::derive_stream(seed, stream);
        for _ in 0..take {
            let v = smoothed.sample(&mut r);
            let paid = best_response(menu, &v).map_or(0.0, |j| menu.entries[j].price());
            sum += paid;
            sumsq += paid * paid;
        }
        drawn += take;
        stream += 1;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sumsq / n - mean * mean).max(0.0);
    Ok(RevenueReport {
        ln_revenue: mean.ln(),
        method: Method::MonteCarlo { stderr: (var / n).sqrt(), samples },
        optimizer: Optimizer::Menu,
    })
}

/// Outcome of exact incentive verification of a tailored menu. Margins are
/// relative; the menu passes when every margin clears `-1e-9`.
#[derive(Clone, Debug)]
pub struct IcCertificate {
    pub pass: bool,
    /// Worst margin of "type i keeps preferring its own entry over every
    /// cheaper entry", minimized over lower-indexed entries and box corners.
    pub worst_lower: f64,
    /// Worst log-margin of "no type can afford any later entry".
    pub worst_upper: f64,
    /// First violated pair, as (type, other entry, corner index).
    pub first_failure: Option<(usize, usize, usize)>,
    pub types_checked: usize,
}

pub const IC_TOLERANCE: f64 = 1e-9;

/// Verifies, over all corners of each type's perturbation box, that every
/// smoothed type prefers its own tailored entry.
///
/// For entries below the type (`j < i`) the utility difference is linear in
/// the perturbed point, so minimizing over box corners is exact: the margin
/// is `min_corner corner . (x_i - x_j) - gap_i`, relative to `gap_i`. For
/// entries above (`j > i`) the type must be priced out: the margin is
/// `ln(price_j / scale_i) - ln(max_corner corner . x_j)`. Pairs whose price
/// exceeds the buyer scale by more than e^30 are skipped; their margin is at
/// least 30 - ln(2(1+delta)).
pub fn menu_ic_verify(
    menu: &Menu,
    seq: &PointSequence,
    gaps: &GapSequence,
    model: &PerturbationModel,
    truncate: usize,
) -> Result<IcCertificate, MechanismError> {
    match model {
        PerturbationModel::RectangleShift { .. } | PerturbationModel::SquareShift { .. } => {}
        _ => return Err(MechanismError::BadInput("ic verification needs a box-shaped model".into())),
    }
    let n = truncate.min(seq.points.len()).min(menu.entries.len()).min(gaps.gaps.len());
    if n == 0 {
        return Ok(IcCertificate {
            pass: true,
            worst_lower: f64::INFINITY,
            worst_upper: f64::INFINITY,
            first_failure: None,
            types_checked: 0,
        });
    }
    // buyer scale of type i: price_i = M_i gap_i, so ln M_i = ln t_i - ln gap_i
    let ln_scale: Vec<f64> =
        (0..n).map(|i| menu.entries[i].ln_price - gaps.gaps[i].ln()).collect();
    let ln_price: Vec<f64> = (0..n).map(|i| menu.entries[i].ln_price).collect();
    // suffix minimum of prices drives the early-out for the upper check
    let mut suffix_min = vec![f64::INFINITY; n + 1];
    for i in (0..n).rev() {
        suffix_min[i] = suffix_min[i + 1].min(ln_price[i]);
    }
    const UPPER_SCREEN: f64 = 30.0;

    struct TypeResult {
        lower: f64,
        upper: f64,
        failure: Option<(usize, usize, usize)>,
    }

    let results: Vec<TypeResult> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = seq.points[i];
            let (lo, hi) = boxed(model, xi);
            let gap = gaps.gaps[i];
            let mut upper = f64::INFINITY;
            let mut failure = None;
            // null option first: the buyer's own entry must give utility >= 0,
            // which is the origin term of the gap definition
            let own = lo[0] * xi[0] + lo[1] * xi[1];
            let mut lower = (own - gap) / gap.max(f64::MIN_POSITIVE);
            if lower < -IC_TOLERANCE {
                failure = Some((i, i, 0));
            }
            for j in 0..i {
                let xj = seq.points[j];
                let w = [xi[0] - xj[0], xi[1] - xj[1]];
                let mdot = pick(lo[0], hi[0], w[0]) * w[0] + pick(lo[1], hi[1], w[1]) * w[1];
                let margin = (mdot - gap) / gap.max(f64::MIN_POSITIVE);
                if margin < lower {
                    lower = margin;
                    if margin < -IC_TOLERANCE && failure.is_none() {
                        failure = Some((i, j, corner_argmin(w)));
                    }
                }
            }
            for j in (i + 1)..n {
                if suffix_min[j] - ln_scale[i] > UPPER_SCREEN {
                    break;
                }
                let xj = seq.points[j];
                let maxdot = hi[0] * xj[0] + hi[1] * xj[1];
                let margin = (ln_price[j] - ln_scale[i]) - maxdot.ln();
                if margin < upper {
                    upper = margin;
                    if margin < -IC_TOLERANCE && failure.is_none() {
                        failure = Some((i, j, 3)); // hi/hi corner maximizes a nonnegative dot
                    }
                }
            }
            TypeResult { lower, upper, failure }
        })
        .collect();

    let worst_lower = results.iter().map(|r| r.lower).fold(f64::INFINITY, f64::min);
    let worst_upper = results.iter().map(|r| r.upper).fold(f64::INFINITY, f64::min);
    let first_failure = results.iter().find_map(|r| r.failure);
    Ok(IcCertificate {
        pass: worst_lower >= -IC_TOLERANCE && worst_upper >= -IC_TOLERANCE,
        worst_lower,
        worst_upper,
        first_failure,
        types_checked: n,
    })
}

fn boxed(model: &PerturbationModel, x: [f64; 2]) -> ([f64; 2], [f64; 2]) {
    match *model {
        PerturbationModel::RectangleShift { delta } => {
            (x, [x[0] * (1.0 + delta), x[1] * (1.0 + delta)])
        }
        PerturbationModel::SquareShift { delta } => {
            let mx = x[0].max(x[1]);
            (x, [x[0] + delta * mx, x[1] + delta * mx])
        }
        _ => unreachable!("checked by caller"),
    }
}

#[inline]
fn pick(lo: f64, hi: f64, w: f64) -> f64 {
    if w >= 0.0 {
        lo
    } else {
        hi
    }
}

fn corner_argmin(w: [f64; 2]) -> usize {
    // corner index bit j set = hi in coordinate j, matching AxisBox::corners
    usize::from(w[0] < 0.0) | (usize::from(w[1] < 0.0) << 1)
}

// --- JSON interchange -------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct EntryFile {
    q: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    price: Option<f64>,
    ln_price: f64,
}

#[derive(Serialize, Deserialize)]
struct MenuFile {
    m: usize,
    entries: Vec<EntryFile>,
}

impl Menu {
    /// `{m, entries:[{q, price?, ln_price}]}`; `price` is omitted when it is
    /// not representable in f64.
    pub fn to_json_string(&self) -> String {
        let file = MenuFile {
            m: self.m,
            entries: self
                .entries
                .iter()
                .map(|e| EntryFile {
                    q: e.allocation.clone(),
                    price: if e.price.is_finite() { Some(e.price) } else { None },
                    ln_price: e.ln_price,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("menu serialization cannot fail")
    }

    pub fn from_json_str(s: &str) -> Result<Self, MechanismError> {
        let file: MenuFile =
            serde_json::from_str(s).map_err(|e| MechanismError::Json(e.to_string()))?;
        Self::build(
            file.m,
            file.entries
                .into_iter()
                .map(|e| {
                    let price = e.price.unwrap_or_else(|| e.ln_price.exp());
                    (e.q, price, e.ln_price)
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn menu(m: usize, entries: &[(&[f64], f64)]) -> Menu {
        Menu::new(m, entries.iter().map(|(q, p)| (q.to_vec(), *p)).collect()).unwrap()
    }

    #[test]
    fn best_response_picks_highest_utility() {
        let m = menu(2, &[(&[1.0, 1.0], 1.5), (&[0.5, 0.5], 0.4)]);
        assert_eq!(best_response(&m, &[1.0, 1.0]), Some(1));
    }

    #[test]
    fn unaffordable_menu_yields_null() {
        let m = menu(2, &[(&[1.0, 0.0], 5.0), (&[0.0, 1.0], 9.0)]);
        assert_eq!(best_response(&m, &[1.0, 1.0]), None);
    }

    #[test]
    fn zero_utility_tie_buys_the_entry() {
        let m = menu(2, &[(&[1.0, 1.0], 3.0)]);
        assert_eq!(best_response(&m, &[1.0, 2.0]), Some(0));
        let rev = menu_revenue_discrete(
            &m,
            &DiscreteDistribution::from_plain(2, vec![(vec![1.0, 2.0], 1.0)]).unwrap(),
        )
        .unwrap();
        assert!((rev.revenue() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn equal_utility_tie_prefers_higher_price() {
        // both entries give utility 0.5 at v = (1, 1)
        let m = menu(2, &[(&[0.5, 0.5], 0.5), (&[1.0, 1.0], 1.5)]);
        assert_eq!(best_response(&m, &[1.0, 1.0]), Some(1));
    }

    #[test]
    fn empty_menu_revenue_is_zero() {
        let m = Menu::new(2, vec![]).unwrap();
        let d = DiscreteDistribution::from_plain(2, vec![(vec![1.0, 1.0], 1.0)]).unwrap();
        let rev = menu_revenue_discrete(&m, &d).unwrap();
        assert_eq!(rev.revenue(), 0.0);
    }

    #[test]
    fn scaled_best_response_handles_extreme_prices() {
        // entry prices e^0 and e^1000; buyer at scale e^1000 ignores the tiny
        // price and cannot be fooled by overflow
        let m = Menu::new_log(1, vec![(vec![0.4], 0.0), (vec![1.0], 999.0)]).unwrap();
        let pick = best_response_scaled(&m, &[1.0], 1000.0);
        // utility of entry 1: 1 - e^{-1} ~ 0.63 beats entry 0: 0.4 - e^{-1000}
        assert_eq!(pick, Some(1));
    }

    #[test]
    fn menu_json_round_trip() {
        let m = Menu::new_log(2, vec![(vec![0.2, 1.0], 1.0f64.ln()), (vec![1.0, 1.0], 4000.0)])
            .unwrap();
        let s = m.to_json_string();
        let back = Menu::from_json_str(&s).unwrap();
        assert_eq!(m, back);
        assert!(Menu::from_json_str("{\"m\":2,\"entries\":[{\"q\":[2.0,0.0],\"ln_price\":0.0}]}").is_err());
    }
}
