//! Exact one-dimensional bundle-value distributions and revenue maximization.
//!
//! Under the box-shaped smoothing models the bundle value of one atom is
//! `base + sum_j w_j U_j` with independent `U_j ~ U[0,1]`, whose tail is a
//! piecewise polynomial (the Irwin-Hall generalization). Under the angle
//! model it is `r (cos t + sin t)` with `t` uniform on an arc. A smoothed
//! discrete distribution is then a mixture of such pieces, each carried at
//! its own scale `exp(ln_scale)`, and the optimal bundle price is found by
//! enumerating piece endpoints plus the stationary points of `p * tail(p)`
//! on every polynomial piece.
//!
//! Scales and probabilities stay in log space throughout: the adversarial
//! constructions produce atoms with `ln_scale` in the hundreds of thousands.

use crate::logscale::{ln_add_exp, ln_sum_exp};
use std::f64::consts::{FRAC_PI_4, SQRT_2};

/// Maximum number of independent uniform summands with a closed-form tail.
pub const MAX_UNIFORM_TERMS: usize = 8;

/// Bundle value of a single atom, in the atom's own scale.
#[derive(Clone, Debug)]
pub enum Bundle1d {
    /// `base + sum_j widths[j] * U_j`, all widths positive.
    UniformSum { base: f64, widths: Vec<f64> },
    /// `radius * (cos t + sin t)` with `t ~ U[lo, hi]`, `0 <= lo < hi <= pi/2`.
    ArcSum { radius: f64, lo: f64, hi: f64 },
}

impl Bundle1d {
    pub fn support(&self) -> (f64, f64) {
        match self {
            Bundle1d::UniformSum { base, widths } => {
                (*base, base + widths.iter().sum::<f64>())
            }
            Bundle1d::ArcSum { radius, lo, hi } => {
                let f = |t: f64| t.cos() + t.sin();
                let ends = (f(*lo), f(*hi));
                let min = ends.0.min(ends.1);
                let max = if (*lo..=*hi).contains(&FRAC_PI_4) {
                    SQRT_2
                } else {
                    ends.0.max(ends.1)
                };
                (radius * min, radius * max)
            }
        }
    }

    /// Exact `P[value >= y]`.
    pub fn tail(&self, y: f64) -> f64 {
        let (lo, hi) = self.support();
        if y <= lo {
            return 1.0;
        }
        if y > hi {
            return 0.0;
        }
        match self {
            Bundle1d::UniformSum { base, widths } => uniform_sum_tail(y - base, widths),
            Bundle1d::ArcSum { radius, lo, hi } => {
                let yn = (y / (radius * SQRT_2)).min(1.0);
                let phi = yn.asin();
                let a = (phi - FRAC_PI_4).max(*lo);
                let b = (3.0 * FRAC_PI_4 - phi).min(*hi);
                ((b - a).max(0.0)) / (hi - lo)
            }
        }
    }

    /// Points where the closed form changes shape, within the support.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Bundle1d::UniformSum { base, widths } => {
                let mut pts: Vec<f64> = subset_sums(widths).iter().map(|s| base + s).collect();
                pts.sort_by(f64::total_cmp);
                pts.dedup();
                pts
            }
            Bundle1d::ArcSum { radius, lo, hi } => {
                let f = |t: f64| radius * (t.cos() + t.sin());
                let mut pts = vec![f(*lo), f(*hi), radius * SQRT_2];
                pts.sort_by(f64::total_cmp);
                pts.dedup();
                pts
            }
        }
    }
}

/// `P[sum_j w_j U_j >= t]` by inclusion-exclusion over subset sums.
fn uniform_sum_tail(t: f64, widths: &[f64]) -> f64 {
    let k = widths.len();
    assert!(k >= 1 && k <= MAX_UNIFORM_TERMS);
    let total: f64 = widths.iter().sum();
    if t <= 0.0 {
        return 1.0;
    }
    if t >= total {
        return 0.0;
    }
    let mut cdf = 0.0;
    for mask in 0..(1usize << k) {
        let mut s = 0.0;
        for (j, w) in widths.iter().enumerate() {
            if mask >> j & 1 == 1 {
                s += w;
            }
        }
        let d = t - s;
        if d > 0.0 {
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            cdf += sign * d.powi(k as i32);
        }
    }
    let norm: f64 = factorial(k) * widths.iter().product::<f64>();
    (1.0 - cdf / norm).clamp(0.0, 1.0)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product::<f64>().max(1.0)
}

fn subset_sums(widths: &[f64]) -> Vec<f64> {
    let mut sums = Vec::with_capacity(1 << widths.len());
    for mask in 0..(1usize << widths.len()) {
        let mut s = 0.0;
        for (j, w) in widths.iter().enumerate() {
            if mask >> j & 1 == 1 {
                s += w;
            }
        }
        sums.push(s);
    }
    sums
}

/// One atom of a mixture: a 1-D bundle distribution carried at scale
/// `exp(ln_scale)` with probability `exp(ln_prob)`.
#[derive(Clone, Debug)]
pub struct ScaledBundle {
    pub ln_scale: f64,
    pub ln_prob: f64,
    pub dist: Bundle1d,
}

/// Mixture of scaled atoms plus a point mass at zero.
#[derive(Clone, Debug)]
pub struct BundleMixture {
    atoms: Vec<ScaledBundle>,
    ln_zero_mass: f64,
}

/// Result of exact revenue maximization over bundle prices.
#[derive(Clone, Copy, Debug)]
pub struct PriceOptimum {
    pub ln_price: f64,
    pub ln_revenue: f64,
}

impl BundleMixture {
    pub fn new(mut atoms: Vec<ScaledBundle>, ln_zero_mass: f64) -> Self {
        // sort by log support start so cluster detection is a single sweep
        atoms.sort_by(|a, b| {
            let sa = a.ln_scale + a.dist.support().0.ln();
            let sb = b.ln_scale + b.dist.support().0.ln();
            sa.total_cmp(&sb)
        });
        BundleMixture { atoms, ln_zero_mass }
    }

    pub fn atoms(&self) -> &[ScaledBundle] {
        &self.atoms
    }

    /// Log of the point mass at exactly zero (origin atoms and residual).
    pub fn ln_zero_mass(&self) -> f64 {
        self.ln_zero_mass
    }

    /// Exact mixture tail `P[value >= p]` as a plain probability. Extremely
    /// small masses underflow to zero, which only matters for atoms whose
    /// probability is itself below f64 range; use [`Self::ln_tail`] there.
    pub fn tail(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 1.0;
        }
        let terms = self.ln_tail_terms(p.ln());
        let mut acc = 0.0;
        for t in terms {
            acc += t.exp();
        }
        acc.min(1.0)
    }

    /// `ln P[value >= exp(ln_p)]`.
    pub fn ln_tail(&self, ln_p: f64) -> f64 {
        ln_sum_exp(&self.ln_tail_terms(ln_p))
    }

    fn ln_tail_terms(&self, ln_p: f64) -> Vec<f64> {
        let mut terms = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            let (lo, hi) = a.dist.support();
            let rel = ln_p - a.ln_scale;
            if rel > hi.ln() {
                continue;
            }
            if rel <= lo.ln() {
                terms.push(a.ln_prob);
                continue;
            }
            let t = if a.ln_scale == 0.0 {
                a.dist.tail(ln_p.exp())
            } else {
                a.dist.tail(rel.exp())
            };
            if t > 0.0 {
                terms.push(a.ln_prob + t.ln());
            }
        }
        terms
    }

    /// Exact maximizer of `p * P[value >= p]` over `p > 0`. Returns `None`
    /// when the mixture has no positive-value atoms.
    pub fn maximize_revenue(&self) -> Option<PriceOptimum> {
        if self.atoms.is_empty() {
            return None;
        }
        let clusters = self.clusters();
        let mut best: Option<PriceOptimum> = None;
        // ln of total mass strictly above the cluster being processed
        let mut ln_above = f64::NEG_INFINITY;
        for cluster in clusters.iter().rev() {
            let atoms: Vec<&ScaledBundle> = cluster.iter().map(|&i| &self.atoms[i]).collect();
            self.scan_cluster(&atoms, ln_above, &mut best);
            for a in &atoms {
                ln_above = ln_add_exp(ln_above, a.ln_prob);
            }
        }
        best
    }

    /// Indices grouped by overlapping log-support intervals, ascending.
    fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        let mut cur_end = f64::NEG_INFINITY;
        for (i, a) in self.atoms.iter().enumerate() {
            let (lo, hi) = a.dist.support();
            let start = a.ln_scale + lo.ln();
            let end = a.ln_scale + hi.ln();
            if out.is_empty() || start > cur_end {
                out.push(vec![i]);
                cur_end = end;
            } else {
                out.last_mut().unwrap().push(i);
                cur_end = cur_end.max(end);
            }
        }
        out
    }

    fn scan_cluster(
        &self,
        atoms: &[&ScaledBundle],
        ln_above: f64,
        best: &mut Option<PriceOptimum>,
    ) {
        let ln_ref = atoms.iter().map(|a| a.ln_scale).fold(f64::NEG_INFINITY, f64::max);
        // local (unit-scale) view of each atom relative to ln_ref
        let locals: Vec<(f64, Bundle1d)> = atoms
            .iter()
            .map(|a| {
                let s = (a.ln_scale - ln_ref).exp();
                let dist = match &a.dist {
                    Bundle1d::UniformSum { base, widths } => Bundle1d::UniformSum {
                        base: base * s,
                        widths: widths.iter().map(|w| w * s).collect(),
                    },
                    Bundle1d::ArcSum { radius, lo, hi } => {
                        Bundle1d::ArcSum { radius: radius * s, lo: *lo, hi: *hi }
                    }
                };
                (a.ln_prob, dist)
            })
            .collect();
        let ln_pmax = locals.iter().map(|(p, _)| *p).fold(f64::NEG_INFINITY, f64::max);

        let mut events: Vec<f64> = Vec::new();
        for (_, d) in &locals {
            if d.support().1 > 0.0 {
                events.extend(d.breakpoints());
            }
        }
        // keep 0 as a left edge so pieces starting at the origin are scanned
        events.retain(|e| e.is_finite() && *e >= 0.0);
        events.sort_by(f64::total_cmp);
        events.dedup();

        // evaluate exact ln revenue at local price y
        let eval = |y: f64, best: &mut Option<PriceOptimum>| {
            if !(y > 0.0) {
                return;
            }
            let ln_p = ln_ref + y.ln();
            let mut terms = vec![ln_above];
            for (lp, d) in &locals {
                let t = d.tail(y);
                if t > 0.0 {
                    terms.push(lp + t.ln());
                }
            }
            let ln_rev = ln_p + ln_sum_exp(&terms);
            if best.map_or(true, |b| ln_rev > b.ln_revenue) {
                *best = Some(PriceOptimum { ln_price: ln_p, ln_revenue: ln_rev });
            }
        };

        for w in events.windows(2) {
            let (a, b) = (w[0], w[1]);
            eval(a, best);
            if b - a <= 1e-300 {
                continue;
            }
            let mid = 0.5 * (a + b);
            // piece is polynomial iff every contributing atom is a uniform sum
            let mut poly = vec![0.0; 1];
            let mut is_poly = true;
            let mut any_arc_active = false;
            for (lp, d) in &locals {
                let (slo, shi) = d.support();
                if mid <= slo {
                    poly[0] += (lp - ln_pmax).exp();
                } else if mid < shi {
                    match d {
                        Bundle1d::UniformSum { base, widths } => {
                            let w_rel = (lp - ln_pmax).exp();
                            add_scaled_poly(&mut poly, &tail_poly(*base, widths, a, mid), w_rel);
                        }
                        Bundle1d::ArcSum { .. } => {
                            any_arc_active = true;
                            is_poly = false;
                        }
                    }
                }
            }
            let c_rel = if ln_above - ln_pmax > 600.0 {
                // cluster mass is negligible next to the mass above it:
                // revenue is effectively linear, endpoints suffice
                is_poly = false;
                any_arc_active = false;
                0.0
            } else {
                (ln_above - ln_pmax).exp()
            };
            if is_poly {
                // stationary points of (y)(c + T(y)) with T in powers of (y - a)
                poly[0] += c_rel;
                let rev = poly_mul_linear(&poly, a);
                let drev = poly_derivative(&rev);
                let mut roots = Vec::new();
                poly_roots_in(&drev, 0.0, b - a, &mut roots);
                for r in roots {
                    eval(a + r, best);
                }
            } else if any_arc_active {
                // smooth non-polynomial piece: deterministic subdivision + golden section
                let obj = |y: f64| {
                    let mut terms = vec![c_rel.ln()];
                    for (lp, d) in &locals {
                        let t = d.tail(y);
                        if t > 0.0 {
                            terms.push(lp - ln_pmax + t.ln());
                        }
                    }
                    y.ln() + ln_sum_exp(&terms)
                };
                const SUBDIV: usize = 24;
                for s in 0..SUBDIV {
                    let x0 = a + (b - a) * s as f64 / SUBDIV as f64;
                    let x1 = a + (b - a) * (s + 1) as f64 / SUBDIV as f64;
                    eval(golden_max(obj, x0, x1), best);
                }
            }
        }
        if let Some(&last) = events.last() {
            eval(last, best);
        }
    }
}

/// Coefficients (in powers of `u = y - at`) of the tail of one uniform sum on
/// the piece starting at `at`; `probe` is an interior point of the piece and
/// decides which inclusion-exclusion terms are active.
fn tail_poly(base: f64, widths: &[f64], at: f64, probe: f64) -> Vec<f64> {
    let k = widths.len();
    let norm = factorial(k) * widths.iter().product::<f64>();
    let mut coeffs = vec![0.0; k + 1];
    coeffs[0] = 1.0;
    let t_at = at - base;
    let t_probe = probe - base;
    for mask in 0..(1usize << k) {
        let mut s = 0.0;
        for (j, w) in widths.iter().enumerate() {
            if mask >> j & 1 == 1 {
                s += w;
            }
        }
        if t_probe - s <= 0.0 {
            continue;
        }
        let sign = if mask.count_ones() % 2 == 0 { -1.0 } else { 1.0 };
        // tail = 1 - cdf, so the cdf term (+-1)(t - s)^k enters negated;
        // expand (u + d)^k around the piece start, d = t_at - s
        let d = t_at - s;
        let mut binom = 1.0;
        for r in 0..=k {
            coeffs[r] += sign / norm * binom * d.powi((k - r) as i32);
            binom = binom * (k - r) as f64 / (r + 1) as f64;
        }
    }
    coeffs
}

fn add_scaled_poly(acc: &mut Vec<f64>, p: &[f64], w: f64) {
    if acc.len() < p.len() {
        acc.resize(p.len(), 0.0);
    }
    for (a, &c) in acc.iter_mut().zip(p) {
        *a += w * c;
    }
}

/// `poly(u) * (u + shift)`.
fn poly_mul_linear(poly: &[f64], shift: f64) -> Vec<f64> {
    let mut out = vec![0.0; poly.len() + 1];
    for (i, &c) in poly.iter().enumerate() {
        out[i] += c * shift;
        out[i + 1] += c;
    }
    out
}

fn poly_derivative(poly: &[f64]) -> Vec<f64> {
    if poly.len() <= 1 {
        return vec![0.0];
    }
    poly.iter().enumerate().skip(1).map(|(i, &c)| c * i as f64).collect()
}

fn poly_eval(poly: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for &c in poly.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

/// All real roots of `poly` inside `[a, b]`, by recursive critical-point
/// isolation and bisection. Deterministic.
fn poly_roots_in(poly: &[f64], a: f64, b: f64, out: &mut Vec<f64>) {
    let mut deg = poly.len();
    while deg > 1 && poly[deg - 1] == 0.0 {
        deg -= 1;
    }
    let poly = &poly[..deg];
    if deg <= 1 {
        return;
    }
    if deg == 2 {
        let r = -poly[0] / poly[1];
        if r >= a && r <= b {
            out.push(r);
        }
        return;
    }
    let mut cuts = vec![a];
    let dp = poly_derivative(poly);
    let mut crit = Vec::new();
    poly_roots_in(&dp, a, b, &mut crit);
    cuts.extend(crit);
    cuts.push(b);
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let (flo, fhi) = (poly_eval(poly, lo), poly_eval(poly, hi));
        if flo == 0.0 {
            out.push(lo);
            continue;
        }
        if flo.signum() == fhi.signum() && fhi != 0.0 {
            continue;
        }
        let (mut lo, mut hi) = (lo, hi);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let fm = poly_eval(poly, mid);
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm.signum() == poly_eval(poly, lo).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
}

/// Deterministic golden-section maximizer of a smooth function on `[a, b]`.
fn golden_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..90 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}
