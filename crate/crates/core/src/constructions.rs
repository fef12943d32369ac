//! Adversarial constructions: the rectangle-robust shell point sequence with
//! its exact smoothed gaps, the lottery distribution and tailored menu priced
//! from those gaps, the slowly-decaying-gap sequence on polynomial shells,
//! the multi-item subset construction, and the scaled construction for the
//! additive-noise model.

use crate::distributions::{Atom, DiscreteDistribution, SmoothedDistribution};
use crate::logscale::ln_sum_exp;
use crate::mechanisms::menu::Menu;
use crate::perturbation::PerturbationModel;
use rayon::prelude::*;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::OnceLock;

/// Points in the unit square arranged shell by shell, decreasing angle within
/// each shell. Norm equals the shell radius.
#[derive(Clone, Debug)]
pub struct PointSequence {
    pub points: Vec<[f64; 2]>,
    /// Polar angle of each point.
    pub angles: Vec<f64>,
    /// Shell id per point.
    pub shell_of: Vec<usize>,
    /// (shell id, radius), ascending.
    pub shell_radii: Vec<(usize, f64)>,
    pub delta: f64,
}

impl PointSequence {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of points on the given shell.
    pub fn shell_count(&self, shell: usize) -> usize {
        self.shell_of.iter().filter(|&&s| s == shell).count()
    }

    /// Index of the last point on or before `shell`, plus one.
    pub fn prefix_len_through_shell(&self, shell: usize) -> usize {
        self.shell_of.iter().take_while(|&&s| s <= shell).count()
    }
}

/// Exact worst-case advantages `gap_i`, aligned with a [`PointSequence`].
#[derive(Clone, Debug)]
pub struct GapSequence {
    pub gaps: Vec<f64>,
    pub model: PerturbationModel,
}

/// Which gaps enter the price normalizer `M_i = 4^i / prod(gap_j)`: the menu
/// lemma uses the product over `j < i`, the scaled-point proposition over
/// `j <= i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProductRange {
    Exclusive,
    Inclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConstructionError {
    DeltaOutOfRange { delta: f64, requirement: &'static str },
    TooFewShells { max_shell: usize },
    NonPositiveGap { i: usize, j: usize, value: f64 },
    MassExceedsOne { total_ln: f64 },
    BadParams(String),
}

impl fmt::Display for ConstructionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstructionError::DeltaOutOfRange { delta, requirement } => {
                write!(f, "delta {delta} outside required range {requirement}")
            }
            ConstructionError::TooFewShells { max_shell } => {
                write!(f, "need at least 2 shells, got {max_shell}")
            }
            ConstructionError::NonPositiveGap { i, j, value } => {
                write!(f, "gap at point {i} against point {j} is not positive ({value})")
            }
            ConstructionError::MassExceedsOne { total_ln } => {
                write!(f, "lottery probabilities sum to exp({total_ln}) > 1")
            }
            ConstructionError::BadParams(s) => write!(f, "{s}"),
        }
    }
}

impl std::error::Error for ConstructionError {}

/// Lower and upper bracket of `sum_{k>=2} 1/(k ln^2 k)`.
///
/// The series is summed directly to `K = 1e8` and the integral tail
/// `1/ln K ~ 0.054` is added to form the upper end. Shell radii are divided
/// by the upper end so they stay strictly below 1 regardless of how much of
/// the tail the truncation missed; the divergence experiment is insensitive
/// to the constant.
pub fn alpha_bracket() -> (f64, f64) {
    static ALPHA: OnceLock<(f64, f64)> = OnceLock::new();
    *ALPHA.get_or_init(|| {
        const K: u64 = 100_000_000;
        // Kahan summation, small terms first
        let mut sum = 0.0f64;
        let mut carry = 0.0f64;
        let mut k = K;
        while k >= 2 {
            let x = k as f64;
            let term = 1.0 / (x * x.ln() * x.ln());
            let y = term - carry;
            let t = sum + y;
            carry = (t - sum) - y;
            sum = t;
            k -= 1;
        }
        let tail = 1.0 / (K as f64).ln();
        (sum, sum + tail)
    })
}

fn shell_weight(n: usize) -> f64 {
    let x = n as f64;
    1.0 / (x * x.ln() * x.ln())
}

/// The shell point sequence: shell `N >= 2` has radius
/// `l_N = (1/alpha) sum_{k=2..N} 1/(k ln^2 k)` and carries points at angles
/// `pi/2 * (1-3 delta)^(k-1)` for as long as the angle stays at or above
/// `sqrt(1/(N ln^2 N))`.
pub fn shell_points(delta: f64, max_shell: usize) -> Result<PointSequence, ConstructionError> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(ConstructionError::DeltaOutOfRange { delta, requirement: "(0, 1/2)" });
    }
    if max_shell < 2 {
        return Err(ConstructionError::TooFewShells { max_shell });
    }
    let (_, alpha_high) = alpha_bracket();
    let shrink = 1.0 - 3.0 * delta;
    let mut points = Vec::new();
    let mut angles = Vec::new();
    let mut shell_of = Vec::new();
    let mut shell_radii = Vec::with_capacity(max_shell - 1);
    let mut partial = 0.0;
    for shell in 2..=max_shell {
        partial += shell_weight(shell);
        let radius = partial / alpha_high;
        shell_radii.push((shell, radius));
        let stop = shell_weight(shell).sqrt();
        let mut theta = FRAC_PI_2;
        while theta >= stop {
            points.push([radius * theta.cos(), radius * theta.sin()]);
            angles.push(theta);
            shell_of.push(shell);
            theta *= shrink;
            if theta <= 0.0 {
                break;
            }
        }
    }
    Ok(PointSequence { points, angles, shell_of, shell_radii, delta })
}

/// Exact gap sequence: `gap_i` is the minimum over all earlier points (and
/// the origin) of the corner-minimized dot product of the perturbation box
/// of `x_i` with `x_i - x_j`. No sampling; brute force over every pair.
pub fn gap_sequence(
    seq: &PointSequence,
    model: &PerturbationModel,
) -> Result<GapSequence, ConstructionError> {
    let delta = match *model {
        PerturbationModel::RectangleShift { delta } | PerturbationModel::SquareShift { delta } => {
            delta
        }
        _ => {
            return Err(ConstructionError::BadParams(
                "gap sequence requires a box-shaped model".into(),
            ))
        }
    };
    let square = matches!(model, PerturbationModel::SquareShift { .. });
    let pts = &seq.points;
    let gaps: Vec<Result<f64, ConstructionError>> = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let xi = pts[i];
            let (lo, hi) = if square {
                let side = delta * xi[0].max(xi[1]);
                (xi, [xi[0] + side, xi[1] + side])
            } else {
                (xi, [xi[0] * (1.0 + delta), xi[1] * (1.0 + delta)])
            };
            // origin term: weights are nonnegative, the minimum sits at lo = x_i
            let mut min = lo[0] * xi[0] + lo[1] * xi[1];
            for j in 0..i {
                let w0 = xi[0] - pts[j][0];
                let w1 = xi[1] - pts[j][1];
                let v = if w0 >= 0.0 { lo[0] } else { hi[0] } * w0
                    + if w1 >= 0.0 { lo[1] } else { hi[1] } * w1;
                if v < min {
                    min = v;
                }
            }
            if min <= 0.0 {
                // locate the violating pair for the report
                for j in 0..i {
                    let w0 = xi[0] - pts[j][0];
                    let w1 = xi[1] - pts[j][1];
                    let v = if w0 >= 0.0 { lo[0] } else { hi[0] } * w0
                        + if w1 >= 0.0 { lo[1] } else { hi[1] } * w1;
                    if v <= 0.0 {
                        return Err(ConstructionError::NonPositiveGap { i, j, value: v });
                    }
                }
                return Err(ConstructionError::NonPositiveGap { i, j: 0, value: min });
            }
            Ok(min)
        })
        .collect();
    let mut out = Vec::with_capacity(gaps.len());
    for g in gaps {
        out.push(g?);
    }
    Ok(GapSequence { gaps: out, model: *model })
}

/// `ln M_i` for `i = 1..n` under the chosen product range.
pub fn ln_price_scales(gaps: &[f64], range: ProductRange) -> Vec<f64> {
    let ln4 = 4.0f64.ln();
    let mut out = Vec::with_capacity(gaps.len());
    let mut ln_prod = 0.0;
    for (idx, &g) in gaps.iter().enumerate() {
        let i = idx + 1;
        match range {
            ProductRange::Exclusive => {
                out.push(i as f64 * ln4 - ln_prod);
                ln_prod += g.ln();
            }
            ProductRange::Inclusive => {
                ln_prod += g.ln();
                out.push(i as f64 * ln4 - ln_prod);
            }
        }
    }
    out
}

/// The lottery distribution: value `M_i x_i` with probability `1/M_i` for
/// the first `truncate` points, remaining mass at the origin.
pub fn lottery_distribution(
    seq: &PointSequence,
    gaps: &GapSequence,
    truncate: usize,
    range: ProductRange,
) -> Result<DiscreteDistribution, ConstructionError> {
    let n = truncate.min(seq.points.len()).min(gaps.gaps.len());
    for (i, &g) in gaps.gaps[..n].iter().enumerate() {
        if !(g > 0.0) {
            return Err(ConstructionError::NonPositiveGap { i, j: 0, value: g });
        }
    }
    let ln_m = ln_price_scales(&gaps.gaps[..n], range);
    let total_ln = ln_sum_exp(&ln_m.iter().map(|&l| -l).collect::<Vec<_>>());
    if total_ln > 0.0 {
        return Err(ConstructionError::MassExceedsOne { total_ln });
    }
    let atoms = (0..n)
        .map(|i| Atom {
            point: seq.points[i].to_vec(),
            ln_scale: ln_m[i],
            ln_prob: -ln_m[i],
        })
        .collect();
    DiscreteDistribution::new(2, atoms)
        .map_err(|v| ConstructionError::BadParams(v.to_string()))
}

/// The tailored menu: entry `i` offers allocation `x_i` at price `M_i gap_i`,
/// so type `i` pays `gap_i` in expectation and the menu extracts
/// `sum_i gap_i` from the lottery distribution.
pub fn tailored_menu(
    seq: &PointSequence,
    gaps: &GapSequence,
    truncate: usize,
    range: ProductRange,
) -> Result<Menu, ConstructionError> {
    let n = truncate.min(seq.points.len()).min(gaps.gaps.len());
    let ln_m = ln_price_scales(&gaps.gaps[..n], range);
    let entries: Vec<(Vec<f64>, f64)> = (0..n)
        .map(|i| (seq.points[i].to_vec(), ln_m[i] + gaps.gaps[i].ln()))
        .collect();
    for (i, (q, _)) in entries.iter().enumerate() {
        if q.iter().any(|&x| x > 1.0) {
            return Err(ConstructionError::BadParams(format!(
                "point {i} leaves the unit square; not a valid lottery"
            )));
        }
    }
    Menu::new_log(2, entries).map_err(|e| ConstructionError::BadParams(e.to_string()))
}

/// `zeta(3/2)`, summed to 1e6 with an Euler-Maclaurin tail.
pub fn zeta_three_halves() -> f64 {
    static Z: OnceLock<f64> = OnceLock::new();
    *Z.get_or_init(|| {
        const K: u64 = 1_000_000;
        let mut sum = 0.0;
        let mut k = K;
        while k >= 1 {
            sum += 1.0 / (k as f64).powf(1.5);
            k -= 1;
        }
        let x = (K + 1) as f64;
        sum + 2.0 / x.sqrt() + 0.5 * x.powf(-1.5) + 0.125 * x.powf(-2.5)
    })
}

/// A sequence with polynomially many points per shell and slowly decaying
/// unsmoothed gaps.
#[derive(Clone, Debug)]
pub struct SlowGapConstruction {
    pub seq: PointSequence,
    /// Unsmoothed gaps `q_k . q_k - max_{j<k} q_j . q_k`.
    pub gaps: Vec<f64>,
    /// Empirical decay witness `min_k gap_k * k^(6/7)`.
    pub decay_constant: f64,
}

/// Shell `N >= 1` holds `ceil(N^(3/4))` points at equally spaced angles in
/// `[0, pi/2]` (midpoint when the shell has one point) with radius
/// `sum_{l<=N} l^(-3/2) / zeta(3/2)`; truncated to `count` points.
pub fn hn67_points(count: usize) -> Result<SlowGapConstruction, ConstructionError> {
    if count == 0 {
        return Err(ConstructionError::BadParams("need at least one point".into()));
    }
    let zeta = zeta_three_halves();
    let mut points = Vec::with_capacity(count);
    let mut angles = Vec::with_capacity(count);
    let mut shell_of = Vec::with_capacity(count);
    let mut shell_radii = Vec::new();
    let mut partial = 0.0;
    let mut shell = 0usize;
    while points.len() < count {
        shell += 1;
        partial += 1.0 / (shell as f64).powf(1.5);
        let radius = partial / zeta;
        shell_radii.push((shell, radius));
        let c = ((shell as f64).powf(0.75) - 1e-9).ceil().max(1.0) as usize;
        for t in 0..c {
            if points.len() == count {
                break;
            }
            // descending angles, endpoints included
            let theta = if c == 1 {
                FRAC_PI_2 / 2.0
            } else {
                FRAC_PI_2 * (c - 1 - t) as f64 / (c - 1) as f64
            };
            points.push([radius * theta.cos(), radius * theta.sin()]);
            angles.push(theta);
            shell_of.push(shell);
        }
    }
    let mut gaps = Vec::with_capacity(count);
    for k in 0..count {
        let qk = points[k];
        let own = qk[0] * qk[0] + qk[1] * qk[1];
        let best_prev = points[..k]
            .iter()
            .map(|qj| qj[0] * qk[0] + qj[1] * qk[1])
            .fold(0.0f64, f64::max);
        gaps.push(own - best_prev);
    }
    let decay_constant = gaps
        .iter()
        .enumerate()
        .map(|(k, &g)| g * ((k + 1) as f64).powf(6.0 / 7.0))
        .fold(f64::INFINITY, f64::min);
    Ok(SlowGapConstruction {
        seq: PointSequence { points, angles, shell_of, shell_radii, delta: 0.0 },
        gaps,
        decay_constant,
    })
}

/// The multi-item subset construction: one type per size-`m/2` subset, type
/// `j` valuing each item of its subset at `2 m^(2j)`, offered that subset at
/// price `m^(2j)`. Returns the distribution and the menu; the menu extracts
/// `j_max / C` with `C = sum_j m^(-2j)`.
pub fn subset_construction(
    m: usize,
    j_max: usize,
    delta: f64,
) -> Result<(DiscreteDistribution, Menu), ConstructionError> {
    if m % 2 != 0 || !(4..=12).contains(&m) {
        return Err(ConstructionError::BadParams(format!(
            "item count must be even and within 4..=12, got {m}"
        )));
    }
    if !(delta > 0.0) {
        return Err(ConstructionError::DeltaOutOfRange { delta, requirement: "(0, inf)" });
    }
    let n_subsets = binomial(m, m / 2);
    if j_max == 0 || j_max > n_subsets {
        return Err(ConstructionError::BadParams(format!(
            "j_max must be within 1..={n_subsets}, got {j_max}"
        )));
    }
    let subsets: Vec<usize> = (0usize..(1 << m))
        .filter(|mask| mask.count_ones() as usize == m / 2)
        .take(j_max)
        .collect();
    let ln_m = (m as f64).ln();
    let c: f64 = (1..=j_max).map(|j| (-2.0 * j as f64 * ln_m).exp()).sum();
    let mut atoms = Vec::with_capacity(j_max);
    let mut entries = Vec::with_capacity(j_max);
    for (idx, &mask) in subsets.iter().enumerate() {
        let j = idx + 1;
        let indicator: Vec<f64> =
            (0..m).map(|b| if mask >> b & 1 == 1 { 1.0 } else { 0.0 }).collect();
        // value 2 m^{2j} per item of the subset
        atoms.push(Atom {
            point: indicator.clone(),
            ln_scale: 2.0f64.ln() + 2.0 * j as f64 * ln_m,
            ln_prob: -2.0 * j as f64 * ln_m - c.ln(),
        });
        entries.push((indicator, 2.0 * j as f64 * ln_m));
    }
    let dist = DiscreteDistribution::new(m, atoms)
        .map_err(|v| ConstructionError::BadParams(v.to_string()))?;
    let menu =
        Menu::new_log(m, entries).map_err(|e| ConstructionError::BadParams(e.to_string()))?;
    Ok((dist, menu))
}

fn binomial(n: usize, k: usize) -> usize {
    let mut acc = 1usize;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// `ceil(ln(1/delta))`, the point count the additive-noise lower bound uses.
pub fn additive_scaled_point_count(delta: f64) -> usize {
    (1.0 / delta).ln().ceil().max(1.0) as usize
}

/// The additive-noise lower-bound base: the first `n` slow-gap points priced
/// by `M^k = 4^k / prod_{j<=k} gap_j`, every value divided by a common scale
/// so the support fits `[0, 1]^2`, wrapped with additive noise of magnitude
/// `delta` and `v_max = 1`.
///
/// The divisor is `max(4^(n+1), largest coordinate)`: the nominal `4^(n+1)`
/// does not dominate the coordinates once the gap products shrink, and the
/// support bound is what the model needs. Any divisor at least `4^(n+1)`
/// keeps the base bundle revenue at or below `4^-n`.
pub fn additive_scaled_distribution(
    n: usize,
    delta: f64,
) -> Result<SmoothedDistribution, ConstructionError> {
    if n == 0 {
        return Err(ConstructionError::BadParams("need n >= 1".into()));
    }
    if !(delta > 0.0 && delta < 0.25) {
        return Err(ConstructionError::DeltaOutOfRange { delta, requirement: "(0, 1/4)" });
    }
    let built = hn67_points(n)?;
    let ln_m = ln_price_scales(&built.gaps, ProductRange::Inclusive);
    let ln_nominal = (n as f64 + 1.0) * 4.0f64.ln();
    let ln_max_coord = (0..n)
        .map(|k| ln_m[k] + built.seq.points[k][0].max(built.seq.points[k][1]).ln())
        .fold(f64::NEG_INFINITY, f64::max);
    let ln_scale_div = ln_nominal.max(ln_max_coord);
    let atoms: Vec<Atom> = (0..n)
        .map(|k| {
            let s = (ln_m[k] - ln_scale_div).exp();
            Atom {
                point: vec![built.seq.points[k][0] * s, built.seq.points[k][1] * s],
                ln_scale: 0.0,
                ln_prob: -ln_m[k],
            }
        })
        .collect();
    let base = DiscreteDistribution::new(2, atoms)
        .map_err(|v| ConstructionError::BadParams(v.to_string()))?;
    SmoothedDistribution::new(base, PerturbationModel::AdditiveNoise { delta, v_max: 1.0 })
        .map_err(|e| ConstructionError::BadParams(e.to_string()))
}
