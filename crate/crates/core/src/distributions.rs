//! Finite-support correlated value distributions, their smoothed wrappers,
//! exact bundle-value tails under smoothing, sampling, and discretization.
//!
//! Atoms carry `ln_scale` and `ln_prob` so the adversarial constructions,
//! whose values and probabilities overflow `f64`, use the same type as plain
//! inputs (plain atoms have `ln_scale = 0`). Probability mass missing from
//! the atom list sits implicitly at the origin.

use crate::bundle::{Bundle1d, BundleMixture, ScaledBundle, MAX_UNIFORM_TERMS};
use crate::geometry::to_polar;
use crate::geometry::CartesianPoint;
use crate::perturbation::{apply, NoiseVector, PerturbationModel};
use crate::rng;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;

/// One support point: value vector `exp(ln_scale) * point` with probability
/// `exp(ln_prob)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub point: Vec<f64>,
    pub ln_scale: f64,
    pub ln_prob: f64,
}

impl Atom {
    pub fn plain(point: Vec<f64>, prob: f64) -> Self {
        Atom { point, ln_scale: 0.0, ln_prob: prob.ln() }
    }

    pub fn prob(&self) -> f64 {
        self.ln_prob.exp()
    }

    /// Materialized value vector; overflows for extreme scales.
    pub fn value(&self) -> Vec<f64> {
        let s = self.ln_scale.exp();
        self.point.iter().map(|&x| s * x).collect()
    }

    pub fn is_origin(&self) -> bool {
        self.point.iter().all(|&x| x == 0.0)
    }
}

/// Single-buyer distribution over `m`-item value vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDistribution {
    m: usize,
    atoms: Vec<Atom>,
}

/// `n`-buyer profile distribution; probabilities sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDiscreteDistribution {
    pub n: usize,
    pub m: usize,
    pub profiles: Vec<(Vec<Vec<f64>>, f64)>,
}

/// A base distribution together with a perturbation model.
#[derive(Clone, Debug)]
pub struct SmoothedDistribution {
    base: DiscreteDistribution,
    model: PerturbationModel,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    MassExceedsOne { total: f64 },
    MassNotOne { total: f64 },
    NonPositiveProb { index: usize },
    NegativeValue { index: usize, coord: usize, value: f64 },
    NonFiniteValue { index: usize, coord: usize },
    DimensionMismatch { index: usize, expected: usize, got: usize },
    EmptyDimension,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MassExceedsOne { total } => write!(f, "mass {total} > 1"),
            Violation::MassNotOne { total } => write!(f, "mass {total} != 1"),
            Violation::NonPositiveProb { index } => {
                write!(f, "atom {index} has non-positive probability")
            }
            Violation::NegativeValue { index, coord, value } => {
                write!(f, "atom {index} coordinate {coord} is negative ({value})")
            }
            Violation::NonFiniteValue { index, coord } => {
                write!(f, "atom {index} coordinate {coord} is not finite")
            }
            Violation::DimensionMismatch { index, expected, got } => {
                write!(f, "atom {index} has {got} coordinates, expected {expected}")
            }
            Violation::EmptyDimension => write!(f, "item count must be at least 1"),
        }
    }
}

impl std::error::Error for Violation {}

#[derive(Clone, Debug, PartialEq)]
pub enum DistError {
    Invalid(Violation),
    ModelMismatch(String),
    TooManyItems { m: usize, max: usize },
    Json(String),
}

impl fmt::Display for DistError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistError::Invalid(v) => write!(f, "invalid distribution: {v}"),
            DistError::ModelMismatch(s) => write!(f, "{s}"),
            DistError::TooManyItems { m, max } => {
                write!(f, "closed-form bundle tails support up to {max} items, got {m}")
            }
            DistError::Json(s) => write!(f, "json: {s}"),
        }
    }
}

impl std::error::Error for DistError {}

impl From<Violation> for DistError {
    fn from(v: Violation) -> Self {
        DistError::Invalid(v)
    }
}

pub(crate) fn validate_atoms(m: usize, atoms: &[Atom]) -> Result<(), Violation> {
    if m == 0 {
        return Err(Violation::EmptyDimension);
    }
    let mut total = 0.0;
    for (i, a) in atoms.iter().enumerate() {
        if a.point.len() != m {
            return Err(Violation::DimensionMismatch { index: i, expected: m, got: a.point.len() });
        }
        for (j, &x) in a.point.iter().enumerate() {
            if x.is_nan() || x.is_infinite() {
                return Err(Violation::NonFiniteValue { index: i, coord: j });
            }
            if x < 0.0 {
                return Err(Violation::NegativeValue { index: i, coord: j, value: x });
            }
        }
        if !(a.ln_prob <= 0.0) || a.ln_prob == f64::NEG_INFINITY {
            return Err(Violation::NonPositiveProb { index: i });
        }
        if !a.ln_scale.is_finite() {
            return Err(Violation::NonFiniteValue { index: i, coord: 0 });
        }
        total += a.prob();
    }
    if total > 1.0 + 1e-12 {
        return Err(Violation::MassExceedsOne { total });
    }
    Ok(())
}

impl DiscreteDistribution {
    pub fn new(m: usize, atoms: Vec<Atom>) -> Result<Self, Violation> {
        validate_atoms(m, &atoms)?;
        Ok(DiscreteDistribution { m, atoms })
    }

    /// Plain atoms given as `(value, probability)` pairs.
    pub fn from_plain(m: usize, atoms: Vec<(Vec<f64>, f64)>) -> Result<Self, Violation> {
        Self::new(m, atoms.into_iter().map(|(v, p)| Atom::plain(v, p)).collect())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Probability mass sitting implicitly at the origin.
    pub fn residual(&self) -> f64 {
        (1.0 - self.atoms.iter().map(Atom::prob).sum::<f64>()).max(0.0)
    }

    pub fn validate(&self) -> Result<(), Violation> {
        validate_atoms(self.m, &self.atoms)
    }

    /// `E[sum_j v_j]`.
    pub fn expected_welfare(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| {
                let s: f64 = a.point.iter().sum();
                if s == 0.0 {
                    0.0
                } else {
                    (a.ln_prob + a.ln_scale + s.ln()).exp()
                }
            })
            .sum()
    }

    /// Restriction to the first `k` atoms (origin residual absorbs the rest).
    pub fn truncate(&self, k: usize) -> DiscreteDistribution {
        DiscreteDistribution { m: self.m, atoms: self.atoms[..k.min(self.atoms.len())].to_vec() }
    }
}

impl JointDiscreteDistribution {
    pub fn new(n: usize, m: usize, profiles: Vec<(Vec<Vec<f64>>, f64)>) -> Result<Self, Violation> {
        if m == 0 || n == 0 {
            return Err(Violation::EmptyDimension);
        }
        let mut total = 0.0;
        for (i, (v, p)) in profiles.iter().enumerate() {
            if v.len() != n {
                return Err(Violation::DimensionMismatch { index: i, expected: n, got: v.len() });
            }
            for row in v {
                if row.len() != m {
                    return Err(Violation::DimensionMismatch {
                        index: i,
                        expected: m,
                        got: row.len(),
                    });
                }
                for (j, &x) in row.iter().enumerate() {
                    if x.is_nan() || x.is_infinite() {
                        return Err(Violation::NonFiniteValue { index: i, coord: j });
                    }
                    if x < 0.0 {
                        return Err(Violation::NegativeValue { index: i, coord: j, value: x });
                    }
                }
            }
            if !(*p > 0.0) {
                return Err(Violation::NonPositiveProb { index: i });
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Violation::MassNotOne { total });
        }
        Ok(JointDiscreteDistribution { n, m, profiles })
    }

    /// Per-buyer grand-bundle values for every profile.
    pub fn bundle_profiles(&self) -> Vec<(Vec<f64>, f64)> {
        self.profiles
            .iter()
            .map(|(v, p)| (v.iter().map(|row| row.iter().sum()).collect(), *p))
            .collect()
    }
}

impl SmoothedDistribution {
    pub fn new(base: DiscreteDistribution, model: PerturbationModel) -> Result<Self, DistError> {
        model.validate().map_err(|e| DistError::ModelMismatch(e.to_string()))?;
        base.validate()?;
        match model {
            PerturbationModel::AngleShift { .. } if base.m() != 2 => {
                return Err(DistError::ModelMismatch(
                    "angle-shift smoothing requires exactly two items".into(),
                ));
            }
            PerturbationModel::AdditiveNoise { v_max, .. } => {
                for (i, a) in base.atoms().iter().enumerate() {
                    for (j, &x) in a.point.iter().enumerate() {
                        let ln_val = a.ln_scale + x.ln();
                        if ln_val > v_max.ln() + 1e-12 {
                            return Err(DistError::ModelMismatch(format!(
                                "additive-noise base must live in [0, {v_max}]^m; atom {i} coordinate {j} exceeds it"
                            )));
                        }
                    }
                }
            }
            _ => {}
        }
        Ok(SmoothedDistribution { base, model })
    }

    pub fn base(&self) -> &DiscreteDistribution {
        &self.base
    }

    pub fn model(&self) -> &PerturbationModel {
        &self.model
    }

    pub fn m(&self) -> usize {
        self.base.m()
    }

    /// One draw: pick an atom (or the origin residual), then perturb.
    /// Deterministic given the generator state.
    pub fn sample(&self, rng: &mut rng::Rng) -> Vec<f64> {
        let m = self.base.m();
        let mut u: f64 = rng.gen();
        let mut chosen: Option<&Atom> = None;
        for a in self.base.atoms() {
            let p = a.prob();
            if u < p {
                chosen = Some(a);
                break;
            }
            u -= p;
        }
        // noise is drawn even for the residual so the stream shape is fixed
        let noise = self.draw_noise(rng);
        match chosen {
            None => vec![0.0; m],
            Some(a) => {
                let unit = CartesianPoint { coords: a.point.clone() };
                let perturbed = apply(&self.model, &unit, &noise)
                    .expect("validated smoothed distribution cannot fail to perturb");
                let s = a.ln_scale.exp();
                perturbed.coords.iter().map(|&x| s * x).collect()
            }
        }
    }

    fn draw_noise(&self, rng: &mut rng::Rng) -> NoiseVector {
        match self.model {
            PerturbationModel::AngleShift { .. } => NoiseVector(vec![rng.gen_range(-1.0..=1.0)]),
            _ => NoiseVector((0..self.base.m()).map(|_| rng.gen_range(0.0..=1.0)).collect()),
        }
    }

    /// Exact `P[sum_j v_j >= p]` for the box-shaped models with `m <= 8`.
    pub fn bundle_tail(&self, p: f64) -> Result<f64, DistError> {
        if matches!(self.model, PerturbationModel::AngleShift { .. }) {
            return Err(DistError::ModelMismatch(
                "bundle_tail is closed-form for the box models; angle-shift uses the pricing module".into(),
            ));
        }
        if self.base.m() > MAX_UNIFORM_TERMS {
            return Err(DistError::TooManyItems { m: self.base.m(), max: MAX_UNIFORM_TERMS });
        }
        Ok(self.mixture().tail(p))
    }

    /// Monte Carlo estimate of the bundle tail with its standard error.
    /// Chunked over derived sub-streams; independent of worker count.
    pub fn bundle_tail_mc(&self, p: f64, samples: usize, seed: u64) -> (f64, f64) {
        assert!(samples >= 1000, "need at least 1e3 samples");
        let mut hits = 0u64;
        let mut drawn = 0usize;
        let mut stream = 0u64;
        while drawn < samples {
            let take = rng::CHUNK.min(samples - drawn);
            let mut r = rng::derive_stream(seed, stream);
            for _ in 0..take {
                let v = self.sample(&mut r);
                if v.iter().sum::<f64>() >= p {
                    hits += 1;
                }
            }
            drawn += take;
            stream += 1;
        }
        let est = hits as f64 / samples as f64;
        let stderr = (est * (1.0 - est) / samples as f64).sqrt();
        (est, stderr)
    }

    /// Empirical distribution of `k` draws, exact duplicates merged.
    pub fn discretize(&self, k: usize, seed: u64) -> DiscreteDistribution {
        assert!(k >= 1);
        let mut counts: BTreeMap<Vec<u64>, (Vec<f64>, usize)> = BTreeMap::new();
        let mut r = rng::from_seed(seed);
        for _ in 0..k {
            let v = self.sample(&mut r);
            let key: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
            counts.entry(key).or_insert_with(|| (v, 0)).1 += 1;
        }
        let atoms = counts
            .into_values()
            .filter(|(v, _)| v.iter().any(|&x| x != 0.0))
            .map(|(v, c)| Atom::plain(v, c as f64 / k as f64))
            .collect();
        DiscreteDistribution { m: self.base.m(), atoms }
    }

    /// Exact expected welfare `E[sum_j v_hat_j]`.
    pub fn expected_welfare(&self) -> f64 {
        let d = self.model.delta();
        self.base
            .atoms()
            .iter()
            .map(|a| {
                let s: f64 = a.point.iter().sum();
                let mean_extra = match self.model {
                    PerturbationModel::RectangleShift { .. } => d * s / 2.0,
                    PerturbationModel::SquareShift { .. } => {
                        let mx = a.point.iter().copied().fold(0.0, f64::max);
                        self.base.m() as f64 * d * mx / 2.0
                    }
                    PerturbationModel::AdditiveNoise { v_max, .. } => {
                        // additive widths are absolute, not per-atom; undo the scale
                        self.base.m() as f64 * d * v_max / 2.0 * (-a.ln_scale).exp()
                    }
                    PerturbationModel::AngleShift { delta } => {
                        let polar = to_polar(&CartesianPoint { coords: a.point.clone() })
                            .expect("validated atoms are nonnegative");
                        if polar.radius == 0.0 {
                            0.0
                        } else {
                            let t = polar.angles[0];
                            let (lo, hi) = ((t - delta).max(0.0), (t + delta).min(FRAC_PI_2));
                            let mean = ((hi.sin() - lo.sin()) + (lo.cos() - hi.cos())) / (hi - lo);
                            polar.radius * mean - s
                        }
                    }
                };
                let total = s + mean_extra;
                if total == 0.0 {
                    0.0
                } else {
                    (a.ln_prob + a.ln_scale + total.ln()).exp()
                }
            })
            .sum::<f64>()
            + self.residual_welfare()
    }

    fn residual_welfare(&self) -> f64 {
        // the origin residual only moves under additive noise
        match self.model {
            PerturbationModel::AdditiveNoise { delta, v_max } => {
                self.base.residual() * self.base.m() as f64 * delta * v_max / 2.0
            }
            _ => 0.0,
        }
    }

    /// The mixture of one-dimensional bundle distributions.
    pub fn mixture(&self) -> BundleMixture {
        let m = self.base.m();
        let d = self.model.delta();
        let mut atoms = Vec::new();
        let mut ln_zero = f64::NEG_INFINITY;
        for a in self.base.atoms() {
            if a.is_origin() && !matches!(self.model, PerturbationModel::AdditiveNoise { .. }) {
                ln_zero = crate::logscale::ln_add_exp(ln_zero, a.ln_prob);
                continue;
            }
            let base: f64 = a.point.iter().sum();
            let dist = match self.model {
                PerturbationModel::RectangleShift { .. } => Bundle1d::UniformSum {
                    base,
                    widths: a.point.iter().filter(|&&x| x > 0.0).map(|&x| d * x).collect(),
                },
                PerturbationModel::SquareShift { .. } => {
                    let mx = a.point.iter().copied().fold(0.0, f64::max);
                    Bundle1d::UniformSum { base, widths: vec![d * mx; m] }
                }
                PerturbationModel::AdditiveNoise { v_max, .. } => Bundle1d::UniformSum {
                    base,
                    widths: vec![d * v_max * (-a.ln_scale).exp(); m],
                },
                PerturbationModel::AngleShift { delta } => {
                    let polar = to_polar(&CartesianPoint { coords: a.point.clone() })
                        .expect("validated atoms are nonnegative");
                    let t = polar.angles[0];
                    Bundle1d::ArcSum {
                        radius: polar.radius,
                        lo: (t - delta).max(0.0),
                        hi: (t + delta).min(FRAC_PI_2),
                    }
                }
            };
            atoms.push(ScaledBundle { ln_scale: a.ln_scale, ln_prob: a.ln_prob, dist });
        }
        let resid = self.base.residual();
        if resid > 0.0 {
            match self.model {
                PerturbationModel::AdditiveNoise { delta, v_max } => {
                    atoms.push(ScaledBundle {
                        ln_scale: 0.0,
                        ln_prob: resid.ln(),
                        dist: Bundle1d::UniformSum { base: 0.0, widths: vec![delta * v_max; m] },
                    });
                }
                _ => ln_zero = crate::logscale::ln_add_exp(ln_zero, resid.ln()),
            }
        }
        BundleMixture::new(atoms, ln_zero)
    }
}

// --- JSON interchange -------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct AtomFile {
    v: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ln_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ln_scale: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct DistFile {
    m: usize,
    atoms: Vec<AtomFile>,
}

#[derive(Serialize, Deserialize)]
struct ProfileFile {
    v: Vec<Vec<f64>>,
    p: f64,
}

#[derive(Serialize, Deserialize)]
struct JointFile {
    n: usize,
    m: usize,
    profiles: Vec<ProfileFile>,
}

impl DiscreteDistribution {
    /// Parses and validates the `{m, atoms:[{v, p | ln_p, ln_scale?}]}` format.
    pub fn from_json_str(s: &str) -> Result<Self, DistError> {
        let file: DistFile = serde_json::from_str(s).map_err(|e| DistError::Json(e.to_string()))?;
        let mut atoms = Vec::with_capacity(file.atoms.len());
        for (i, a) in file.atoms.into_iter().enumerate() {
            let ln_prob = match (a.p, a.ln_p) {
                (Some(p), None) => {
                    if !(p > 0.0 && p <= 1.0) {
                        return Err(DistError::Invalid(Violation::NonPositiveProb { index: i }));
                    }
                    p.ln()
                }
                (None, Some(lp)) => lp,
                _ => {
                    return Err(DistError::Json(format!(
                        "atom {i}: exactly one of \"p\" and \"ln_p\" is required"
                    )))
                }
            };
            atoms.push(Atom { point: a.v, ln_scale: a.ln_scale.unwrap_or(0.0), ln_prob });
        }
        Ok(Self::new(file.m, atoms)?)
    }

    pub fn to_json_string(&self) -> String {
        let file = DistFile {
            m: self.m,
            atoms: self
                .atoms
                .iter()
                .map(|a| AtomFile {
                    v: a.point.clone(),
                    p: if a.ln_scale == 0.0 && a.ln_prob > -700.0 {
                        Some(a.prob())
                    } else {
                        None
                    },
                    ln_p: if a.ln_scale == 0.0 && a.ln_prob > -700.0 {
                        None
                    } else {
                        Some(a.ln_prob)
                    },
                    ln_scale: if a.ln_scale == 0.0 { None } else { Some(a.ln_scale) },
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("distribution serialization cannot fail")
    }
}

impl JointDiscreteDistribution {
    pub fn from_json_str(s: &str) -> Result<Self, DistError> {
        let file: JointFile = serde_json::from_str(s).map_err(|e| DistError::Json(e.to_string()))?;
        Ok(Self::new(
            file.n,
            file.m,
            file.profiles.into_iter().map(|p| (p.v, p.p)).collect(),
        )?)
    }

    pub fn to_json_string(&self) -> String {
        let file = JointFile {
            n: self.n,
            m: self.m,
            profiles: self
                .profiles
                .iter()
                .map(|(v, p)| ProfileFile { v: v.clone(), p: *p })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("joint serialization cannot fail")
    }
}
