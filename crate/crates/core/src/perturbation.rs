//! The four smoothing models as deterministic maps from `(point, noise)`,
//! plus the region and interval queries the gap computation and the
//! upper-bound property checks rely on.

use crate::geometry::{box_max_dot, to_polar, AxisBox, CartesianPoint, GeometryError};
use std::f64::consts::FRAC_PI_2;
use std::fmt;

/// A smoothing model with magnitude `delta`.
///
/// * `RectangleShift`: each coordinate is inflated by an independent factor
///   in `[1, 1+delta]`.
/// * `SquareShift`: each coordinate gains an independent additive term in
///   `[0, delta * max_k v_k]`.
/// * `AngleShift` (two items only): the norm is preserved and the polar angle
///   is redrawn uniformly from `[max(0, t-delta), min(pi/2, t+delta)]`.
/// * `AdditiveNoise`: each coordinate gains an independent additive term in
///   `[0, delta * v_max]`; the base support must sit inside `[0, v_max]^m`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PerturbationModel {
    RectangleShift { delta: f64 },
    SquareShift { delta: f64 },
    AngleShift { delta: f64 },
    AdditiveNoise { delta: f64, v_max: f64 },
}

impl PerturbationModel {
    pub fn delta(&self) -> f64 {
        match *self {
            PerturbationModel::RectangleShift { delta }
            | PerturbationModel::SquareShift { delta }
            | PerturbationModel::AngleShift { delta }
            | PerturbationModel::AdditiveNoise { delta, .. } => delta,
        }
    }

    pub fn validate(&self) -> Result<(), PerturbError> {
        let d = self.delta();
        if !(d > 0.0 && d.is_finite()) {
            return Err(PerturbError::BadDelta(d));
        }
        if let PerturbationModel::AdditiveNoise { v_max, .. } = *self {
            if !(v_max > 0.0 && v_max.is_finite()) {
                return Err(PerturbError::BadVMax(v_max));
            }
        }
        Ok(())
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            PerturbationModel::RectangleShift { .. } => "rectangle-shift",
            PerturbationModel::SquareShift { .. } => "square-shift",
            PerturbationModel::AngleShift { .. } => "angle-shift",
            PerturbationModel::AdditiveNoise { .. } => "additive-noise",
        }
    }
}

/// Normalized noise draws: one entry per item in `[0, 1]`, except under
/// `AngleShift` where it is a single entry in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseVector(pub Vec<f64>);

#[derive(Clone, Debug, PartialEq)]
pub enum PerturbError {
    BadDelta(f64),
    BadVMax(f64),
    NoiseOutOfRange { index: usize, value: f64 },
    NoiseLength { expected: usize, got: usize },
    AngleShiftNeedsTwoItems { m: usize },
    RegionNotABox,
    ZeroPoint,
    Geometry(GeometryError),
}

impl fmt::Display for PerturbError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PerturbError::BadDelta(d) => write!(f, "delta must be positive and finite, got {d}"),
            PerturbError::BadVMax(v) => write!(f, "v_max must be positive and finite, got {v}"),
            PerturbError::NoiseOutOfRange { index, value } => {
                write!(f, "noise entry {index} out of range ({value})")
            }
            PerturbError::NoiseLength { expected, got } => {
                write!(f, "noise length mismatch: expected {expected}, got {got}")
            }
            PerturbError::AngleShiftNeedsTwoItems { m } => {
                write!(f, "angle-shift is defined for m = 2 only (got m = {m})")
            }
            PerturbError::RegionNotABox => {
                write!(f, "angle-shift image is an arc, not an axis-aligned box")
            }
            PerturbError::ZeroPoint => write!(f, "operation undefined at the origin"),
            PerturbError::Geometry(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for PerturbError {}

impl From<GeometryError> for PerturbError {
    fn from(e: GeometryError) -> Self {
        PerturbError::Geometry(e)
    }
}

fn check_noise(model: &PerturbationModel, m: usize, noise: &NoiseVector) -> Result<(), PerturbError> {
    match model {
        PerturbationModel::AngleShift { .. } => {
            if m != 2 {
                return Err(PerturbError::AngleShiftNeedsTwoItems { m });
            }
            if noise.0.len() != 1 {
                return Err(PerturbError::NoiseLength { expected: 1, got: noise.0.len() });
            }
            let u = noise.0[0];
            if !(-1.0..=1.0).contains(&u) {
                return Err(PerturbError::NoiseOutOfRange { index: 0, value: u });
            }
        }
        _ => {
            if noise.0.len() != m {
                return Err(PerturbError::NoiseLength { expected: m, got: noise.0.len() });
            }
            for (i, &u) in noise.0.iter().enumerate() {
                if !(0.0..=1.0).contains(&u) {
                    return Err(PerturbError::NoiseOutOfRange { index: i, value: u });
                }
            }
        }
    }
    Ok(())
}

/// Applies the model to `v` with the given normalized noise. Deterministic;
/// sampling lives in the distributions module.
///
/// Under `AngleShift` the noise entry parametrizes the clipped admissible arc
/// `[max(0, t-delta), min(pi/2, t+delta)]` linearly, so uniform noise yields
/// the uniform angle density of the model. When the arc is not clipped,
/// zero noise is the identity.
pub fn apply(
    model: &PerturbationModel,
    v: &CartesianPoint,
    noise: &NoiseVector,
) -> Result<CartesianPoint, PerturbError> {
    model.validate()?;
    check_noise(model, v.dim(), noise)?;
    match *model {
        PerturbationModel::RectangleShift { delta } => Ok(CartesianPoint {
            coords: v
                .coords
                .iter()
                .zip(&noise.0)
                .map(|(&x, &u)| x * (1.0 + delta * u))
                .collect(),
        }),
        PerturbationModel::SquareShift { delta } => {
            let mx = v.coords.iter().copied().fold(0.0, f64::max);
            Ok(CartesianPoint {
                coords: v
                    .coords
                    .iter()
                    .zip(&noise.0)
                    .map(|(&x, &u)| x + delta * u * mx)
                    .collect(),
            })
        }
        PerturbationModel::AngleShift { delta } => {
            let polar = to_polar(v)?;
            let theta = polar.angles[0];
            let lo = (theta - delta).max(0.0);
            let hi = (theta + delta).min(FRAC_PI_2);
            let t = lo + (noise.0[0] + 1.0) * 0.5 * (hi - lo);
            Ok(CartesianPoint {
                coords: vec![polar.radius * t.cos(), polar.radius * t.sin()],
            })
        }
        PerturbationModel::AdditiveNoise { delta, v_max } => Ok(CartesianPoint {
            coords: v
                .coords
                .iter()
                .zip(&noise.0)
                .map(|(&x, &u)| x + delta * u * v_max)
                .collect(),
        }),
    }
}

/// The set of points `v` can map to, as an axis-aligned box. Errors for
/// `AngleShift`, whose image is an arc.
pub fn image_region(model: &PerturbationModel, v: &CartesianPoint) -> Result<AxisBox, PerturbError> {
    model.validate()?;
    let lo = v.coords.clone();
    let hi: Vec<f64> = match *model {
        PerturbationModel::RectangleShift { delta } => {
            v.coords.iter().map(|&x| x * (1.0 + delta)).collect()
        }
        PerturbationModel::SquareShift { delta } => {
            let mx = v.coords.iter().copied().fold(0.0, f64::max);
            v.coords.iter().map(|&x| x + delta * mx).collect()
        }
        PerturbationModel::AdditiveNoise { delta, v_max } => {
            v.coords.iter().map(|&x| x + delta * v_max).collect()
        }
        PerturbationModel::AngleShift { .. } => return Err(PerturbError::RegionNotABox),
    };
    Ok(AxisBox::new(lo, hi)?)
}

/// True iff `v_hat` lies in the image region of `v`, i.e. `v` could have been
/// smoothed into `v_hat`.
pub fn preimage_contains(
    model: &PerturbationModel,
    v: &CartesianPoint,
    v_hat: &CartesianPoint,
) -> Result<bool, PerturbError> {
    let region = image_region(model, v)?;
    if v_hat.dim() != v.dim() {
        return Err(PerturbError::Geometry(GeometryError::DimensionMismatch {
            expected: v.dim(),
            got: v_hat.dim(),
        }));
    }
    Ok(region.contains(&v_hat.coords))
}

/// Radii at which the ray with direction `trig(angles)` crosses the image
/// region of `x`. `None` when the ray misses the box. When nonempty the ratio
/// `r_hi / r_lo` is at most `1 + delta`.
pub fn radial_interval(
    model: &PerturbationModel,
    x: &CartesianPoint,
    angles: &[f64],
) -> Result<Option<(f64, f64)>, PerturbError> {
    match model {
        PerturbationModel::RectangleShift { .. } | PerturbationModel::SquareShift { .. } => {}
        _ => return Err(PerturbError::RegionNotABox),
    }
    if x.coords.iter().all(|&c| c == 0.0) {
        return Err(PerturbError::ZeroPoint);
    }
    if angles.len() + 1 != x.dim() {
        return Err(PerturbError::Geometry(GeometryError::DimensionMismatch {
            expected: x.dim(),
            got: angles.len() + 1,
        }));
    }
    let region = image_region(model, x)?;
    let dir = crate::geometry::trig_vector(angles);
    let mut r_lo = 0.0f64;
    let mut r_hi = f64::INFINITY;
    for j in 0..x.dim() {
        let d = dir.coords[j];
        if d <= 0.0 {
            // the ray is constant 0 in this coordinate
            if region.lo()[j] > 0.0 {
                return Ok(None);
            }
        } else {
            r_lo = r_lo.max(region.lo()[j] / d);
            r_hi = r_hi.min(region.hi()[j] / d);
        }
    }
    if r_lo > r_hi {
        return Ok(None);
    }
    Ok(Some((r_lo, r_hi)))
}

/// Angle band `[t(1-delta), t(1+delta)]` clipped to `[0, pi/2]`; under
/// `RectangleShift` every point of the image region has its polar angle
/// inside this band.
pub fn angle_deviation_bound(theta: f64, delta: f64) -> (f64, f64) {
    let lo = (theta * (1.0 - delta)).max(0.0);
    let hi = (theta * (1.0 + delta)).min(FRAC_PI_2);
    (lo, hi)
}

/// Largest dot product of any image-region point of `x` with `w >= 0`;
/// convenience used by the incentive checks.
pub fn region_max_dot(
    model: &PerturbationModel,
    x: &CartesianPoint,
    w: &[f64],
) -> Result<f64, PerturbError> {
    let region = image_region(model, x)?;
    Ok(box_max_dot(&region, w)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::to_polar;
    use rand::Rng as _;
    use rand::SeedableRng;

    fn pt(v: &[f64]) -> CartesianPoint {
        CartesianPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rectangle_and_square_formulas() {
        let rect = PerturbationModel::RectangleShift { delta: 0.1 };
        let out = apply(&rect, &pt(&[4.0, 2.0]), &NoiseVector(vec![1.0, 1.0])).unwrap();
        assert!((out.coords[0] - 4.4).abs() < 1e-12 && (out.coords[1] - 2.2).abs() < 1e-12);

        let sq = PerturbationModel::SquareShift { delta: 0.1 };
        let out = apply(&sq, &pt(&[4.0, 2.0]), &NoiseVector(vec![0.5, 1.0])).unwrap();
        assert!((out.coords[0] - 4.2).abs() < 1e-12 && (out.coords[1] - 2.4).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_is_identity_away_from_clipping() {
        let v = pt(&[3.0, 1.0]);
        for model in [
            PerturbationModel::RectangleShift { delta: 0.2 },
            PerturbationModel::SquareShift { delta: 0.2 },
            PerturbationModel::AdditiveNoise { delta: 0.2, v_max: 5.0 },
        ] {
            let out = apply(&model, &v, &NoiseVector(vec![0.0, 0.0])).unwrap();
            assert_eq!(out.coords, v.coords);
        }
        // interior angle: [t - d, t + d] inside [0, pi/2]
        let model = PerturbationModel::AngleShift { delta: 0.2 };
        let out = apply(&model, &v, &NoiseVector(vec![0.0])).unwrap();
        for j in 0..2 {
            assert!((out.coords[j] - v.coords[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn angle_shift_preserves_norm_and_clips() {
        let model = PerturbationModel::AngleShift { delta: 0.5 };
        let v = pt(&[1.0, 0.1]);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let u = rng.gen_range(-1.0..=1.0);
            let out = apply(&model, &v, &NoiseVector(vec![u])).unwrap();
            assert!((out.norm() - v.norm()).abs() < 1e-12);
            let a = to_polar(&out).unwrap().angles[0];
            assert!((0.0..=FRAC_PI_2).contains(&a));
        }
        assert!(matches!(
            apply(&model, &pt(&[1.0, 1.0, 1.0]), &NoiseVector(vec![0.0])),
            Err(PerturbError::AngleShiftNeedsTwoItems { m: 3 })
        ));
    }

    #[test]
    fn image_regions_match_formulas() {
        let v = pt(&[4.0, 2.0]);
        let rect = image_region(&PerturbationModel::RectangleShift { delta: 0.1 }, &v).unwrap();
        assert_eq!(rect.lo(), &[4.0, 2.0]);
        assert!((rect.hi()[0] - 4.4).abs() < 1e-12 && (rect.hi()[1] - 2.2).abs() < 1e-12);

        let sq = image_region(&PerturbationModel::SquareShift { delta: 0.1 }, &v).unwrap();
        assert!((sq.hi()[0] - 4.4).abs() < 1e-12 && (sq.hi()[1] - 2.4).abs() < 1e-12);

        let zero = image_region(&PerturbationModel::SquareShift { delta: 0.1 }, &pt(&[0.0, 0.0]))
            .unwrap();
        assert_eq!(zero.lo(), zero.hi());

        assert!(matches!(
            image_region(&PerturbationModel::AngleShift { delta: 0.1 }, &v),
            Err(PerturbError::RegionNotABox)
        ));
    }

    #[test]
    fn membership_and_dominance_hold_for_random_noise() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(4);
        let models = [
            PerturbationModel::RectangleShift { delta: 0.3 },
            PerturbationModel::SquareShift { delta: 0.3 },
            PerturbationModel::AdditiveNoise { delta: 0.3, v_max: 10.0 },
        ];
        for _ in 0..3000 {
            let m = rng.gen_range(1..=5);
            let v: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..8.0)).collect();
            let noise = NoiseVector((0..m).map(|_| rng.gen_range(0.0..=1.0)).collect());
            let v = pt(&v);
            for model in &models {
                let out = apply(model, &v, &noise).unwrap();
                for j in 0..m {
                    assert!(out.coords[j] >= v.coords[j]);
                }
                assert!(preimage_contains(model, &v, &out).unwrap());
            }
        }
    }

    #[test]
    fn preimage_examples() {
        let model = PerturbationModel::RectangleShift { delta: 0.1 };
        let v = pt(&[4.0, 2.0]);
        assert!(preimage_contains(&model, &v, &pt(&[4.3, 2.1])).unwrap());
        assert!(!preimage_contains(&model, &v, &pt(&[4.5, 2.1])).unwrap());
        assert!(preimage_contains(&model, &v, &v).unwrap());
    }

    #[test]
    fn radial_interval_diagonal_and_axis() {
        let model = PerturbationModel::SquareShift { delta: 0.1 };
        let x = pt(&[1.0, 1.0]);
        let (lo, hi) = radial_interval(&model, &x, &[std::f64::consts::FRAC_PI_4])
            .unwrap()
            .unwrap();
        let s2 = std::f64::consts::SQRT_2;
        assert!((lo - s2).abs() < 1e-12 && (hi - 1.1 * s2).abs() < 1e-12);
        assert!((hi / lo - 1.1).abs() < 1e-12);

        assert!(radial_interval(&model, &x, &[0.0]).unwrap().is_none());
        assert!(matches!(
            radial_interval(&model, &pt(&[0.0, 0.0]), &[0.3]),
            Err(PerturbError::ZeroPoint)
        ));
    }

    #[test]
    fn radial_ratio_never_exceeds_one_plus_delta() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        for _ in 0..20_000 {
            let m = rng.gen_range(2..=4);
            let delta = rng.gen_range(0.01..0.9);
            let model = if rng.gen_bool(0.5) {
                PerturbationModel::RectangleShift { delta }
            } else {
                PerturbationModel::SquareShift { delta }
            };
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(0.001..5.0)).collect();
            let angles: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(0.0..FRAC_PI_2)).collect();
            if let Some((lo, hi)) = radial_interval(&model, &pt(&x), &angles).unwrap() {
                assert!(hi <= (1.0 + delta) * lo * (1.0 + 1e-12), "ratio {}", hi / lo);
            }
        }
    }

    #[test]
    fn rectangle_corner_angles_stay_in_band() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(6);
        for _ in 0..10_000 {
            let delta = rng.gen_range(0.01..0.49);
            let r = rng.gen_range(0.1..5.0);
            let theta = rng.gen_range(0.0..FRAC_PI_2);
            let v = pt(&[r * theta.cos(), r * theta.sin()]);
            let region =
                image_region(&PerturbationModel::RectangleShift { delta }, &v).unwrap();
            let (lo, hi) = angle_deviation_bound(theta, delta);
            for corner in region.corners() {
                let a = to_polar(&pt(&corner)).unwrap().angles[0];
                assert!(
                    a >= lo - 1e-9 && a <= hi + 1e-9,
                    "theta={theta} delta={delta} corner angle {a} outside [{lo}, {hi}]"
                );
            }
        }
        assert_eq!(angle_deviation_bound(0.0, 0.3), (0.0, 0.0));
        let (lo, hi) = angle_deviation_bound(0.4, 0.1);
        assert!((lo - 0.36).abs() < 1e-15 && (hi - 0.44).abs() < 1e-15);
    }
}
