//! Cartesian/polar transforms on the nonnegative orthant, axis-aligned boxes,
//! and the linear-over-box minimization that makes gap computation exact.
//!
//! Polar convention: `x_1 = r cos t_1`, `x_2 = r sin t_1 cos t_2`, ...,
//! `x_m = r prod_k sin t_k`, with every angle in `[0, pi/2]`. The origin gets
//! radius 0 and all angles 0.

use std::fmt;

/// Nonnegative value vector, one coordinate per item.
#[derive(Clone, Debug, PartialEq)]
pub struct CartesianPoint {
    pub coords: Vec<f64>,
}

/// Polar form of a nonnegative vector: a radius and `m-1` angles in `[0, pi/2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarPoint {
    pub radius: f64,
    pub angles: Vec<f64>,
}

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_m, hi_m]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GeometryError {
    NegativeCoordinate { index: usize, value: f64 },
    AngleOutOfRange { index: usize, value: f64 },
    NegativeRadius { value: f64 },
    DimensionMismatch { expected: usize, got: usize },
    InvalidBox { index: usize, lo: f64, hi: f64 },
    Empty,
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::NegativeCoordinate { index, value } => {
                write!(f, "coordinate {index} is negative ({value})")
            }
            GeometryError::AngleOutOfRange { index, value } => {
                write!(f, "angle {index} outside [0, pi/2] ({value})")
            }
            GeometryError::NegativeRadius { value } => write!(f, "negative radius ({value})"),
            GeometryError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            GeometryError::InvalidBox { index, lo, hi } => {
                write!(f, "box has lo > hi at coordinate {index} ({lo} > {hi})")
            }
            GeometryError::Empty => write!(f, "empty point"),
        }
    }
}

impl std::error::Error for GeometryError {}

impl CartesianPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self, GeometryError> {
        if coords.is_empty() {
            return Err(GeometryError::Empty);
        }
        for (i, &c) in coords.iter().enumerate() {
            if !(c >= 0.0) {
                return Err(GeometryError::NegativeCoordinate { index: i, value: c });
            }
        }
        Ok(CartesianPoint { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.coords.iter().sum()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.coords.iter().zip(other).map(|(a, b)| a * b).sum()
    }
}

impl PolarPoint {
    pub fn new(radius: f64, angles: Vec<f64>) -> Result<Self, GeometryError> {
        if !(radius >= 0.0) {
            return Err(GeometryError::NegativeRadius { value: radius });
        }
        for (i, &a) in angles.iter().enumerate() {
            if !(0.0..=std::f64::consts::FRAC_PI_2 + 1e-15).contains(&a) {
                return Err(GeometryError::AngleOutOfRange { index: i, value: a });
            }
        }
        Ok(PolarPoint { radius, angles })
    }

    pub fn dim(&self) -> usize {
        self.angles.len() + 1
    }
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, GeometryError> {
        if lo.len() != hi.len() {
            return Err(GeometryError::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        for i in 0..lo.len() {
            if !(lo[i] <= hi[i]) {
                return Err(GeometryError::InvalidBox { index: i, lo: lo[i], hi: hi[i] });
            }
        }
        Ok(AxisBox { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&x, (&l, &h))| l <= x && x <= h)
    }

    /// All `2^m` corners, lexicographic in the lo/hi choice per coordinate.
    pub fn corners(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        let m = self.dim();
        assert!(m <= 24, "corner enumeration only supported up to dimension 24");
        (0..(1usize << m)).map(move |mask| {
            (0..m)
                .map(|j| if mask >> j & 1 == 0 { self.lo[j] } else { self.hi[j] })
                .collect()
        })
    }
}

/// Polar form of `v`. Radius is the Euclidean norm; trailing zero blocks get
/// angle 0, so the map is total on the nonnegative orthant.
pub fn to_polar(v: &CartesianPoint) -> Result<PolarPoint, GeometryError> {
    let m = v.dim();
    for (i, &c) in v.coords.iter().enumerate() {
        if !(c >= 0.0) {
            return Err(GeometryError::NegativeCoordinate { index: i, value: c });
        }
    }
    // tail_norm[j] = || (x_j, ..., x_m) ||
    let mut tail = vec![0.0; m + 1];
    for j in (0..m).rev() {
        tail[j] = (v.coords[j] * v.coords[j] + tail[j + 1] * tail[j + 1]).sqrt();
    }
    let mut angles = Vec::with_capacity(m.saturating_sub(1));
    for j in 0..m.saturating_sub(1) {
        angles.push(tail[j + 1].atan2(v.coords[j]));
    }
    Ok(PolarPoint { radius: tail[0], angles })
}

/// Inverse of [`to_polar`]: `radius * trig_vector(angles)`.
pub fn from_polar(p: &PolarPoint) -> CartesianPoint {
    let dir = trig_vector(&p.angles);
    CartesianPoint { coords: dir.coords.iter().map(|d| p.radius * d).collect() }
}

/// Unit direction vector `trig_j = cos t_j * prod_{k<j} sin t_k` (last entry
/// is the full sine product). Always has Euclidean norm 1 and max entry at
/// least `1/sqrt(m)`.
pub fn trig_vector(angles: &[f64]) -> CartesianPoint {
    let m = angles.len() + 1;
    let mut coords = Vec::with_capacity(m);
    let mut sin_prod = 1.0;
    for &a in angles {
        coords.push(sin_prod * a.cos());
        sin_prod *= a.sin();
    }
    coords.push(sin_prod);
    CartesianPoint { coords }
}

/// Exact `min_{x in box} x . w` for a signed weight vector: pick `lo_j` where
/// `w_j >= 0` and `hi_j` otherwise.
pub fn box_min_dot(b: &AxisBox, w: &[f64]) -> Result<f64, GeometryError> {
    if w.len() != b.dim() {
        return Err(GeometryError::DimensionMismatch { expected: b.dim(), got: w.len() });
    }
    let mut acc = 0.0;
    for j in 0..w.len() {
        acc += if w[j] >= 0.0 { b.lo[j] } else { b.hi[j] } * w[j];
    }
    Ok(acc)
}

/// Exact `max_{x in box} x . w`.
pub fn box_max_dot(b: &AxisBox, w: &[f64]) -> Result<f64, GeometryError> {
    if w.len() != b.dim() {
        return Err(GeometryError::DimensionMismatch { expected: b.dim(), got: w.len() });
    }
    let mut acc = 0.0;
    for j in 0..w.len() {
        acc += if w[j] >= 0.0 { b.hi[j] } else { b.lo[j] } * w[j];
    }
    Ok(acc)
}

/// Composite Gauss-Legendre quadrature of `f` on `[a, b]` with `nodes` total
/// points split over 32-point panels.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, nodes: usize) -> f64 {
    let panel_nodes = 32.min(nodes.max(2));
    let panels = nodes.div_ceil(panel_nodes).max(1);
    let (xs, ws) = legendre_nodes(panel_nodes);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let half = 0.5 * h;
        for (&x, &w) in xs.iter().zip(&ws) {
            total += w * f(mid + half * x);
        }
    }
    total * 0.5 * (b - a) / panels as f64
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// by Newton iteration on the Legendre polynomial.
fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-based initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_eval(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_eval(n, x);
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    xs.reverse();
    ws.reverse();
    (xs, ws)
}

/// Legendre polynomial `P_n(x)` and derivative via the three-term recurrence.
fn legendre_eval(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Numerically evaluates the `(m-1)`-dimensional angular volume element
/// `int_{[0,pi/2]^{m-1}} prod_{j=1}^{m-2} (sin t_j)^{m-j-1} dt` as a product
/// of one-dimensional integrals. Returns `(value, error_estimate)`.
pub fn sin_power_integral(m: usize, quadrature_points: usize) -> (f64, f64) {
    assert!(m >= 2, "sin_power_integral requires m >= 2");
    assert!(quadrature_points >= 64, "need at least 64 quadrature points");
    let half_pi = std::f64::consts::FRAC_PI_2;
    let eval = |nodes: usize| -> f64 {
        let mut prod = half_pi; // the last angle integrates the constant 1
        for j in 1..=m.saturating_sub(2) {
            let k = (m - j - 1) as i32;
            prod *= gauss_legendre(|t| t.sin().powi(k), 0.0, half_pi, nodes);
        }
        prod
    };
    let full = eval(quadrature_points);
    let half = eval((quadrature_points / 2).max(64));
    (full, (full - half).abs().max(f64::EPSILON * full.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;
    use rand::SeedableRng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI, SQRT_2};

    fn pt(v: &[f64]) -> CartesianPoint {
        CartesianPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn axis_and_diagonal_points() {
        let p = to_polar(&pt(&[1.0, 0.0])).unwrap();
        assert!((p.radius - 1.0).abs() < 1e-15 && p.angles[0].abs() < 1e-15);
        let p = to_polar(&pt(&[1.0, 1.0])).unwrap();
        assert!((p.radius - SQRT_2).abs() < 1e-15);
        assert!((p.angles[0] - FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn three_four_five_round_trip() {
        let p = to_polar(&pt(&[3.0, 4.0])).unwrap();
        assert!((p.radius - 5.0).abs() < 1e-12);
        assert!((p.angles[0] - 0.9272952180016122).abs() < 1e-9);
        let back = from_polar(&p);
        assert!((back.coords[0] - 3.0).abs() < 1e-12);
        assert!((back.coords[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn from_polar_matches_spec_vector() {
        let p = PolarPoint::new(1.0, vec![FRAC_PI_4, FRAC_PI_3]).unwrap();
        let v = from_polar(&p);
        assert!((v.coords[0] - 0.70711).abs() < 1e-5);
        assert!((v.coords[1] - 0.35355).abs() < 1e-5);
        assert!((v.coords[2] - 0.61237).abs() < 1e-5);
        let norm2: f64 = v.coords.iter().map(|c| c * c).sum();
        assert!((norm2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn origin_gets_zero_angles() {
        let p = to_polar(&pt(&[0.0, 0.0, 0.0])).unwrap();
        assert_eq!(p.radius, 0.0);
        assert!(p.angles.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn axis_point_from_polar() {
        let v = from_polar(&PolarPoint::new(2.0, vec![FRAC_PI_2]).unwrap());
        assert!(v.coords[0].abs() < 1e-15 && (v.coords[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn round_trip_random_vectors() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for _ in 0..20_000 {
            let m = rng.gen_range(1..=8);
            let v: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..10.0)).collect();
            let p = to_polar(&pt(&v)).unwrap();
            let back = from_polar(&p);
            let norm = p.radius.max(1e-300);
            for j in 0..m {
                assert!((back.coords[j] - v[j]).abs() <= 1e-10 * norm, "{v:?} -> {back:?}");
            }
        }
    }

    #[test]
    fn trig_vector_norm_and_max() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(12);
        for _ in 0..20_000 {
            let m = rng.gen_range(2..=8);
            let angles: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(0.0..FRAC_PI_2)).collect();
            let t = trig_vector(&angles);
            let norm2: f64 = t.coords.iter().map(|c| c * c).sum();
            assert!((norm2 - 1.0).abs() < 1e-12);
            let mx = t.coords.iter().copied().fold(f64::MIN, f64::max);
            assert!(mx >= 1.0 / (m as f64).sqrt() - 1e-12);
        }
        let t = trig_vector(&[FRAC_PI_4, FRAC_PI_3]);
        let mx = t.coords.iter().copied().fold(f64::MIN, f64::max);
        assert!((mx - 0.70711).abs() < 1e-5 && mx >= 1.0 / 3f64.sqrt());
        let t = trig_vector(&[0.0]);
        assert_eq!(t.coords, vec![1.0, 0.0]);
    }

    #[test]
    fn box_min_dot_examples_and_corner_oracle() {
        let b = AxisBox::new(vec![1.0, 2.0], vec![1.1, 2.2]).unwrap();
        assert!((box_min_dot(&b, &[1.0, -1.0]).unwrap() + 1.2).abs() < 1e-15);
        assert_eq!(box_min_dot(&b, &[0.0, 0.0]).unwrap(), 0.0);
        let degenerate = AxisBox::new(vec![3.0, 4.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(box_min_dot(&degenerate, &[2.0, -1.0]).unwrap(), 2.0);

        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(13);
        for _ in 0..2000 {
            let m = rng.gen_range(1..=10);
            let lo: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..5.0)).collect();
            let hi: Vec<f64> = lo.iter().map(|&l| l + rng.gen_range(0.0..3.0)).collect();
            let w: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b = AxisBox::new(lo, hi).unwrap();
            let fast = box_min_dot(&b, &w).unwrap();
            let brute = b
                .corners()
                .map(|c| c.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            assert!((fast - brute).abs() <= 1e-12 * (1.0 + brute.abs()));
        }
    }

    #[test]
    fn box_dot_dimension_mismatch() {
        let b = AxisBox::new(vec![0.0], vec![1.0]).unwrap();
        assert!(matches!(
            box_min_dot(&b, &[1.0, 2.0]),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sin_power_integral_small_m() {
        let (v2, _) = sin_power_integral(2, 256);
        assert!((v2 - FRAC_PI_2).abs() < 1e-12);
        let (v3, _) = sin_power_integral(3, 256);
        assert!((v3 - FRAC_PI_2).abs() < 1e-12, "closed form at m=3 is pi/2, got {v3}");
        let (v4, _) = sin_power_integral(4, 256);
        assert!((v4 - PI * PI / 8.0).abs() < 1e-10);
    }

    #[test]
    fn sin_power_integral_under_exponential_bound() {
        for m in 2..=8 {
            let (v, err) = sin_power_integral(m, 256);
            let mf = m as f64;
            let bound = (PI * std::f64::consts::E / 2.0).sqrt().powi(m as i32) * mf
                / mf.sqrt().powi(m as i32);
            assert!(v <= bound + err + 1e-9, "m={m}: {v} > {bound}");
        }
    }

    #[test]
    fn gauss_legendre_is_accurate() {
        let v = gauss_legendre(|x| x * x, 0.0, 1.0, 256);
        assert!((v - 1.0 / 3.0).abs() < 1e-14);
        let v = gauss_legendre(f64::sin, 0.0, PI, 128);
        assert!((v - 2.0).abs() < 1e-13);
    }
}
