//! Scale-robust positive numbers stored as natural logarithms.
//!
//! Menu prices in the lower-bound constructions grow like `4^i / prod(gap_j)`
//! with gaps as small as 1e-7, so after a few thousand entries the linear
//! value is far outside `f64` range. [`LogScaled`] keeps the logarithm and
//! only materializes a linear value on request.

use std::cmp::Ordering;
use std::fmt;

/// A positive quantity represented by its natural logarithm.
#[derive(Clone, Copy, PartialEq, PartialOrd)]
pub struct LogScaled {
    ln: f64,
}

impl LogScaled {
    /// Wraps a positive linear value. Zero maps to `ln = -inf`.
    pub fn from_value(v: f64) -> Self {
        assert!(v >= 0.0 && !v.is_nan(), "LogScaled requires a value >= 0");
        LogScaled { ln: v.ln() }
    }

    /// Wraps a quantity given directly as a natural logarithm.
    pub fn from_ln(ln: f64) -> Self {
        assert!(!ln.is_nan(), "LogScaled log must not be NaN");
        LogScaled { ln }
    }

    pub fn ln(&self) -> f64 {
        self.ln
    }

    /// Linear value; overflows to `inf` (or underflows to 0) outside f64 range.
    pub fn to_f64(&self) -> f64 {
        self.ln.exp()
    }

    /// True when the linear value fits in a normal f64.
    pub fn representable(&self) -> bool {
        self.ln.abs() < 700.0
    }

    pub fn mul(self, rhs: LogScaled) -> LogScaled {
        LogScaled { ln: self.ln + rhs.ln }
    }

    pub fn div(self, rhs: LogScaled) -> LogScaled {
        LogScaled { ln: self.ln - rhs.ln }
    }

    /// Sum in the linear domain, evaluated without leaving log space.
    pub fn add(self, rhs: LogScaled) -> LogScaled {
        LogScaled { ln: ln_add_exp(self.ln, rhs.ln) }
    }

    pub fn powi(self, k: i32) -> LogScaled {
        LogScaled { ln: self.ln * f64::from(k) }
    }

    /// Total order on the underlying logs (no NaN by construction).
    pub fn total_cmp(&self, other: &LogScaled) -> Ordering {
        self.ln.total_cmp(&other.ln)
    }
}

impl fmt::Debug for LogScaled {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.representable() {
            write!(f, "LogScaled({})", self.to_f64())
        } else {
            write!(f, "LogScaled(exp {})", self.ln)
        }
    }
}

impl fmt::Display for LogScaled {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.representable() {
            write!(f, "{}", self.to_f64())
        } else {
            write!(f, "exp({})", self.ln)
        }
    }
}

/// `ln(e^a + e^b)` without overflow.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a >= b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// `ln(sum_i e^{x_i})` over a slice; `-inf` for an empty slice.
pub fn ln_sum_exp(xs: &[f64]) -> f64 {
    let mx = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| (x - mx).exp()).sum();
    mx + s.ln()
}

/// `ln(c + t)` where `c = e^{ln_c}` and `t >= 0` is a plain value.
pub fn ln_of_exp_plus(ln_c: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if t == 0.0 {
        return ln_c;
    }
    ln_add_exp(ln_c, t.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_matches_linear_within_range() {
        let a = LogScaled::from_value(3.5e120);
        let b = LogScaled::from_value(2.0e-80);
        let p = a.mul(b);
        assert!((p.to_f64() - 7.0e40).abs() / 7.0e40 < 1e-12);
    }

    #[test]
    fn add_is_safe_far_outside_f64_range() {
        let a = LogScaled::from_ln(5000.0);
        let b = LogScaled::from_ln(4990.0);
        let s = a.add(b);
        // ln(e^5000 + e^4990) = 5000 + ln(1 + e^-10)
        assert!((s.ln() - (5000.0 + (-10.0f64).exp().ln_1p())).abs() < 1e-12);
        assert!(!s.representable());
    }

    #[test]
    fn ln_sum_exp_handles_empty_and_spread() {
        assert_eq!(ln_sum_exp(&[]), f64::NEG_INFINITY);
        let v = ln_sum_exp(&[0.0, 0.0]);
        assert!((v - 2.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn ordering_follows_logs() {
        let a = LogScaled::from_ln(10.0);
        let b = LogScaled::from_ln(11.0);
        assert!(a < b);
        assert_eq!(a.total_cmp(&b), Ordering::Less);
    }
}
