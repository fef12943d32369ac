//! Mechanism evaluation and optimization: posted prices, lottery menus with
//! exact incentive verification, an embedded simplex with LP-optimal menus,
//! and single-item auctions for correlated bidders.

pub mod auctions;
pub mod lp;
pub mod menu;
pub mod menu_lp;
pub mod pricing;

use std::fmt;

/// How a revenue figure was obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    Exact,
    MonteCarlo { stderr: f64, samples: usize },
}

/// What achieves the reported revenue.
#[derive(Clone, Debug, PartialEq)]
pub enum Optimizer {
    BundlePrice { ln_price: f64 },
    ItemPrices(Vec<f64>),
    Menu,
    Auction,
}

/// A revenue value with provenance. `ln_revenue` is authoritative; `revenue`
/// is its materialization and may overflow for the log-scaled constructions.
#[derive(Clone, Debug)]
pub struct RevenueReport {
    pub ln_revenue: f64,
    pub method: Method,
    pub optimizer: Optimizer,
}

impl RevenueReport {
    pub fn revenue(&self) -> f64 {
        self.ln_revenue.exp()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MechanismError {
    Dimension { expected: usize, got: usize },
    AllocationOutOfRange { entry: usize, coord: usize, value: f64 },
    NegativePrice { entry: usize },
    NeedsMonteCarlo { m: usize },
    NeedsTwoBuyers,
    SizeLimit(String),
    BadInput(String),
    Lp(lp::LpError),
    Json(String),
}

impl fmt::Display for MechanismError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MechanismError::Dimension { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            MechanismError::AllocationOutOfRange { entry, coord, value } => {
                write!(f, "entry {entry} allocation coordinate {coord} outside [0,1] ({value})")
            }
            MechanismError::NegativePrice { entry } => write!(f, "entry {entry} has negative price"),
            MechanismError::NeedsMonteCarlo { m } => {
                write!(f, "no closed-form bundle tail for m = {m} items; use the Monte Carlo path")
            }
            MechanismError::NeedsTwoBuyers => write!(f, "auction requires at least two buyers"),
            MechanismError::SizeLimit(s) => write!(f, "size limit exceeded: {s}"),
            MechanismError::BadInput(s) => write!(f, "{s}"),
            MechanismError::Lp(e) => write!(f, "lp: {e}"),
            MechanismError::Json(s) => write!(f, "json: {s}"),
        }
    }
}

impl std::error::Error for MechanismError {}

impl From<lp::LpError> for MechanismError {
    fn from(e: lp::LpError) -> Self {
        MechanismError::Lp(e)
    }
}
