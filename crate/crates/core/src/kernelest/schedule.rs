use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::RegressionDataset;

/// Scale constant in front of `n_hat^{-c1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HScale {
    /// Sample standard deviation of the responses.
    ResponseStd,
    Fixed(f64),
}

impl HScale {
    /// The numeric scale for `data`. A response with zero spread resolves to 1.
    pub fn resolve(self, data: &RegressionDataset) -> f64 {
        match self {
            HScale::Fixed(s) => s,
            HScale::ResponseStd => {
                let s = data.std_y();
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    1.0
                }
            }
        }
    }
}

impl fmt::Display for HScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HScale::ResponseStd => f.write_str("std"),
            HScale::Fixed(s) => write!(f, "{s}"),
        }
    }
}

impl FromStr for HScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "std" {
            return Ok(HScale::ResponseStd);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::Parse(format!("h_scale `{s}` is neither `std` nor a number")))?;
        Ok(HScale::Fixed(v))
    }
}

/// How the density estimate is kept away from zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FloorVariant {
    /// `f_en = max(e_n, f_n)`
    #[default]
    Max,
    /// `f_en = f_n + e_n`
    Add,
}

impl FloorVariant {
    #[inline]
    pub fn apply(self, floor: f64, density: f64) -> f64 {
        match self {
            FloorVariant::Max => floor.max(density),
            FloorVariant::Add => density + floor,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FloorVariant::Max => "max",
            FloorVariant::Add => "add",
        }
    }
}

impl FromStr for FloorVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(FloorVariant::Max),
            "add" => Ok(FloorVariant::Add),
            other => Err(Error::Parse(format!("unknown floor variant `{other}`"))),
        }
    }
}

/// `h(n) = h_scale * n^{-c1}` and `e(n) = e_scale * n^{-c2}`.
///
/// The exponents must satisfy `c2/k + 1/(4k) < c1 < 1/2 - 2 c2` for the kernel
/// order `k`; this is the window in which the covariance estimator reaches the
/// root-n rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSchedule {
    pub h_scale: HScale,
    pub c1: f64,
    pub e_scale: f64,
    pub c2: f64,
}

pub const DEFAULT_C1: f64 = 0.38;
pub const DEFAULT_C2: f64 = 0.05;
pub const DEFAULT_E_SCALE: f64 = 0.01;

impl BandwidthSchedule {
    pub fn new(h_scale: HScale, c1: f64, e_scale: f64, c2: f64, order: u32) -> Result<Self> {
        let s = BandwidthSchedule {
            h_scale,
            c1,
            e_scale,
            c2,
        };
        s.validate(order)?;
        Ok(s)
    }

    pub fn validate(&self, order: u32) -> Result<()> {
        let k = order as f64;
        if let HScale::Fixed(v) = self.h_scale {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidSchedule(format!("h_scale must be > 0, got {v}")));
            }
        }
        if !(self.e_scale > 0.0 && self.e_scale.is_finite()) {
            return Err(Error::InvalidSchedule(format!(
                "e_scale must be > 0, got {}",
                self.e_scale
            )));
        }
        if !(self.c1 > 0.0 && self.c1 < 0.5) {
            return Err(Error::InvalidSchedule(format!("c1 = {} not in (0, 1/2)", self.c1)));
        }
        if !(self.c2 > 0.0 && self.c2 < 0.25) {
            return Err(Error::InvalidSchedule(format!("c2 = {} not in (0, 1/4)", self.c2)));
        }
        let lower = self.c2 / k + 1.0 / (4.0 * k);
        let upper = 0.5 - 2.0 * self.c2;
        if !(lower < self.c1 && self.c1 < upper) {
            return Err(Error::InvalidSchedule(format!(
                "need {lower:.4} < c1 < {upper:.4} for order {order}, got c1 = {}",
                self.c1
            )));
        }
        Ok(())
    }

    /// Bandwidth for `n_hat` samples given the resolved scale.
    pub fn h(&self, n_hat: usize, scale: f64) -> f64 {
        scale * (n_hat as f64).powf(-self.c1)
    }

    /// Density floor for `n_hat` samples.
    pub fn e(&self, n_hat: usize) -> f64 {
        self.e_scale * (n_hat as f64).powf(-self.c2)
    }
}

impl Default for BandwidthSchedule {
    fn default() -> Self {
        BandwidthSchedule {
            h_scale: HScale::ResponseStd,
            c1: DEFAULT_C1,
            e_scale: DEFAULT_E_SCALE,
            c2: DEFAULT_C2,
        }
    }
}

/// Resolved smoothing parameters for one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidths {
    pub h: f64,
    pub e: f64,
}

impl Bandwidths {
    pub fn new(h: f64, e: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidSchedule(format!("bandwidth must be > 0, got {h}")));
        }
        if !(e >= 0.0 && e.is_finite()) {
            return Err(Error::InvalidSchedule(format!("floor must be >= 0, got {e}")));
        }
        Ok(Bandwidths { h, e })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_admissible_for_order_two_and_four() {
        let s = BandwidthSchedule::default();
        s.validate(2).unwrap();
        s.validate(4).unwrap();
    }

    #[test]
    fn window_is_enforced() {
        // 1/(4k) + c2/k = 0.15 for k = 2, c2 = 0.05
        assert!(BandwidthSchedule::new(HScale::Fixed(1.0), 0.14, 0.1, 0.05, 2).is_err());
        // upper bound 1/2 - 2 c2 = 0.4
        assert!(BandwidthSchedule::new(HScale::Fixed(1.0), 0.41, 0.1, 0.05, 2).is_err());
        assert!(BandwidthSchedule::new(HScale::Fixed(1.0), 0.3, 0.1, 0.3, 2).is_err());
        assert!(BandwidthSchedule::new(HScale::Fixed(-1.0), 0.3, 0.1, 0.05, 2).is_err());
        assert!(BandwidthSchedule::new(HScale::Fixed(1.0), 0.3, 0.1, 0.05, 2).is_ok());
    }

    #[test]
    fn schedules_decrease() {
        let s = BandwidthSchedule::default();
        let mut last = (f64::INFINITY, f64::INFINITY);
        for n in [10, 100, 1000, 10_000] {
            let cur = (s.h(n, 1.0), s.e(n));
            assert!(cur.0 > 0.0 && cur.1 > 0.0);
            assert!(cur.0 < last.0 && cur.1 < last.1);
            last = cur;
        }
    }

    #[test]
    fn floor_variants() {
        assert_eq!(FloorVariant::Max.apply(0.1, 0.05), 0.1);
        assert_eq!(FloorVariant::Max.apply(0.1, 0.5), 0.5);
        assert_eq!(FloorVariant::Add.apply(0.1, 0.5), 0.6);
    }
}
