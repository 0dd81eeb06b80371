use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Intervals of the composite Simpson rule used to validate kernels.
pub const QUADRATURE_INTERVALS: usize = 10_000;
const MOMENT_TOL: f64 = 1e-8;
const LIPSCHITZ_BOUND: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    /// `3/4 (1 - u^2)`, order 2.
    Epanechnikov,
    /// Biweight `15/16 (1 - u^2)^2`, order 2.
    Quartic,
    /// `(1 - u^2)(a + b u^2)` with `a, b` solved from the moment conditions,
    /// order 4.
    FourthOrderPolynomial,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [
        KernelKind::Epanechnikov,
        KernelKind::Quartic,
        KernelKind::FourthOrderPolynomial,
    ];

    pub fn natural_order(self) -> u32 {
        match self {
            KernelKind::Epanechnikov | KernelKind::Quartic => 2,
            KernelKind::FourthOrderPolynomial => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::Epanechnikov => "epanechnikov",
            KernelKind::Quartic => "quartic",
            KernelKind::FourthOrderPolynomial => "fourth-order-polynomial",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epanechnikov" => Ok(KernelKind::Epanechnikov),
            "quartic" | "biweight" => Ok(KernelKind::Quartic),
            "fourth-order-polynomial" | "fourth-order" => Ok(KernelKind::FourthOrderPolynomial),
            other => Err(Error::InvalidKernel(format!("unknown kernel id `{other}`"))),
        }
    }
}

/// A symmetric polynomial kernel supported on `[-1, 1]`.
///
/// Stored as coefficients of a polynomial in `u^2`, so evaluation is a short
/// Horner loop. Construction validates normalization, the vanishing moments
/// below the order, and a Lipschitz bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    kind: KernelKind,
    order: u32,
    coeffs: Vec<f64>,
}

impl Kernel {
    pub fn new(kind: KernelKind) -> Result<Self> {
        Self::with_order(kind, kind.natural_order())
    }

    pub fn with_order(kind: KernelKind, order: u32) -> Result<Self> {
        if order < 2 || !order.is_multiple_of(2) {
            return Err(Error::InvalidKernel(format!(
                "order must be an even integer >= 2, got {order}"
            )));
        }
        if order != kind.natural_order() {
            return Err(Error::InvalidKernel(format!(
                "kernel {kind} has order {}, not {order}",
                kind.natural_order()
            )));
        }
        let coeffs = match kind {
            KernelKind::Epanechnikov => vec![0.75, -0.75],
            KernelKind::Quartic => vec![15.0 / 16.0, -30.0 / 16.0, 15.0 / 16.0],
            KernelKind::FourthOrderPolynomial => boundary_vanishing_coeffs(order)?,
        };
        let kernel = Kernel { kind, order, coeffs };
        kernel.validate()?;
        Ok(kernel)
    }

    pub fn epanechnikov() -> Self {
        Self::new(KernelKind::Epanechnikov).expect("epanechnikov kernel is valid")
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Support radius; every kernel here lives on `[-1, 1]`.
    pub fn support(&self) -> f64 {
        1.0
    }

    #[inline]
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn eval(&self, u: f64) -> f64 {
        if !(u.abs() < 1.0) {
            return 0.0;
        }
        let u2 = u * u;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * u2 + c)
    }

    /// `int u^j K(u) du` by composite Simpson on `[-1, 1]`.
    pub fn moment(&self, j: u32) -> f64 {
        simpson(|u| u.powi(j as i32) * self.eval(u), -1.0, 1.0, QUADRATURE_INTERVALS)
    }

    /// Largest finite-difference slope on a uniform grid over `[-1.5, 1.5]`.
    pub fn lipschitz_estimate(&self) -> f64 {
        let n = 30_000;
        let step = 3.0 / n as f64;
        (0..n)
            .map(|i| {
                let a = -1.5 + i as f64 * step;
                ((self.eval(a + step) - self.eval(a)) / step).abs()
            })
            .fold(0.0, f64::max)
    }

    fn validate(&self) -> Result<()> {
        let mass = self.moment(0);
        if (mass - 1.0).abs() > MOMENT_TOL {
            return Err(Error::InvalidKernel(format!("integral is {mass}, not 1")));
        }
        for j in 1..self.order {
            let m = self.moment(j);
            if m.abs() > MOMENT_TOL {
                return Err(Error::InvalidKernel(format!("moment {j} is {m}, not 0")));
            }
        }
        if self.moment(self.order).abs() <= MOMENT_TOL {
            return Err(Error::InvalidKernel(format!(
                "moment {} vanishes, order is higher than declared",
                self.order
            )));
        }
        let lip = self.lipschitz_estimate();
        if !lip.is_finite() || lip > LIPSCHITZ_BOUND {
            return Err(Error::InvalidKernel(format!("Lipschitz estimate {lip} too large")));
        }
        Ok(())
    }
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::epanechnikov()
    }
}

/// Coefficients (in powers of `u^2`) of `(1 - u^2) * sum_m a_m u^{2m}`,
/// `m < order / 2`, with unit mass and vanishing even moments `2..order-2`.
fn boundary_vanishing_coeffs(order: u32) -> Result<Vec<f64>> {
    let m = (order / 2) as usize;
    // int_{-1}^{1} u^{2j} (1 - u^2) du
    let base = |j: usize| 2.0 / (2 * j + 1) as f64 - 2.0 / (2 * j + 3) as f64;
    let system = DMatrix::from_fn(m, m, |row, col| base(row + col));
    let mut rhs = DVector::zeros(m);
    rhs[0] = 1.0;
    let a = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidKernel("moment system is singular".into()))?;
    // Expand (1 - u^2) * p(u^2).
    let mut coeffs = vec![0.0; m + 1];
    for (i, ai) in a.iter().enumerate() {
        coeffs[i] += ai;
        coeffs[i + 1] -= ai;
    }
    Ok(coeffs)
}

pub(crate) fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}
