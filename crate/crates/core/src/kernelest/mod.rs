//! Kernel estimators of the response density `f_n`, the inverse-regression
//! numerator `phi_n`, the floored inverse regression `r_en = phi_n / f_en`,
//! and multivariate Nadaraya-Watson regression.
//!
//! The smoother sorts the responses once and only visits samples inside the
//! kernel support around each query. Tests check it against the naive double
//! loop.

mod kernel;
mod schedule;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use kernel::{Kernel, KernelKind, QUADRATURE_INTERVALS};
pub use schedule::{
    BandwidthSchedule, Bandwidths, FloorVariant, HScale, DEFAULT_C1, DEFAULT_C2, DEFAULT_E_SCALE,
};

#[cfg(test)]
pub(crate) use kernel::simpson;

use crate::error::{Error, Result};
use crate::lattice::RegressionDataset;

/// Kernel, bandwidth schedule and density floor.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub kernel: Kernel,
    pub schedule: BandwidthSchedule,
    pub floor: FloorVariant,
}

impl EstimatorConfig {
    pub fn new(kernel: Kernel, schedule: BandwidthSchedule, floor: FloorVariant) -> Result<Self> {
        schedule.validate(kernel.order())?;
        Ok(EstimatorConfig {
            kernel,
            schedule,
            floor,
        })
    }

    /// `h` and `e` at `n_hat = data.len()`.
    pub fn bandwidths(&self, data: &RegressionDataset) -> Result<Bandwidths> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = data.len();
        let scale = self.schedule.h_scale.resolve(data);
        Bandwidths::new(self.schedule.h(n, scale), self.schedule.e(n))
    }
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            kernel: Kernel::default(),
            schedule: BandwidthSchedule::default(),
            floor: FloorVariant::Max,
        }
    }
}

/// All kernel quantities at one response value `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseRegressionEval {
    pub y: f64,
    pub f_n: f64,
    pub f_en: f64,
    pub phi_n: Vec<f64>,
    pub r_en: Vec<f64>,
}

/// Evaluates `f_n`, `phi_n` and `r_en` for one dataset at fixed bandwidths.
#[derive(Debug, Clone)]
pub struct KernelSmoother<'a> {
    data: &'a RegressionDataset,
    kernel: &'a Kernel,
    floor: FloorVariant,
    bw: Bandwidths,
    order: Vec<usize>,
    sorted_y: Vec<f64>,
}

impl<'a> KernelSmoother<'a> {
    pub fn new(data: &'a RegressionDataset, config: &'a EstimatorConfig) -> Result<Self> {
        let bw = config.bandwidths(data)?;
        Self::with_bandwidths(data, &config.kernel, config.floor, bw)
    }

    pub fn with_bandwidths(
        data: &'a RegressionDataset,
        kernel: &'a Kernel,
        floor: FloorVariant,
        bw: Bandwidths,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.sort_by(|&a, &b| data.ys()[a].total_cmp(&data.ys()[b]).then(a.cmp(&b)));
        let sorted_y = order.iter().map(|&i| data.ys()[i]).collect();
        Ok(KernelSmoother {
            data,
            kernel,
            floor,
            bw,
            order,
            sorted_y,
        })
    }

    pub fn bandwidths(&self) -> Bandwidths {
        self.bw
    }

    /// Sample positions (in sorted order) whose response lies within `h` of `y`.
    fn window(&self, y: f64) -> &[usize] {
        let h = self.bw.h * self.kernel.support();
        let lo = self.sorted_y.partition_point(|&v| v < y - h);
        let hi = self.sorted_y.partition_point(|&v| v <= y + h);
        &self.order[lo..hi.max(lo)]
    }

    fn normalizer(&self) -> f64 {
        self.data.len() as f64 * self.bw.h
    }

    /// `f_n(y) = (n h)^{-1} sum_i K((y - Y_i) / h)`
    pub fn density(&self, y: f64) -> f64 {
        let h = self.bw.h;
        let ys = self.data.ys();
        let sum: f64 = self
            .window(y)
            .iter()
            .map(|&i| self.kernel.eval((y - ys[i]) / h))
            .sum();
        sum / self.normalizer()
    }

    /// `phi_n(y) = (n h)^{-1} sum_i X_i K((y - Y_i) / h)`
    pub fn numerator(&self, y: f64) -> Vec<f64> {
        self.accumulate(y).1
    }

    fn accumulate(&self, y: f64) -> (f64, Vec<f64>) {
        let h = self.bw.h;
        let ys = self.data.ys();
        let mut weight = 0.0;
        let mut num = vec![0.0; self.data.dim()];
        for &i in self.window(y) {
            let k = self.kernel.eval((y - ys[i]) / h);
            if k == 0.0 {
                continue;
            }
            weight += k;
            for (acc, x) in num.iter_mut().zip(self.data.x(i)) {
                *acc += x * k;
            }
        }
        let norm = self.normalizer();
        num.iter_mut().for_each(|v| *v /= norm);
        (weight / norm, num)
    }

    /// `f_n`, `f_en`, `phi_n` and `r_en = phi_n / f_en` at `y`.
    pub fn eval(&self, y: f64) -> InverseRegressionEval {
        let (f_n, phi_n) = self.accumulate(y);
        let f_en = self.floor.apply(self.bw.e, f_n);
        let r_en = phi_n.iter().map(|p| p / f_en).collect();
        InverseRegressionEval {
            y,
            f_n,
            f_en,
            phi_n,
            r_en,
        }
    }

    /// The unfloored estimator `r_n`: `phi_n / f_n` where `f_n > 0`, and the
    /// sample mean of the responses (in every component) where `f_n = 0`.
    pub fn unfloored(&self, y: f64) -> Vec<f64> {
        let (f_n, phi_n) = self.accumulate(y);
        if f_n == 0.0 {
            vec![self.data.mean_y(); self.data.dim()]
        } else {
            phi_n.iter().map(|p| p / f_n).collect()
        }
    }
}

pub fn density_estimate(data: &RegressionDataset, config: &EstimatorConfig, y: f64) -> Result<f64> {
    Ok(KernelSmoother::new(data, config)?.density(y))
}

pub fn numerator_estimate(
    data: &RegressionDataset,
    config: &EstimatorConfig,
    y: f64,
) -> Result<Vec<f64>> {
    Ok(KernelSmoother::new(data, config)?.numerator(y))
}

pub fn inverse_regression(
    data: &RegressionDataset,
    config: &EstimatorConfig,
    y: f64,
) -> Result<InverseRegressionEval> {
    Ok(KernelSmoother::new(data, config)?.eval(y))
}

/// [`inverse_regression`] at every point of `ys`, in order. Runs in parallel;
/// each output is computed exactly as the per-point call would.
pub fn evaluate_on_grid(
    data: &RegressionDataset,
    config: &EstimatorConfig,
    ys: &[f64],
) -> Result<Vec<InverseRegressionEval>> {
    if ys.is_empty() {
        return Err(Error::InvalidSpec("evaluation grid is empty".into()));
    }
    let smoother = KernelSmoother::new(data, config)?;
    Ok(ys.par_iter().map(|&y| smoother.eval(y)).collect())
}

/// Multivariate Nadaraya-Watson estimate with a product kernel and one shared
/// bandwidth.
///
/// `inputs` is row-major with rows of length `dim`. Falls back to the mean of
/// `outputs` when no sample carries weight at `query`.
pub fn scalar_kernel_regression(
    inputs: &[f64],
    dim: usize,
    outputs: &[f64],
    kernel: &Kernel,
    bandwidth: f64,
    query: &[f64],
) -> Result<f64> {
    if outputs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if dim == 0 || inputs.len() != dim * outputs.len() || query.len() != dim {
        return Err(Error::InvalidSpec(format!(
            "regression inputs must be {} rows of length {}, query of length {}",
            outputs.len(),
            dim,
            query.len()
        )));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidSchedule(format!("bandwidth must be > 0, got {bandwidth}")));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    'rows: for (row, &out) in inputs.chunks_exact(dim).zip(outputs) {
        let mut w = 1.0;
        for (q, x) in query.iter().zip(row) {
            let k = kernel.eval((q - x) / bandwidth);
            if k == 0.0 {
                continue 'rows;
            }
            w *= k;
        }
        num += out * w;
        den += w;
    }
    if den == 0.0 {
        return Ok(outputs.iter().sum::<f64>() / outputs.len() as f64);
    }
    Ok(num / den)
}
