//! Spatial prediction from the `d` nearest neighbors.
//!
//! [`estimate_neighbor_count`] scans `k = 1, 2, ...` and stops at the first
//! neighbor whose kernel estimate of `E(xi_{i(k)} | xi_i = y)` stays within
//! `delta` of zero. [`fit`] then estimates the EDR space of the associated
//! process and stores the projected training pairs; [`FittedPredictor`]
//! predicts with a Nadaraya-Watson regression in the reduced space.
//! [`BaselinePredictor`] is the same regression on the full `d`-vector.
//!
//! Field values are centered by the training mean before any estimation and
//! the mean is added back to predictions.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::edr::{edr_directions, CovariancePair, DimensionRule, EdrModel};
use crate::error::{Error, Result};
use crate::kernelest::{scalar_kernel_regression, EstimatorConfig, Kernel};
use crate::lattice::{
    associated_process_where, center_dataset, vicinity_values, LatticeRegion, RegressionDataset,
    ScalarField, Site,
};

/// Where the conditional-mean statistic of the scan is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum YEval {
    /// One value of the (centered) field.
    Single(f64),
    /// `size` equispaced points spanning the central `central_fraction` of the
    /// observed centered values.
    Grid { size: usize, central_fraction: f64 },
}

pub const DEFAULT_SCAN_H_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborScanConfig {
    pub delta: f64,
    pub d_max: usize,
    pub y_eval: YEval,
    /// Reference site `j0`. The vicinity is translation invariant, so it only
    /// has to lie in the observed region.
    pub anchor: Option<Site>,
    /// Return `k - 1` instead of `k` at the first non-informative neighbor.
    pub terminate_exclusive: bool,
    pub kernel: Kernel,
    /// Scan bandwidth is `h_factor * std(Y) * n^{-1/5}`.
    pub h_factor: f64,
}

impl Default for NeighborScanConfig {
    fn default() -> Self {
        NeighborScanConfig {
            delta: 0.1,
            d_max: 12,
            y_eval: YEval::Grid {
                size: 9,
                central_fraction: 0.8,
            },
            anchor: None,
            terminate_exclusive: false,
            kernel: Kernel::default(),
            h_factor: DEFAULT_SCAN_H_FACTOR,
        }
    }
}

impl NeighborScanConfig {
    fn validate(&self, observed: &LatticeRegion) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidSpec(format!("delta must be > 0, got {}", self.delta)));
        }
        if self.d_max == 0 {
            return Err(Error::InvalidSpec("d_max must be >= 1".into()));
        }
        if !(self.h_factor > 0.0 && self.h_factor.is_finite()) {
            return Err(Error::InvalidSpec(format!("h_factor must be > 0, got {}", self.h_factor)));
        }
        if let YEval::Grid {
            size,
            central_fraction,
        } = self.y_eval
        {
            if size == 0 {
                return Err(Error::InvalidSpec("y-grid needs at least one point".into()));
            }
            if !(central_fraction > 0.0 && central_fraction <= 1.0) {
                return Err(Error::InvalidSpec(format!(
                    "central fraction {central_fraction} not in (0, 1]"
                )));
            }
        }
        if let Some(anchor) = &self.anchor {
            if !observed.contains(anchor) {
                return Err(Error::OutOfRegion(anchor.to_string()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanStep {
    pub k: usize,
    pub samples: usize,
    pub bandwidth: f64,
    /// `(y, r_n^(k)(y))` at every evaluation point.
    pub estimates: Vec<(f64, f64)>,
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub d: usize,
    pub cap_reached: bool,
    pub steps: Vec<ScanStep>,
}

/// Type-7 quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn observed_mean(field: &ScalarField, observed: &LatticeRegion) -> f64 {
    field.moments_over(observed).0
}

fn centered_field(field: &ScalarField, mean: f64) -> ScalarField {
    let values = field.values().iter().map(|v| v - mean).collect();
    ScalarField::new(field.region().clone(), values).expect("same region")
}

/// Estimates the number of neighbors carrying information about `xi_i`.
pub fn estimate_neighbor_count(
    field: &ScalarField,
    observed: &LatticeRegion,
    config: &NeighborScanConfig,
) -> Result<ScanResult> {
    config.validate(observed)?;
    if !field.region().contains_region(observed) {
        return Err(Error::OutOfRegion("observed region is not inside the field".into()));
    }
    let centered = centered_field(field, observed_mean(field, observed));

    let ys_eval = match config.y_eval {
        YEval::Single(y) => vec![y],
        YEval::Grid {
            size,
            central_fraction,
        } => {
            let mut vals: Vec<f64> = observed.iter().filter_map(|s| centered.get(&s)).collect();
            vals.sort_by(f64::total_cmp);
            let lo = quantile(&vals, (1.0 - central_fraction) / 2.0);
            let hi = quantile(&vals, (1.0 + central_fraction) / 2.0);
            if size == 1 {
                vec![0.5 * (lo + hi)]
            } else {
                (0..size)
                    .map(|j| lo + (hi - lo) * j as f64 / (size - 1) as f64)
                    .collect()
            }
        }
    };

    let mut steps = Vec::new();
    for k in 1..=config.d_max {
        let data = match associated_process_where(&centered, k, observed, |_| true) {
            Ok(data) => data,
            Err(Error::EmptyDataset) | Err(Error::InsufficientRegion(_)) => {
                return Err(Error::InsufficientRegion(format!(
                    "no site of the observed region has its {k} nearest neighbors observed"
                )))
            }
            Err(e) => return Err(e),
        };
        let n = data.len();
        let kth: Vec<f64> = (0..n).map(|i| data.x(i)[k - 1]).collect();
        let spread = data.std_y();
        let scale = if spread > 0.0 { spread } else { 1.0 };
        let bandwidth = config.h_factor * scale * (n as f64).powf(-0.2);
        let mut estimates = Vec::with_capacity(ys_eval.len());
        for &y in &ys_eval {
            let r = scalar_kernel_regression(data.ys(), 1, &kth, &config.kernel, bandwidth, &[y])?;
            estimates.push((y, r));
        }
        let statistic = estimates.iter().map(|(_, r)| r.abs()).fold(0.0, f64::max);
        steps.push(ScanStep {
            k,
            samples: n,
            bandwidth,
            estimates,
            statistic,
        });
        if statistic <= config.delta {
            let d = if config.terminate_exclusive { k - 1 } else { k };
            return Ok(ScanResult {
                d,
                cap_reached: false,
                steps,
            });
        }
    }
    Ok(ScanResult {
        d: config.d_max,
        cap_reached: true,
        steps,
    })
}

/// Number of neighbors for [`fit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeighborCount {
    Fixed(usize),
    Auto,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictorConfig {
    pub estimator: EstimatorConfig,
    pub dimension: DimensionRule,
    pub scan: NeighborScanConfig,
}

/// Nadaraya-Watson regression on `Phi (x - xbar)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedRegressor {
    directions: DMatrix<f64>,
    x_mean: Vec<f64>,
    y_mean: f64,
    projected: Vec<f64>,
    outputs: Vec<f64>,
    bandwidth: f64,
    kernel: Kernel,
}

impl ReducedRegressor {
    /// `data` holds raw (uncentered) covariates; `directions` is `D x d`.
    pub fn new(
        data: &RegressionDataset,
        directions: DMatrix<f64>,
        kernel: Kernel,
        bandwidth: f64,
    ) -> Result<Self> {
        if directions.ncols() != data.dim() || directions.nrows() == 0 {
            return Err(Error::InvalidSpec(format!(
                "projection is {}x{}, covariates have dimension {}",
                directions.nrows(),
                directions.ncols(),
                data.dim()
            )));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidSchedule(format!("bandwidth must be > 0, got {bandwidth}")));
        }
        let x_mean = data.mean_x().to_vec();
        let y_mean = data.mean_y();
        let mut projected = Vec::with_capacity(data.len() * directions.nrows());
        for i in 0..data.len() {
            projected.extend(project(&directions, data.x(i), &x_mean));
        }
        let outputs = data.ys().iter().map(|y| y - y_mean).collect();
        Ok(ReducedRegressor {
            directions,
            x_mean,
            y_mean,
            projected,
            outputs,
            bandwidth,
            kernel,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.x_mean.len() {
            return Err(Error::InvalidSpec(format!(
                "expected a covariate of length {}, got {}",
                self.x_mean.len(),
                x.len()
            )));
        }
        let z = project(&self.directions, x, &self.x_mean);
        let g = scalar_kernel_regression(
            &self.projected,
            self.directions.nrows(),
            &self.outputs,
            &self.kernel,
            self.bandwidth,
            &z,
        )?;
        Ok(g + self.y_mean)
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn with_bandwidth(&self, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidSchedule(format!("bandwidth must be > 0, got {bandwidth}")));
        }
        Ok(ReducedRegressor {
            bandwidth,
            ..self.clone()
        })
    }

    pub fn directions(&self) -> &DMatrix<f64> {
        &self.directions
    }

    pub fn training_len(&self) -> usize {
        self.outputs.len()
    }
}

fn project(directions: &DMatrix<f64>, x: &[f64], mean: &[f64]) -> Vec<f64> {
    (0..directions.nrows())
        .map(|r| {
            directions
                .row(r)
                .iter()
                .zip(x.iter().zip(mean))
                .map(|(p, (v, m))| p * (v - m))
                .sum()
        })
        .collect()
}

/// Bandwidth `h_scale * n^{-1/(4 + dim)}` for a regression in `dim` inputs.
pub fn regression_bandwidth(config: &EstimatorConfig, data: &RegressionDataset, dim: usize) -> f64 {
    let scale = config.schedule.h_scale.resolve(data);
    scale * (data.len() as f64).powf(-1.0 / (4.0 + dim as f64))
}

/// The fitted dimension-reduction predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPredictor {
    d: usize,
    edr: EdrModel,
    regressor: ReducedRegressor,
    training_sites: Vec<Site>,
    scan: Option<ScanResult>,
    config: PredictorConfig,
}

impl FittedPredictor {
    pub fn d(&self) -> usize {
        self.d
    }

    /// EDR model with Euclidean-orthonormal directions.
    pub fn edr(&self) -> &EdrModel {
        &self.edr
    }

    pub fn regressor(&self) -> &ReducedRegressor {
        &self.regressor
    }

    pub fn training_sites(&self) -> &[Site] {
        &self.training_sites
    }

    pub fn scan(&self) -> Option<&ScanResult> {
        self.scan.as_ref()
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.config
    }

    pub fn with_bandwidth(&self, bandwidth: f64) -> Result<Self> {
        Ok(FittedPredictor {
            regressor: self.regressor.with_bandwidth(bandwidth)?,
            ..self.clone()
        })
    }

    /// `g_n*(Phi_n* xi_target^d)` plus the training mean.
    pub fn predict_site(
        &self,
        field: &ScalarField,
        observed: &LatticeRegion,
        target: &Site,
    ) -> Result<f64> {
        let x = vicinity_values(field, target, self.d, observed)?;
        self.regressor.predict(&x)
    }
}

/// Fits the predictor on every eligible site of `observed`.
pub fn fit(
    field: &ScalarField,
    observed: &LatticeRegion,
    d: NeighborCount,
    config: &PredictorConfig,
) -> Result<FittedPredictor> {
    fit_where(field, observed, d, config, |_| true)
}

/// [`fit`] restricted to training sites accepted by `keep`.
pub fn fit_where(
    field: &ScalarField,
    observed: &LatticeRegion,
    d: NeighborCount,
    config: &PredictorConfig,
    keep: impl FnMut(&Site) -> bool,
) -> Result<FittedPredictor> {
    let (d, scan) = match d {
        NeighborCount::Fixed(0) => {
            return Err(Error::InvalidSpec("number of neighbors must be >= 1".into()))
        }
        NeighborCount::Fixed(d) => (d, None),
        NeighborCount::Auto => {
            let scan = estimate_neighbor_count(field, observed, &config.scan)?;
            if scan.d == 0 {
                return Err(Error::NoSignal);
            }
            (scan.d, Some(scan))
        }
    };
    let data = associated_process_where(field, d, observed, keep)?;
    if data.len() < 2 || data.std_y() == 0.0 {
        return Err(Error::NoSignal);
    }
    let (centered, _) = center_dataset(&data)?;
    let pair = CovariancePair::estimate(&centered, &config.estimator)?;
    let edr = edr_directions(&pair, config.dimension)?;
    if edr.dimension() == 0 {
        return Err(Error::NoSignal);
    }
    let edr = edr.to_euclidean();
    let bandwidth = regression_bandwidth(&config.estimator, &data, edr.dimension());
    let regressor =
        ReducedRegressor::new(&data, edr.directions(), config.estimator.kernel.clone(), bandwidth)?;
    Ok(FittedPredictor {
        d,
        edr,
        regressor,
        training_sites: data.sites().map(<[Site]>::to_vec).unwrap_or_default(),
        scan,
        config: config.clone(),
    })
}

/// Nadaraya-Watson regression on the unprojected `d`-vector of neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselinePredictor {
    d: usize,
    inputs: Vec<f64>,
    outputs: Vec<f64>,
    x_mean: Vec<f64>,
    y_mean: f64,
    bandwidth: f64,
    kernel: Kernel,
    training_sites: Vec<Site>,
}

impl BaselinePredictor {
    pub fn fit_where(
        field: &ScalarField,
        observed: &LatticeRegion,
        d: usize,
        config: &EstimatorConfig,
        keep: impl FnMut(&Site) -> bool,
    ) -> Result<Self> {
        let data = associated_process_where(field, d, observed, keep)?;
        let bandwidth = regression_bandwidth(config, &data, d);
        let x_mean = data.mean_x().to_vec();
        let y_mean = data.mean_y();
        let mut inputs = Vec::with_capacity(data.xs().len());
        for i in 0..data.len() {
            inputs.extend(data.x(i).iter().zip(&x_mean).map(|(v, m)| v - m));
        }
        Ok(BaselinePredictor {
            d,
            inputs,
            outputs: data.ys().iter().map(|y| y - y_mean).collect(),
            x_mean,
            y_mean,
            bandwidth,
            kernel: config.kernel.clone(),
            training_sites: data.sites().map(<[Site]>::to_vec).unwrap_or_default(),
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn training_sites(&self) -> &[Site] {
        &self.training_sites
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let query: Vec<f64> = x.iter().zip(&self.x_mean).map(|(v, m)| v - m).collect();
        let g = scalar_kernel_regression(
            &self.inputs,
            self.d,
            &self.outputs,
            &self.kernel,
            self.bandwidth,
            &query,
        )?;
        Ok(g + self.y_mean)
    }

    pub fn predict_site(
        &self,
        field: &ScalarField,
        observed: &LatticeRegion,
        target: &Site,
    ) -> Result<f64> {
        let x = vicinity_values(field, target, self.d, observed)?;
        self.predict(&x)
    }
}

/// Full-dimensional kernel prediction at `target`, trained on every other
/// eligible site of `observed`.
pub fn baseline_full_kernel_predict(
    field: &ScalarField,
    observed: &LatticeRegion,
    d: usize,
    config: &EstimatorConfig,
    target: &Site,
) -> Result<f64> {
    let model = BaselinePredictor::fit_where(field, observed, d, config, |s| s != target)?;
    model.predict_site(field, observed, target)
}

/// Checkerboard colour of a site: `true` when the coordinate sum is even.
pub fn is_even_site(site: &Site) -> bool {
    site.coords().iter().sum::<i64>().rem_euclid(2) == 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldsim::{generate_field, FieldSpec, MaWeights};

    fn region(n: usize) -> LatticeRegion {
        LatticeRegion::new(vec![n, n]).unwrap()
    }

    #[test]
    fn huge_delta_stops_at_one() {
        let field = generate_field(&FieldSpec::moving_average(vec![20, 20], 1, MaWeights::Uniform, 1)).unwrap();
        let mean = field.values().iter().sum::<f64>() / 400.0;
        let max_abs = field.values().iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        let config = NeighborScanConfig {
            delta: max_abs,
            ..Default::default()
        };
        let res = estimate_neighbor_count(&field, field.region(), &config).unwrap();
        assert_eq!(res.d, 1);
        assert_eq!(res.steps.len(), 1);
    }

    #[test]
    fn exclusive_termination_counts_one_less() {
        let field = generate_field(&FieldSpec::white_noise(vec![30, 30], 2)).unwrap();
        let config = NeighborScanConfig {
            delta: 10.0,
            terminate_exclusive: true,
            ..Default::default()
        };
        assert_eq!(estimate_neighbor_count(&field, field.region(), &config).unwrap().d, 0);
    }

    #[test]
    fn cap_is_reported() {
        let field = generate_field(&FieldSpec::moving_average(vec![30, 30], 2, MaWeights::Uniform, 4)).unwrap();
        let config = NeighborScanConfig {
            delta: 1e-6,
            d_max: 3,
            ..Default::default()
        };
        let res = estimate_neighbor_count(&field, field.region(), &config).unwrap();
        assert!(res.cap_reached);
        assert_eq!(res.d, 3);
        assert_eq!(res.steps.len(), 3);
    }

    #[test]
    fn scan_needs_room() {
        let field = generate_field(&FieldSpec::white_noise(vec![3, 3], 0)).unwrap();
        let config = NeighborScanConfig {
            delta: 1e-9,
            d_max: 9,
            ..Default::default()
        };
        assert!(matches!(
            estimate_neighbor_count(&field, field.region(), &config),
            Err(Error::InsufficientRegion(_))
        ));
        let bad_anchor = NeighborScanConfig {
            anchor: Some(Site::from(&[9, 9][..])),
            ..Default::default()
        };
        assert!(estimate_neighbor_count(&field, field.region(), &bad_anchor).is_err());
    }

    #[test]
    fn single_y_mode() {
        let field = generate_field(&FieldSpec::white_noise(vec![20, 20], 5)).unwrap();
        let config = NeighborScanConfig {
            y_eval: YEval::Single(0.0),
            delta: 0.5,
            ..Default::default()
        };
        let res = estimate_neighbor_count(&field, field.region(), &config).unwrap();
        assert_eq!(res.steps[0].estimates.len(), 1);
        assert_eq!(res.steps[0].estimates[0].0, 0.0);
    }

    #[test]
    fn constant_field_has_no_signal() {
        let field = ScalarField::from_fn(region(12), |_| 4.0);
        let err = fit(&field, field.region(), NeighborCount::Fixed(4), &PredictorConfig::default());
        assert!(matches!(err, Err(Error::NoSignal)));
    }

    #[test]
    fn baseline_on_constant_field() {
        let field = ScalarField::from_fn(region(12), |_| 4.0);
        let target = Site::from(&[6, 6][..]);
        let p = baseline_full_kernel_predict(&field, field.region(), 4, &EstimatorConfig::default(), &target)
            .unwrap();
        assert_eq!(p, 4.0);
    }

    #[test]
    fn prediction_requires_observed_vicinity() {
        let field = generate_field(&FieldSpec::moving_average(vec![20, 20], 1, MaWeights::Diamond, 8)).unwrap();
        let config = PredictorConfig {
            dimension: DimensionRule::Fixed(1),
            ..Default::default()
        };
        let model = fit(&field, field.region(), NeighborCount::Fixed(4), &config).unwrap();
        let edge = Site::from(&[1, 5][..]);
        assert!(matches!(
            model.predict_site(&field, field.region(), &edge),
            Err(Error::OutOfRegion(_))
        ));
        let inner = Site::from(&[5, 5][..]);
        assert!(model.predict_site(&field, field.region(), &inner).unwrap().is_finite());
    }

    #[test]
    fn checkerboard_colours() {
        assert!(is_even_site(&Site::from(&[1, 1][..])));
        assert!(!is_even_site(&Site::from(&[1, 2][..])));
        assert!(!is_even_site(&Site::from(&[-1, 0][..])));
    }
}
