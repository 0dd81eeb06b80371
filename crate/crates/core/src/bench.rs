//! Monte Carlo experiments: convergence rate of `Sigma_en`, fluctuation
//! scaling, EDR recovery sweeps and predictor comparisons.
//!
//! Replicates run in parallel but each one owns a seed derived from the
//! master seed and its position, and results are collected in position
//! order, so every report is a pure function of its inputs.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{dimension_echo, estimator_echo, neighbor_count_echo};
use crate::edr::{edr_directions, inverse_regression_covariance, subspace_distance, CovariancePair, DimensionRule};
use crate::error::{Error, Result};
use crate::fieldsim::{
    generate_field, generate_single_index, ground_truth_sigma_e, FieldSpec, Link, SingleIndexSpec,
};
use crate::kernelest::{EstimatorConfig, HScale};
use crate::lattice::{center_dataset, vicinity_observed, LatticeRegion, Site};
use crate::predictor::{fit_where, is_even_site, BaselinePredictor, NeighborCount, PredictorConfig};
use crate::rng::{derive_seed, RNG_ALGORITHM};

pub const MIN_RATE_SIZES: usize = 3;
pub const MIN_RATE_REPLICATES: usize = 5;
pub const MIN_CLT_REPLICATES: usize = 100;
pub const DEFAULT_ORACLE_DRAWS: usize = 1_000_000;

/// Provenance block shared by all reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMeta {
    pub tool: String,
    pub version: String,
    pub rng: String,
    pub master_seed: u64,
    pub config: BTreeMap<String, String>,
}

impl ReportMeta {
    pub fn new(master_seed: u64, config: BTreeMap<String, String>) -> Self {
        ReportMeta {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            rng: RNG_ALGORITHM.to_string(),
            master_seed,
            config,
        }
    }
}

fn model_echo(spec: &SingleIndexSpec, estimator: &EstimatorConfig) -> BTreeMap<String, String> {
    let mut echo = estimator_echo(estimator);
    let beta: Vec<String> = spec.beta.iter().map(f64::to_string).collect();
    echo.insert("model.beta".into(), beta.join(","));
    echo.insert("model.link".into(), spec.link.as_str().into());
    echo.insert("model.noise_std".into(), spec.noise_std.to_string());
    echo.insert("model.rho".into(), spec.rho.to_string());
    let dims: Vec<String> = spec.dims.iter().map(usize::to_string).collect();
    echo.insert("model.dims".into(), dims.join(","));
    echo
}

/// Median of a non-empty slice.
pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Linear-interpolation quantile of a non-empty slice.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Ordinary least squares `y = a + b x`; returns `(a, b)`.
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return Err(Error::InsufficientSizes { needed: 2, got: n });
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidSpec("all sizes are equal".into()));
    }
    let b = sxy / sxx;
    Ok((my - b * mx, b))
}

fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Theoretical rate quantities for a bandwidth schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSchedule {
    pub order: u32,
    pub c1: f64,
    pub c2: f64,
    pub h_scale: f64,
    pub e_scale: f64,
    /// Lattice dimension `N`.
    pub ndim: usize,
    /// Mixing exponent; documentation only.
    pub theta: Option<f64>,
}

impl RateSchedule {
    /// Uses `h_scale = 1` when the estimator scales by the response spread.
    pub fn from_estimator(config: &EstimatorConfig, ndim: usize, theta: Option<f64>) -> Result<Self> {
        let s = &config.schedule;
        let h_scale = match s.h_scale {
            HScale::Fixed(v) => v,
            HScale::ResponseStd => 1.0,
        };
        let out = RateSchedule {
            order: config.kernel.order(),
            c1: s.c1,
            c2: s.c2,
            h_scale,
            e_scale: s.e_scale,
            ndim,
            theta,
        };
        if let Some(t) = theta {
            // negated so NaN is rejected too
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(t > 2.0 * ndim as f64) {
                return Err(Error::InvalidSchedule(format!(
                    "mixing exponent {t} must exceed 2N = {}",
                    2 * ndim
                )));
            }
        }
        Ok(out)
    }

    /// `(4N + theta) / (theta - 2N)`.
    pub fn theta1(&self) -> Option<f64> {
        let n = self.ndim as f64;
        self.theta.map(|t| (4.0 * n + t) / (t - 2.0 * n))
    }

    pub fn h(&self, n_hat: usize) -> f64 {
        self.h_scale * (n_hat as f64).powf(-self.c1)
    }

    pub fn e(&self, n_hat: usize) -> f64 {
        self.e_scale * (n_hat as f64).powf(-self.c2)
    }

    /// `h^k + sqrt(log n / (n h))`.
    pub fn psi(&self, n_hat: usize) -> f64 {
        let n = n_hat as f64;
        let h = self.h(n_hat);
        h.powi(self.order as i32) + (n.ln() / (n * h)).sqrt()
    }

    /// `h^k + psi^2 / e^2`.
    pub fn overlay(&self, n_hat: usize) -> f64 {
        let psi = self.psi(n_hat);
        let e = self.e(n_hat);
        self.h(n_hat).powi(self.order as i32) + psi * psi / (e * e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateConfig {
    /// Model template; its dims only fix the lattice dimension.
    pub model: SingleIndexSpec,
    /// Numbers of sites, each an exact power of the lattice dimension.
    pub sizes: Vec<usize>,
    pub replicates: usize,
    pub oracle_draws: usize,
    pub estimator: EstimatorConfig,
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleInfo {
    pub kind: String,
    pub draws: usize,
    pub bins: usize,
    pub sigma_e: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub meta: ReportMeta,
    pub sizes: Vec<usize>,
    pub replicates: usize,
    pub seeds: Vec<Vec<u64>>,
    pub errors: Vec<Vec<f64>>,
    pub median_errors: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub schedule: RateSchedule,
    pub theta1: Option<f64>,
    pub psi: Vec<f64>,
    pub overlay: Vec<f64>,
    pub oracle: OracleInfo,
    /// Opt-in; left out by default so reruns are byte-identical.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
    #[serde(skip)]
    pub elapsed_seconds: f64,
}

fn oracle_for(spec: &SingleIndexSpec, draws: usize) -> Result<(DMatrix<f64>, OracleInfo)> {
    let o = ground_truth_sigma_e(spec, draws)?;
    let kind = if o.closed_form.is_some() { "closed-form" } else { "binned" };
    let m = o.best().clone();
    let info = OracleInfo {
        kind: kind.into(),
        draws: o.replicates,
        bins: o.bins,
        sigma_e: m.transpose().as_slice().to_vec(),
    };
    Ok((m, info))
}

/// `Sigma_en` of one simulated dataset, computed on centered covariates.
pub fn simulated_sigma_e(spec: &SingleIndexSpec, estimator: &EstimatorConfig) -> Result<DMatrix<f64>> {
    let data = generate_single_index(spec)?;
    let (centered, _) = center_dataset(&data)?;
    inverse_regression_covariance(&centered, estimator)
}

fn replicate_seed(master: u64, size_idx: usize, rep: usize) -> u64 {
    derive_seed(master, ((size_idx as u64) << 32) | rep as u64)
}

pub fn run_rate_experiment(config: &RateConfig, master_seed: u64) -> Result<RateReport> {
    let started = Instant::now();
    if config.sizes.len() < MIN_RATE_SIZES {
        return Err(Error::InsufficientSizes {
            needed: MIN_RATE_SIZES,
            got: config.sizes.len(),
        });
    }
    if config.replicates < MIN_RATE_REPLICATES {
        return Err(Error::InsufficientReplicates {
            needed: MIN_RATE_REPLICATES,
            got: config.replicates,
        });
    }
    if config.sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSpec("sizes must be strictly increasing".into()));
    }
    config.estimator.schedule.validate(config.estimator.kernel.order())?;
    config.model.validate()?;
    let ndim = config.model.dims.len();
    let regions = config
        .sizes
        .iter()
        .map(|&n| LatticeRegion::hypercube(n, ndim))
        .collect::<Result<Vec<_>>>()?;
    let schedule = RateSchedule::from_estimator(&config.estimator, ndim, config.theta)?;
    let (truth, oracle) = oracle_for(&config.model.resized(config.model.dims.clone(), master_seed), config.oracle_draws)?;

    let mut seeds = Vec::new();
    let mut errors = Vec::new();
    for (s, region) in regions.iter().enumerate() {
        let row: Vec<u64> = (0..config.replicates).map(|r| replicate_seed(master_seed, s, r)).collect();
        let errs = row
            .par_iter()
            .map(|&seed| {
                let spec = config.model.resized(region.dims().to_vec(), seed);
                let est = simulated_sigma_e(&spec, &config.estimator)?;
                Ok((est - &truth).norm())
            })
            .collect::<Result<Vec<f64>>>()?;
        seeds.push(row);
        errors.push(errs);
    }
    let median_errors: Vec<f64> = errors.iter().map(|e| median(e)).collect();
    let log_n: Vec<f64> = config.sizes.iter().map(|&n| (n as f64).ln()).collect();
    let log_e: Vec<f64> = median_errors.iter().map(|e| e.ln()).collect();
    let (intercept, slope) = ols(&log_n, &log_e)?;
    if !slope.is_finite() {
        return Err(Error::NoSignal);
    }
    let mut echo = model_echo(&config.model, &config.estimator);
    echo.insert("bench.oracle_draws".into(), config.oracle_draws.to_string());
    Ok(RateReport {
        meta: ReportMeta::new(master_seed, echo),
        sizes: config.sizes.clone(),
        replicates: config.replicates,
        seeds,
        errors,
        median_errors,
        slope,
        intercept,
        schedule,
        theta1: schedule.theta1(),
        psi: config.sizes.iter().map(|&n| schedule.psi(n)).collect(),
        overlay: config.sizes.iter().map(|&n| schedule.overlay(n)).collect(),
        oracle,
        wall_clock_seconds: None,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltEntry {
    pub row: usize,
    pub col: usize,
    /// Mean of `sqrt(n) (Sigma_en - Sigma_e)` at `n` and `4n`.
    pub mean: [f64; 2],
    pub std: [f64; 2],
    /// `std[0] / std[1]`.
    pub std_ratio: f64,
    /// `|mean| <= 3 std / sqrt(replicates)` at each size.
    pub mean_within_3se: [bool; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltReport {
    pub meta: ReportMeta,
    pub sizes: [usize; 2],
    pub replicates: usize,
    pub entries: Vec<CltEntry>,
    pub fraction_means_within_3se: f64,
    pub oracle: OracleInfo,
    /// Opt-in; left out by default so reruns are byte-identical.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
    #[serde(skip)]
    pub elapsed_seconds: f64,
}

/// Fluctuations of `sqrt(n) (Sigma_en - Sigma_e)` at `size` and `4 size`.
pub fn run_clt_check(
    model: &SingleIndexSpec,
    estimator: &EstimatorConfig,
    size: usize,
    replicates: usize,
    oracle_draws: usize,
    master_seed: u64,
) -> Result<CltReport> {
    let started = Instant::now();
    if replicates < MIN_CLT_REPLICATES {
        return Err(Error::InsufficientReplicates {
            needed: MIN_CLT_REPLICATES,
            got: replicates,
        });
    }
    model.validate()?;
    estimator.schedule.validate(estimator.kernel.order())?;
    let ndim = model.dims.len();
    let sizes = [size, 4 * size];
    let (truth, oracle) = oracle_for(&model.resized(model.dims.clone(), master_seed), oracle_draws)?;
    let d = model.d();

    let mut scaled: Vec<Vec<DMatrix<f64>>> = Vec::new();
    for (s, &n) in sizes.iter().enumerate() {
        let region = LatticeRegion::hypercube(n, ndim)?;
        let root = (n as f64).sqrt();
        let mats = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let spec = model.resized(region.dims().to_vec(), replicate_seed(master_seed, s, r));
                Ok((simulated_sigma_e(&spec, estimator)? - &truth) * root)
            })
            .collect::<Result<Vec<_>>>()?;
        scaled.push(mats);
    }

    let mut entries = Vec::new();
    let mut within = 0usize;
    for row in 0..d {
        for col in row..d {
            let mut mean = [0.0; 2];
            let mut std = [0.0; 2];
            let mut ok = [false; 2];
            for s in 0..2 {
                let vals: Vec<f64> = scaled[s].iter().map(|m| m[(row, col)]).collect();
                mean[s] = vals.iter().sum::<f64>() / replicates as f64;
                std[s] = std_dev(&vals);
                ok[s] = mean[s].abs() <= 3.0 * std[s] / (replicates as f64).sqrt();
                within += ok[s] as usize;
            }
            entries.push(CltEntry {
                row,
                col,
                mean,
                std,
                std_ratio: std[0] / std[1],
                mean_within_3se: ok,
            });
        }
    }
    let fraction = within as f64 / (2 * entries.len()) as f64;
    let mut echo = model_echo(model, estimator);
    echo.insert("bench.oracle_draws".into(), oracle_draws.to_string());
    Ok(CltReport {
        meta: ReportMeta::new(master_seed, echo),
        sizes,
        replicates,
        entries,
        fraction_means_within_3se: fraction,
        oracle,
        wall_clock_seconds: None,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    })
}

impl CltReport {
    pub fn entry(&self, row: usize, col: usize) -> Option<&CltEntry> {
        let (r, c) = if row <= col { (row, col) } else { (col, row) };
        self.entries.iter().find(|e| e.row == r && e.col == c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdrSweepConfig {
    /// Template for beta, rho and the lattice dimension.
    pub model: SingleIndexSpec,
    pub links: Vec<Link>,
    pub noise: Vec<f64>,
    pub sizes: Vec<usize>,
    pub seeds: usize,
    pub dimension: DimensionRule,
    pub estimator: EstimatorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdrCell {
    pub link: Link,
    pub noise_std: f64,
    pub n_hat: usize,
    pub seeds: Vec<u64>,
    pub dimensions: Vec<usize>,
    pub distances: Vec<f64>,
    pub median: f64,
    pub iqr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdrSweepReport {
    pub meta: ReportMeta,
    pub cells: Vec<EdrCell>,
    /// Opt-in; left out by default so reruns are byte-identical.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
    #[serde(skip)]
    pub elapsed_seconds: f64,
}

impl EdrSweepReport {
    pub fn cell(&self, link: Link, noise_std: f64, n_hat: usize) -> Option<&EdrCell> {
        self.cells
            .iter()
            .find(|c| c.link == link && c.noise_std == noise_std && c.n_hat == n_hat)
    }
}

/// Distance between the estimated span and `span(beta)` for one dataset.
pub fn edr_recovery_distance(
    spec: &SingleIndexSpec,
    estimator: &EstimatorConfig,
    rule: DimensionRule,
) -> Result<(usize, f64)> {
    let data = generate_single_index(spec)?;
    let (centered, _) = center_dataset(&data)?;
    let pair = CovariancePair::estimate(&centered, estimator)?;
    let model = edr_directions(&pair, rule)?;
    if model.dimension() == 0 {
        return Err(Error::NoSignal);
    }
    let beta = DMatrix::from_row_slice(1, spec.d(), &spec.beta);
    Ok((model.dimension(), subspace_distance(&model.directions(), &beta)?))
}

/// Seeds are shared across cells so that cells can be compared seed by seed.
pub fn run_edr_recovery(config: &EdrSweepConfig, master_seed: u64) -> Result<EdrSweepReport> {
    let started = Instant::now();
    if config.seeds == 0 || config.links.is_empty() || config.noise.is_empty() || config.sizes.is_empty() {
        return Err(Error::InvalidSpec("empty sweep grid".into()));
    }
    let ndim = config.model.dims.len();
    let seeds: Vec<u64> = (0..config.seeds).map(|j| derive_seed(master_seed, j as u64)).collect();
    let mut cells = Vec::new();
    for &link in &config.links {
        for &noise_std in &config.noise {
            for &n_hat in &config.sizes {
                let region = LatticeRegion::hypercube(n_hat, ndim)?;
                let template = SingleIndexSpec {
                    link,
                    noise_std,
                    dims: region.dims().to_vec(),
                    ..config.model.clone()
                };
                template.validate()?;
                let results = seeds
                    .par_iter()
                    .map(|&seed| {
                        edr_recovery_distance(
                            &template.resized(template.dims.clone(), seed),
                            &config.estimator,
                            config.dimension,
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                let distances: Vec<f64> = results.iter().map(|r| r.1).collect();
                cells.push(EdrCell {
                    link,
                    noise_std,
                    n_hat,
                    seeds: seeds.clone(),
                    dimensions: results.iter().map(|r| r.0).collect(),
                    median: median(&distances),
                    iqr: quantile(&distances, 0.75) - quantile(&distances, 0.25),
                    distances,
                });
            }
        }
    }
    let mut echo = estimator_echo(&config.estimator);
    let beta: Vec<String> = config.model.beta.iter().map(f64::to_string).collect();
    echo.insert("model.beta".into(), beta.join(","));
    echo.insert("model.rho".into(), config.model.rho.to_string());
    echo.extend(dimension_echo(config.dimension));
    Ok(EdrSweepReport {
        meta: ReportMeta::new(master_seed, echo),
        cells,
        wall_clock_seconds: None,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorBenchConfig {
    /// Field template; the seed is replaced per replicate.
    pub field: FieldSpec,
    pub d: NeighborCount,
    pub seeds: usize,
    pub predictor: PredictorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictorRun {
    pub seed: u64,
    pub d: usize,
    pub dimension: usize,
    pub train_sites: usize,
    pub test_sites: usize,
    pub mse_reduced: f64,
    pub mse_baseline: f64,
    pub mse_mean: f64,
    pub field_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictorBenchReport {
    pub meta: ReportMeta,
    pub runs: Vec<PredictorRun>,
    pub median_mse_reduced: f64,
    pub median_mse_baseline: f64,
    pub median_mse_mean: f64,
    pub reduced_beats_mean: usize,
    pub reduced_beats_baseline: usize,
    /// Opt-in; left out by default so reruns are byte-identical.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
    #[serde(skip)]
    pub elapsed_seconds: f64,
}

/// Held-out comparison on one field: train on even sites, test on odd sites
/// whose vicinity is observed.
pub fn predictor_run(field_spec: &FieldSpec, d: NeighborCount, config: &PredictorConfig) -> Result<PredictorRun> {
    let field = generate_field(field_spec)?;
    let observed = field.region().clone();
    let reduced = fit_where(&field, &observed, d, config, is_even_site)?;
    let d = reduced.d();
    let baseline = BaselinePredictor::fit_where(&field, &observed, d, &config.estimator, is_even_site)?;
    let train: Vec<Site> = reduced.training_sites().to_vec();
    let train_mean = train.iter().map(|s| field.get(s).unwrap_or(0.0)).sum::<f64>() / train.len() as f64;
    let tests: Vec<Site> = observed
        .iter()
        .filter(|s| !is_even_site(s) && vicinity_observed(s, d, &observed))
        .collect();
    if tests.is_empty() {
        return Err(Error::InsufficientRegion("no held-out site has an observed vicinity".into()));
    }
    if train.iter().any(|s| !is_even_site(s)) {
        return Err(Error::InvalidSpec("training set overlaps the held-out sites".into()));
    }
    let mut se = [0.0; 3];
    for t in &tests {
        let truth = field.get(t).expect("observed");
        let preds = [
            reduced.predict_site(&field, &observed, t)?,
            baseline.predict_site(&field, &observed, t)?,
            train_mean,
        ];
        for (acc, p) in se.iter_mut().zip(preds) {
            *acc += (p - truth) * (p - truth);
        }
    }
    let m = tests.len() as f64;
    Ok(PredictorRun {
        seed: field_spec.seed,
        d,
        dimension: reduced.edr().dimension(),
        train_sites: train.len(),
        test_sites: tests.len(),
        mse_reduced: se[0] / m,
        mse_baseline: se[1] / m,
        mse_mean: se[2] / m,
        field_variance: field.moments_over(&observed).1,
    })
}

pub fn run_predictor_benchmark(config: &PredictorBenchConfig, master_seed: u64) -> Result<PredictorBenchReport> {
    let started = Instant::now();
    if config.seeds == 0 {
        return Err(Error::InvalidSpec("need at least one seed".into()));
    }
    let runs = (0..config.seeds)
        .into_par_iter()
        .map(|j| {
            let spec = FieldSpec {
                seed: derive_seed(master_seed, j as u64),
                ..config.field.clone()
            };
            predictor_run(&spec, config.d, &config.predictor)
        })
        .collect::<Result<Vec<_>>>()?;
    let col = |f: fn(&PredictorRun) -> f64| runs.iter().map(f).collect::<Vec<f64>>();
    let mut echo = estimator_echo(&config.predictor.estimator);
    echo.insert("field.kind".into(), config.field.kind.name().into());
    echo.insert(
        "field.dims".into(),
        config.field.dims.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
    );
    echo.insert("bench.d".into(), neighbor_count_echo(config.d));
    echo.extend(dimension_echo(config.predictor.dimension));
    Ok(PredictorBenchReport {
        meta: ReportMeta::new(master_seed, echo),
        median_mse_reduced: median(&col(|r| r.mse_reduced)),
        median_mse_baseline: median(&col(|r| r.mse_baseline)),
        median_mse_mean: median(&col(|r| r.mse_mean)),
        reduced_beats_mean: runs.iter().filter(|r| r.mse_reduced < r.mse_mean).count(),
        reduced_beats_baseline: runs.iter().filter(|r| r.mse_reduced <= r.mse_baseline).count(),
        runs,
        wall_clock_seconds: None,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    })
}
