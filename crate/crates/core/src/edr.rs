//! Covariance estimators and extraction of the EDR space.
//!
//! `Sigma_en = n^{-1} sum_i r_en(Y_i) r_en(Y_i)^T - Xbar Xbar^T` estimates
//! `var E(X|Y)`. The EDR directions are the leading eigenvectors of
//! `Sigma_n^{-1} Sigma_en`, computed as the symmetric generalized problem
//! `Sigma_en v = lambda Sigma_n v` through the whitening transform
//! `Sigma_n^{-1/2}`. Eigenvalues are therefore real and the directions are
//! orthonormal in the `Sigma_n` inner product.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernelest::{Bandwidths, EstimatorConfig, FloorVariant, Kernel, KernelSmoother};
use crate::lattice::RegressionDataset;

/// Condition number above which `Sigma_n` gets a ridge.
pub const RIDGE_CONDITION_LIMIT: f64 = 1e10;
/// Ridge size, relative to `trace(Sigma_n) / d`.
pub const RIDGE_TAU: f64 = 1e-8;
const PSD_TOL: f64 = 1e-10;

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `n^{-1} sum_i (X_i - Xbar)(X_i - Xbar)^T`.
pub fn empirical_covariance(data: &RegressionDataset) -> Result<DMatrix<f64>> {
    let n = data.len();
    if n < 2 {
        return Err(Error::DegenerateDataset(format!(
            "covariance needs at least 2 samples, got {n}"
        )));
    }
    let d = data.dim();
    let mean = data.mean_x();
    let mut cov = DMatrix::zeros(d, d);
    let mut centred = vec![0.0; d];
    for i in 0..n {
        centred.iter_mut().zip(data.x(i)).zip(mean).for_each(|((c, x), m)| *c = x - m);
        for r in 0..d {
            for c in r..d {
                cov[(r, c)] += centred[r] * centred[c];
            }
        }
    }
    for r in 0..d {
        for c in r..d {
            cov[(r, c)] /= n as f64;
            cov[(c, r)] = cov[(r, c)];
        }
    }
    Ok(cov)
}

/// `Sigma_en` with the bandwidths of `config` at `n_hat = data.len()`.
pub fn inverse_regression_covariance(
    data: &RegressionDataset,
    config: &EstimatorConfig,
) -> Result<DMatrix<f64>> {
    if data.len() < 2 {
        return Err(Error::DegenerateDataset(format!(
            "need at least 2 samples, got {}",
            data.len()
        )));
    }
    let bw = config.bandwidths(data)?;
    inverse_regression_covariance_with(data, &config.kernel, config.floor, bw)
}

/// `Sigma_en` at explicit bandwidths.
pub fn inverse_regression_covariance_with(
    data: &RegressionDataset,
    kernel: &Kernel,
    floor: FloorVariant,
    bw: Bandwidths,
) -> Result<DMatrix<f64>> {
    let n = data.len();
    if n < 2 {
        return Err(Error::DegenerateDataset(format!("need at least 2 samples, got {n}")));
    }
    let d = data.dim();
    let smoother = KernelSmoother::with_bandwidths(data, kernel, floor, bw)?;
    let mut acc = DMatrix::<f64>::zeros(d, d);
    for &y in data.ys() {
        let r = smoother.eval(y).r_en;
        for a in 0..d {
            for b in a..d {
                acc[(a, b)] += r[a] * r[b];
            }
        }
    }
    let mean = data.mean_x();
    let mut out = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let v = acc[(a, b)] / n as f64 - mean[a] * mean[b];
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    Ok(symmetrize(&out))
}

/// `Sigma_n` and `Sigma_en` for one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePair {
    sigma: DMatrix<f64>,
    sigma_e: DMatrix<f64>,
    n_hat: usize,
}

impl CovariancePair {
    pub fn new(sigma: DMatrix<f64>, sigma_e: DMatrix<f64>, n_hat: usize) -> Result<Self> {
        let d = sigma.nrows();
        if d == 0 || !sigma.is_square() || sigma_e.shape() != (d, d) {
            return Err(Error::InvalidSpec("covariances must be square and of equal size".into()));
        }
        if sigma.iter().chain(sigma_e.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("covariance entries must be finite".into()));
        }
        let sigma = symmetrize(&sigma);
        let sigma_e = symmetrize(&sigma_e);
        let min_eig = SymmetricEigen::new(sigma.clone()).eigenvalues.min();
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidSpec(format!(
                "covariance is not positive semi-definite (eigenvalue {min_eig})"
            )));
        }
        Ok(CovariancePair {
            sigma,
            sigma_e,
            n_hat,
        })
    }

    /// Both estimators on `data`, which should already be centered.
    pub fn estimate(data: &RegressionDataset, config: &EstimatorConfig) -> Result<Self> {
        let sigma = empirical_covariance(data)?;
        let sigma_e = inverse_regression_covariance(data, config)?;
        Self::new(sigma, sigma_e, data.len())
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn sigma_e(&self) -> &DMatrix<f64> {
        &self.sigma_e
    }

    pub fn n_hat(&self) -> usize {
        self.n_hat
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }
}

/// How many leading directions to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DimensionRule {
    Fixed(usize),
    /// Smallest `D` whose leading eigenvalues carry this fraction of the total.
    ThresholdFraction(f64),
}

pub const DEFAULT_THRESHOLD_FRACTION: f64 = 0.8;

impl Default for DimensionRule {
    fn default() -> Self {
        DimensionRule::ThresholdFraction(DEFAULT_THRESHOLD_FRACTION)
    }
}

/// Inner product under which the direction rows are orthonormal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionMetric {
    /// `v^T Sigma_n w = delta_vw`
    Covariance,
    Euclidean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdrModel {
    /// All generalized eigenvectors as rows, in eigenvalue order.
    basis: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    dimension: usize,
    ridge: f64,
    metric: DirectionMetric,
}

impl EdrModel {
    /// The selected `D x d` projection `Phi_n`.
    pub fn directions(&self) -> DMatrix<f64> {
        self.basis.rows(0, self.dimension).into_owned()
    }

    /// Every eigenvector row, not only the selected ones.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn metric(&self) -> DirectionMetric {
        self.metric
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn with_dimension(&self, dimension: usize) -> Result<Self> {
        if dimension > self.dim() {
            return Err(Error::InvalidSpec(format!(
                "dimension {dimension} exceeds covariate dimension {}",
                self.dim()
            )));
        }
        Ok(EdrModel {
            dimension,
            ..self.clone()
        })
    }

    /// Same leading spans, rows orthonormalized in the Euclidean inner
    /// product (Gram-Schmidt in eigenvalue order, then sign-normalized).
    pub fn to_euclidean(&self) -> EdrModel {
        let d = self.dim();
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(d);
        for r in 0..d {
            let mut v: Vec<f64> = self.basis.row(r).iter().copied().collect();
            // Two passes of modified Gram-Schmidt.
            for _ in 0..2 {
                for q in &rows {
                    let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
                }
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|a| *a /= norm);
            }
            sign_normalize(&mut v);
            rows.push(v);
        }
        let basis = DMatrix::from_fn(d, d, |r, c| rows[r][c]);
        EdrModel {
            basis,
            metric: DirectionMetric::Euclidean,
            ..self.clone()
        }
    }
}

/// Makes the largest-magnitude entry (first one on ties) positive.
fn sign_normalize(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Solves `Sigma_en v = lambda Sigma_n v` and keeps the leading directions.
pub fn edr_directions(cov: &CovariancePair, rule: DimensionRule) -> Result<EdrModel> {
    let d = cov.dim();
    if let DimensionRule::Fixed(k) = rule {
        if k == 0 || k > d {
            return Err(Error::InvalidSpec(format!("dimension must lie in 1..={d}, got {k}")));
        }
    }
    let (sigma, ridge) = ridge_repair(cov.sigma())?;
    let eig = SymmetricEigen::new(sigma);
    let whitening = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    let whitened = symmetrize(&(&whitening * cov.sigma_e() * &whitening));
    let inner = SymmetricEigen::new(whitened);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| inner.eigenvalues[b].total_cmp(&inner.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| inner.eigenvalues[i]).collect();
    let mut basis = DMatrix::zeros(d, d);
    for (row, &i) in order.iter().enumerate() {
        let v = &whitening * inner.eigenvectors.column(i);
        let mut v: Vec<f64> = v.iter().copied().collect();
        sign_normalize(&mut v);
        basis.row_mut(row).copy_from_slice(&v);
    }
    let dimension = match rule {
        DimensionRule::Fixed(k) => k,
        DimensionRule::ThresholdFraction(p) => select_dimension(&eigenvalues, p)?,
    };
    Ok(EdrModel {
        basis,
        eigenvalues,
        dimension,
        ridge,
        metric: DirectionMetric::Covariance,
    })
}

/// Adds `tau * trace / d * I` when the condition number exceeds the limit.
/// Returns the (possibly) repaired matrix and the ridge that was added.
fn ridge_repair(sigma: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let d = sigma.nrows();
    let condition = |m: &DMatrix<f64>| {
        let ev = SymmetricEigen::new(m.clone()).eigenvalues;
        let (lo, hi) = (ev.min(), ev.max());
        if lo > 0.0 {
            hi / lo
        } else {
            f64::INFINITY
        }
    };
    if condition(sigma) <= RIDGE_CONDITION_LIMIT {
        return Ok((sigma.clone(), 0.0));
    }
    let ridge = RIDGE_TAU * sigma.trace() / d as f64;
    if !(ridge > 0.0 && ridge.is_finite()) {
        return Err(Error::SingularCovariance);
    }
    let repaired = sigma + DMatrix::identity(d, d) * ridge;
    if condition(&repaired) > RIDGE_CONDITION_LIMIT {
        return Err(Error::SingularCovariance);
    }
    Ok((repaired, ridge))
}

/// Smallest `D` with `sum_{j<=D} lambda_j / sum_j lambda_j >= fraction`,
/// eigenvalues clamped at zero. Returns 0 when every eigenvalue is zero.
pub fn select_dimension(eigenvalues: &[f64], fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidThreshold(fraction));
    }
    let clamped: Vec<f64> = eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total <= 0.0 {
        return Ok(0);
    }
    // Relative slack so that the rule does not flip on rounding alone.
    let target = fraction * total * (1.0 - 1e-12);
    let mut cum = 0.0;
    for (k, l) in clamped.iter().enumerate() {
        cum += l;
        if cum >= target {
            return Ok(k + 1);
        }
    }
    Ok(clamped.len())
}

/// Orthonormal basis (as rows) of the row space of `m`.
fn row_space(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 || m.iter().all(|v| *v == 0.0) {
        return Err(Error::UndefinedSubspace);
    }
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let s_max = svd.singular_values.max();
    let tol = s_max * 1e-10 * m.nrows().max(m.ncols()) as f64;
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol)
        .collect();
    Ok(DMatrix::from_fn(keep.len(), m.ncols(), |r, c| v_t[(keep[r], c)]))
}

/// `|P_A - P_B|_F / sqrt(D + D')`, with `P_M` the orthogonal projector on the
/// row space of `M` and `D`, `D'` the ranks. Equal spans give 0, orthogonal
/// spans of equal dimension give 1.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.ncols() != b.ncols() {
        return Err(Error::InvalidSpec(format!(
            "subspaces live in R^{} and R^{}",
            a.ncols(),
            b.ncols()
        )));
    }
    let qa = row_space(a)?;
    let qb = row_space(b)?;
    let pa = qa.transpose() * &qa;
    let pb = qb.transpose() * &qb;
    let dist = (pa - pb).norm() / ((qa.nrows() + qb.nrows()) as f64).sqrt();
    Ok(dist.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    use crate::rng::rng_from_seed;

    fn row(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, v.len(), v)
    }

    #[test]
    fn covariance_small_cases() {
        let data = RegressionDataset::from_rows(&[(vec![1.0, 0.0], 0.0), (vec![-1.0, 0.0], 1.0)]).unwrap();
        let c = empirical_covariance(&data).unwrap();
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let same = RegressionDataset::from_rows(&[(vec![3.0, 2.0], 0.0), (vec![3.0, 2.0], 1.0)]).unwrap();
        assert_eq!(empirical_covariance(&same).unwrap(), DMatrix::zeros(2, 2));
        let one = RegressionDataset::from_rows(&[(vec![3.0], 0.0)]).unwrap();
        assert!(matches!(empirical_covariance(&one), Err(Error::DegenerateDataset(_))));
    }

    #[test]
    fn covariance_of_gaussian_sample() {
        let mut rng = rng_from_seed(17);
        let xs: Vec<f64> = (0..5000 * 3).map(|_| rng.sample(StandardNormal)).collect();
        let data = RegressionDataset::new(3, xs, vec![0.0; 5000]).unwrap();
        let c = empirical_covariance(&data).unwrap();
        let err = (c - DMatrix::<f64>::identity(3, 3)).amax();
        assert!(err < 0.1, "{err}");
    }

    #[test]
    fn constant_covariates_give_zero_sigma_e() {
        let ys: Vec<f64> = (0..60).map(|i| (i as f64 * 0.1).cos()).collect();
        let data = RegressionDataset::new(2, [0.5, -1.0].repeat(60), ys).unwrap();
        let bw = Bandwidths::new(0.8, 1e-6).unwrap();
        let s = inverse_regression_covariance_with(&data, &Kernel::epanechnikov(), FloorVariant::Max, bw)
            .unwrap();
        assert!(s.amax() < 1e-12);
    }

    #[test]
    fn axis_example() {
        let mut se = DMatrix::zeros(3, 3);
        se[(0, 0)] = 0.5;
        let pair = CovariancePair::new(DMatrix::identity(3, 3), se, 100).unwrap();
        let m = edr_directions(&pair, DimensionRule::Fixed(1)).unwrap();
        assert_eq!(m.directions(), row(&[1.0, 0.0, 0.0]));
        assert_eq!(m.eigenvalues()[0], 0.5);
        assert_eq!(m.ridge(), 0.0);
        let auto = edr_directions(&pair, DimensionRule::ThresholdFraction(0.9)).unwrap();
        assert_eq!(auto.dimension(), 1);
    }

    #[test]
    fn null_signal_selects_zero() {
        let pair = CovariancePair::new(DMatrix::identity(3, 3), DMatrix::zeros(3, 3), 10).unwrap();
        let m = edr_directions(&pair, DimensionRule::default()).unwrap();
        assert_eq!(m.dimension(), 0);
        assert!(m.eigenvalues().iter().all(|l| *l == 0.0));
    }

    #[test]
    fn random_generalized_pairs_have_small_residuals() {
        let mut rng = rng_from_seed(99);
        for _ in 0..20 {
            let a = DMatrix::from_fn(4, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
            let b = DMatrix::from_fn(4, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
            let sigma = &a * a.transpose() + DMatrix::identity(4, 4) * 0.1;
            let sigma_e = &b * b.transpose();
            let pair = CovariancePair::new(sigma.clone(), sigma_e.clone(), 10).unwrap();
            let m = edr_directions(&pair, DimensionRule::Fixed(4)).unwrap();
            let scale = sigma_e.norm();
            for (k, lambda) in m.eigenvalues().iter().enumerate() {
                let v = m.basis().row(k).transpose();
                let res = (&sigma_e * &v - &sigma * &v * *lambda).norm();
                assert!(res <= 1e-8 * scale.max(1.0), "residual {res}");
            }
            // Sigma_n-orthonormal rows
            let gram = m.basis() * &sigma * m.basis().transpose();
            assert!((gram - DMatrix::<f64>::identity(4, 4)).amax() < 1e-8);
            assert!(m.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn singular_sigma_gets_ridge() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let mut se = DMatrix::zeros(2, 2);
        se[(0, 0)] = 0.2;
        let pair = CovariancePair::new(sigma, se, 5).unwrap();
        let m = edr_directions(&pair, DimensionRule::Fixed(1)).unwrap();
        assert_eq!(m.ridge(), RIDGE_TAU * 2.0 / 2.0);
        let zero = CovariancePair::new(DMatrix::zeros(2, 2), DMatrix::zeros(2, 2), 5).unwrap();
        assert!(matches!(
            edr_directions(&zero, DimensionRule::Fixed(1)),
            Err(Error::SingularCovariance)
        ));
    }

    #[test]
    fn non_psd_sigma_rejected() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(CovariancePair::new(sigma, DMatrix::zeros(2, 2), 5).is_err());
    }

    #[test]
    fn euclidean_view_keeps_span() {
        let sigma = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.2, 0.0, 0.2, 0.5]);
        let se = DMatrix::from_row_slice(3, 3, &[0.4, 0.1, 0.0, 0.1, 0.3, 0.0, 0.0, 0.0, 0.0]);
        let m = edr_directions(&CovariancePair::new(sigma, se, 9).unwrap(), DimensionRule::Fixed(2)).unwrap();
        let e = m.to_euclidean();
        assert_eq!(e.metric(), DirectionMetric::Euclidean);
        let dirs = e.directions();
        assert!((&dirs * dirs.transpose() - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
        assert!(subspace_distance(&dirs, &m.directions()).unwrap() < 1e-10);
    }

    #[test]
    fn selection_rule_examples() {
        assert_eq!(select_dimension(&[0.5, 0.0, 0.0], 0.9).unwrap(), 1);
        assert_eq!(select_dimension(&[0.3; 4], 0.75).unwrap(), 3);
        assert_eq!(select_dimension(&[0.0; 3], 0.5).unwrap(), 0);
        assert_eq!(select_dimension(&[0.4, -1e-12, -0.1], 0.99).unwrap(), 1);
        assert_eq!(select_dimension(&[1.0, 1.0], 1.0).unwrap(), 2);
        for bad in [0.0, -0.1, 1.01, f64::NAN] {
            assert!(matches!(select_dimension(&[1.0], bad), Err(Error::InvalidThreshold(_))));
        }
    }

    #[test]
    fn rank_two_signal_is_recovered() {
        let mut rng = rng_from_seed(7);
        let b = DMatrix::from_fn(5, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let noise = DMatrix::from_fn(5, 5, |_, _| rng.sample::<f64, _>(StandardNormal) * 1e-3);
        let se = &b * b.transpose() + (&noise + noise.transpose()) * 0.5;
        let pair = CovariancePair::new(DMatrix::identity(5, 5), se, 10).unwrap();
        let m = edr_directions(&pair, DimensionRule::ThresholdFraction(0.95)).unwrap();
        assert_eq!(m.dimension(), 2);
    }

    #[test]
    fn distance_examples() {
        let e1 = row(&[1.0, 0.0, 0.0]);
        let e2 = row(&[0.0, 1.0, 0.0]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let diag = row(&[s, s, 0.0]);
        assert!(subspace_distance(&e1, &e1).unwrap() < 1e-15);
        assert!((subspace_distance(&e1, &e2).unwrap() - 1.0).abs() < 1e-15);
        // P_A - P_B = [[.5,-.5],[-.5,-.5]] has Frobenius norm 1; divided by sqrt(2)
        assert!((subspace_distance(&e1, &diag).unwrap() - s).abs() < 1e-12);
        let flipped = row(&[-3.0, 0.0, 0.0]);
        assert!(subspace_distance(&e1, &flipped).unwrap() < 1e-15);
        assert!(matches!(
            subspace_distance(&DMatrix::zeros(1, 3), &e1),
            Err(Error::UndefinedSubspace)
        ));
        assert!(subspace_distance(&e1, &row(&[1.0, 0.0])).is_err());
    }
}
