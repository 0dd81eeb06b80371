use nalgebra::{DMatrix, SymmetricEigen};

use spatial_edr::error::Error;
use spatial_edr::fieldsim::{
    generate_field, generate_single_index, ground_truth_sigma_e, ground_truth_sigma_e_with_bins,
    FieldSpec, Link, MaWeights, SingleIndexSpec,
};
use spatial_edr::lattice::{LatticeRegion, ScalarField, Site};
use spatial_edr::rng::derive_seed;

fn lag1_autocorrelation(field: &ScalarField) -> f64 {
    let region = field.region();
    let (mean, var) = field.moments_over(region);
    let mut acc = 0.0;
    let mut count = 0.0;
    for site in region.iter() {
        let right = site.offset(&[1, 0]);
        if let Some(v) = field.get(&right) {
            acc += (field.get(&site).unwrap() - mean) * (v - mean);
            count += 1.0;
        }
    }
    acc / count / var
}

/// Number of window offsets `u` with `u + lag` still in the window.
fn overlap_ratio(radius: i64, lag: [i64; 2]) -> f64 {
    let side = 2 * radius + 1;
    let mut shared = 0;
    for a in -radius..=radius {
        for b in -radius..=radius {
            let (c, d) = (a + lag[0], b + lag[1]);
            if c.abs() <= radius && d.abs() <= radius {
                shared += 1;
            }
        }
    }
    shared as f64 / (side * side) as f64
}

#[test]
fn moving_average_lag_one_correlation_matches_window_overlap() {
    let expected = overlap_ratio(1, [1, 0]);
    assert!((expected - 6.0 / 9.0).abs() < 1e-15);
    let mean: f64 = (0..20)
        .map(|j| {
            let spec = FieldSpec::moving_average(vec![40, 40], 1, MaWeights::Uniform, derive_seed(21, j));
            lag1_autocorrelation(&generate_field(&spec).unwrap())
        })
        .sum::<f64>()
        / 20.0;
    assert!((mean - expected).abs() < 0.05, "lag-1 autocorrelation {mean} vs {expected}");
}

#[test]
fn moving_average_halves_look_alike() {
    let left = LatticeRegion::new(vec![30, 60]).unwrap();
    let right = LatticeRegion::with_origin(vec![31, 1], vec![30, 60]).unwrap();
    let (mut dm, mut dv) = (0.0, 0.0);
    for j in 0..20 {
        let spec = FieldSpec::moving_average(vec![60, 60], 1, MaWeights::Uniform, derive_seed(22, j));
        let field = generate_field(&spec).unwrap();
        let (m1, v1) = field.moments_over(&left);
        let (m2, v2) = field.moments_over(&right);
        dm += (m1 - m2).abs() / 20.0;
        dv += (v1 - v2).abs() / 20.0;
    }
    assert!(dm < 0.1 && dv < 0.1, "mean gap {dm}, variance gap {dv}");
}

#[test]
fn white_noise_is_standard_normal() {
    let field = generate_field(&FieldSpec::white_noise(vec![100, 100], 5)).unwrap();
    let (m, v) = field.moments_over(field.region());
    assert!(m.abs() < 0.05 && (v - 1.0).abs() < 0.05, "mean {m}, variance {v}");
    assert!(lag1_autocorrelation(&field).abs() < 0.05);
}

#[test]
fn zero_area_field_is_rejected() {
    let spec = FieldSpec::white_noise(vec![0, 10], 1);
    assert!(matches!(generate_field(&spec), Err(Error::EmptyRegion)));
}

#[test]
fn gaussian_decay_is_unit_variance_and_correlated() {
    let spec = FieldSpec {
        kind: spatial_edr::fieldsim::FieldKind::GaussianDecay { range: 1.0 },
        dims: vec![80, 80],
        seed: 3,
    };
    let field = generate_field(&spec).unwrap();
    let (_, v) = field.moments_over(field.region());
    assert!((v - 1.0).abs() < 0.1, "variance {v}");
    // Gaussian weights at range 1: lag-1 correlation is exp(-1/4)
    let rho = lag1_autocorrelation(&field);
    assert!((rho - (-0.25f64).exp()).abs() < 0.05, "lag-1 correlation {rho}");
}

fn covariance(data: &spatial_edr::lattice::RegressionDataset) -> DMatrix<f64> {
    let d = data.dim();
    let n = data.len() as f64;
    let mean = data.mean_x();
    let mut c = DMatrix::zeros(d, d);
    for i in 0..data.len() {
        for a in 0..d {
            for b in 0..d {
                c[(a, b)] += (data.x(i)[a] - mean[a]) * (data.x(i)[b] - mean[b]) / n;
            }
        }
    }
    c
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn independent_covariates_have_identity_covariance() {
    let spec = SingleIndexSpec::axis(vec![50, 50], 3, Link::Identity, 1.0, 8);
    let data = generate_single_index(&spec).unwrap();
    assert_eq!(data.len(), 2500);
    let c = covariance(&data);
    let gap = (&c - DMatrix::<f64>::identity(3, 3)).abs().max();
    assert!(gap <= 0.1, "max deviation {gap}");
}

#[test]
fn spatially_correlated_covariates_keep_unit_marginals() {
    let mut spec = SingleIndexSpec::axis(vec![60, 60], 2, Link::Identity, 0.0, 9);
    spec.rho = 0.6;
    let data = generate_single_index(&spec).unwrap();
    let c = covariance(&data);
    assert!((c[(0, 0)] - 1.0).abs() < 0.15 && (c[(1, 1)] - 1.0).abs() < 0.15, "{c}");
    // neighbouring sites now share information
    let sites = data.sites().unwrap();
    let index: std::collections::HashMap<&Site, usize> =
        sites.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (i, s) in sites.iter().enumerate() {
        if let Some(&j) = index.get(&s.offset(&[1, 0])) {
            a.push(data.x(i)[0]);
            b.push(data.x(j)[0]);
        }
    }
    assert!(correlation(&a, &b) > 0.2);
}

#[test]
fn cubic_response_tracks_first_coordinate_only() {
    let spec = SingleIndexSpec::axis(vec![50, 50], 3, Link::Cubic, 0.5, 10);
    let data = generate_single_index(&spec).unwrap();
    let col = |k: usize| (0..data.len()).map(|i| data.x(i)[k]).collect::<Vec<_>>();
    assert!(correlation(data.ys(), &col(0)) > 0.0);
    assert!(correlation(data.ys(), &col(1)).abs() < 0.05);
    assert!(correlation(data.ys(), &col(2)).abs() < 0.05);
}

#[test]
fn single_index_generation_is_deterministic() {
    let spec = SingleIndexSpec::axis(vec![20, 20], 4, Link::Sine, 0.3, 77);
    let a = generate_single_index(&spec).unwrap();
    let b = generate_single_index(&spec).unwrap();
    assert_eq!(a.xs(), b.xs());
    assert_eq!(a.ys(), b.ys());
}

#[test]
fn identity_oracle_matches_closed_form() {
    let spec = SingleIndexSpec::axis(vec![10, 10], 3, Link::Identity, 1.0, 1);
    let o = ground_truth_sigma_e(&spec, 200_000).unwrap();
    assert!((o.binned[(0, 0)] - 0.5).abs() < 0.02, "{}", o.binned);
    for (r, c) in [(0, 1), (0, 2), (1, 1), (1, 2), (2, 2)] {
        assert!(o.binned[(r, c)].abs() < 0.02, "entry ({r},{c}) = {}", o.binned[(r, c)]);
    }
    let closed = o.closed_form.as_ref().expect("closed form for identity link");
    assert!((closed[(0, 0)] - 0.5).abs() < 1e-12);
}

#[test]
fn cubic_oracle_is_stable_under_finer_binning() {
    let spec = SingleIndexSpec::axis(vec![10, 10], 3, Link::Cubic, 0.5, 2);
    let draws = 1_000_000;
    let coarse = ground_truth_sigma_e(&spec, draws).unwrap();
    let fine = ground_truth_sigma_e_with_bins(&spec, draws, coarse.bins * 10).unwrap();
    let gap = (&coarse.binned - &fine.binned).abs().max();
    assert!(gap <= 0.02, "coarse vs fine binning differ by {gap}");
}

#[test]
fn single_index_oracle_has_rank_one() {
    let mut spec = SingleIndexSpec::axis(vec![10, 10], 4, Link::Cubic, 0.5, 3);
    spec.beta = vec![0.5, 0.5, 0.5, 0.5];
    let o = ground_truth_sigma_e(&spec, 200_000).unwrap();
    let mut eig = SymmetricEigen::new(o.binned.clone()).eigenvalues.as_slice().to_vec();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    assert!(eig[1] < 0.05 * eig[0], "eigenvalues {eig:?}");
}
