use nalgebra::DMatrix;
use proptest::prelude::*;
use std::collections::HashSet;

use spatial_edr::edr::{
    edr_directions, select_dimension, subspace_distance, CovariancePair, DimensionRule,
};
use spatial_edr::fieldsim::{generate_field, FieldSpec, MaWeights};
use spatial_edr::kernelest::{EstimatorConfig, KernelSmoother};
use spatial_edr::lattice::{
    build_associated_process, center_dataset, neighbor_ordering, vicinity_values, LatticeRegion,
    RegressionDataset, ScalarField, Site,
};
use spatial_edr::predictor::{fit, NeighborCount, PredictorConfig, ReducedRegressor};

fn dist2(a: &Site, b: &Site) -> i64 {
    a.coords().iter().zip(b.coords()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dataset(dim: usize, vals: &[f64]) -> RegressionDataset {
    let n = vals.len() / (dim + 1);
    let xs = vals[..n * dim].to_vec();
    let ys = vals[n * dim..n * (dim + 1)].to_vec();
    RegressionDataset::new(dim, xs, ys).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn neighbor_ordering_is_a_sorted_prefix(
        w in 2usize..9, h in 2usize..9, sx in 0usize..9, sy in 0usize..9, count in 1usize..20,
    ) {
        let region = LatticeRegion::new(vec![w, h]).unwrap();
        let site = Site::new(vec![(sx % w) as i64 + 1, (sy % h) as i64 + 1]).unwrap();
        let count = count.min(region.cardinality() - 1);
        let out = neighbor_ordering(&site, &region, count).unwrap();
        prop_assert_eq!(out.len(), count);
        let distinct: HashSet<_> = out.iter().cloned().collect();
        prop_assert_eq!(distinct.len(), out.len());
        prop_assert!(!out.contains(&site));
        prop_assert!(out.iter().all(|s| region.contains(s)));
        for pair in out.windows(2) {
            prop_assert!(dist2(&site, &pair[0]) <= dist2(&site, &pair[1]));
        }
        // nothing closer was skipped
        let last = dist2(&site, out.last().unwrap());
        let closer = region.iter().filter(|s| *s != site && dist2(&site, s) < last).count();
        prop_assert!(closer <= count);
    }

    #[test]
    fn neighbor_ordering_translates(
        ox in -50i64..50, oy in -50i64..50, count in 1usize..12,
    ) {
        let region = LatticeRegion::new(vec![9, 9]).unwrap();
        let shifted = LatticeRegion::with_origin(vec![ox, oy], vec![9, 9]).unwrap();
        let site = Site::new(vec![5, 5]).unwrap();
        let moved = site.offset(&[ox, oy]);
        let a = neighbor_ordering(&site, &region, count).unwrap();
        let b = neighbor_ordering(&moved, &shifted, count).unwrap();
        let a_moved: Vec<Site> = a.iter().map(|s| s.offset(&[ox, oy])).collect();
        prop_assert_eq!(a_moved, b);
    }

    #[test]
    fn associated_process_reads_the_field(seed in any::<u64>(), d in 1usize..9) {
        let field = generate_field(&FieldSpec::white_noise(vec![8, 7], seed)).unwrap();
        let region = field.region().clone();
        let data = build_associated_process(&field, d, &region).unwrap();
        let sites = data.sites().unwrap();
        for (i, site) in sites.iter().enumerate() {
            prop_assert_eq!(data.ys()[i], field.get(site).unwrap());
            let nbs = neighbor_ordering(site, &region, d).unwrap();
            for (k, nb) in nbs.iter().enumerate() {
                prop_assert_eq!(data.x(i)[k], field.get(nb).unwrap());
            }
        }
    }

    #[test]
    fn centering_is_idempotent(
        dim in 1usize..5,
        vals in prop::collection::vec(-1e3f64..1e3, 60),
    ) {
        let data = dataset(dim, &vals);
        prop_assume!(data.len() >= 2);
        let (once, _) = center_dataset(&data).unwrap();
        let (_, shift) = center_dataset(&once).unwrap();
        prop_assert!(shift.iter().all(|s| s.abs() <= 1e-12));
    }

    #[test]
    fn selected_dimension_ignores_scale(
        mut eig in prop::collection::vec(0.0f64..10.0, 1..8),
        c in 1e-6f64..1e6,
        frac in 0.05f64..1.0,
    ) {
        eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let scaled: Vec<f64> = eig.iter().map(|v| v * c).collect();
        prop_assert_eq!(
            select_dimension(&eig, frac).unwrap(),
            select_dimension(&scaled, frac).unwrap()
        );
    }

    #[test]
    fn subspace_distance_symmetric_and_sign_free(
        a in prop::collection::vec(-1.0f64..1.0, 8),
        b in prop::collection::vec(-1.0f64..1.0, 4),
        flip in any::<bool>(),
    ) {
        let ma = DMatrix::from_row_slice(2, 4, &a);
        let mb = DMatrix::from_row_slice(1, 4, &b);
        prop_assume!(ma.rank(1e-6) == 2 && mb.rank(1e-6) == 1);
        let ab = subspace_distance(&ma, &mb).unwrap();
        let ba = subspace_distance(&mb, &ma).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        let sign = if flip { -1.0 } else { 1.0 };
        let mut flipped = ma.clone();
        flipped.row_mut(0).scale_mut(sign);
        flipped.row_mut(1).scale_mut(-3.0);
        prop_assert!((subspace_distance(&flipped, &mb).unwrap() - ab).abs() < 1e-10);
        prop_assert!(subspace_distance(&ma, &ma).unwrap() < 1e-7);
    }

    #[test]
    fn generalized_eigenpairs_have_small_residuals(
        l in prop::collection::vec(-1.0f64..1.0, 9),
        m in prop::collection::vec(-1.0f64..1.0, 6),
    ) {
        let l = DMatrix::from_row_slice(3, 3, &l);
        let sigma = &l * l.transpose() + DMatrix::identity(3, 3) * 0.1;
        let m = DMatrix::from_row_slice(2, 3, &m);
        let sigma_e = m.transpose() * &m;
        let pair = CovariancePair::new(sigma, sigma_e, 100).unwrap();
        let model = edr_directions(&pair, DimensionRule::Fixed(3)).unwrap();
        let norm = pair.sigma_e().norm();
        let eig = model.eigenvalues();
        prop_assert!(eig.windows(2).all(|w| w[0] >= w[1]));
        let dirs = model.directions();
        for (j, lambda) in eig.iter().enumerate() {
            let v = dirs.row(j).transpose();
            let res = pair.sigma_e() * &v - pair.sigma() * &v * *lambda;
            prop_assert!(res.norm() <= 1e-8 * norm.max(1e-300));
        }
    }

    #[test]
    fn smoother_matches_naive_loop(
        vals in prop::collection::vec(-3.0f64..3.0, 90),
        y in -3.0f64..3.0,
    ) {
        let data = dataset(2, &vals);
        let config = EstimatorConfig::default();
        let s = KernelSmoother::new(&data, &config).unwrap();
        let bw = s.bandwidths();
        let k = &config.kernel;
        let n = data.len() as f64;
        let mut f = 0.0;
        let mut phi = [0.0; 2];
        for i in 0..data.len() {
            let w = k.eval((y - data.ys()[i]) / bw.h) / (n * bw.h);
            f += w;
            phi[0] += w * data.x(i)[0];
            phi[1] += w * data.x(i)[1];
        }
        prop_assert!((s.density(y) - f).abs() <= 1e-12);
        let num = s.numerator(y);
        prop_assert!((num[0] - phi[0]).abs() <= 1e-12 && (num[1] - phi[1]).abs() <= 1e-12);
        let ev = s.eval(y);
        prop_assert!(ev.f_en >= bw.e);
        prop_assert!((ev.r_en[0] - phi[0] / f.max(bw.e)).abs() <= 1e-12);
    }

    #[test]
    fn reduced_prediction_ignores_sample_order(
        seed in any::<u64>(), perm_seed in any::<u64>(),
    ) {
        let field = generate_field(&FieldSpec::moving_average(vec![14, 14], 1, MaWeights::Diamond, seed)).unwrap();
        let data = build_associated_process(&field, 4, field.region()).unwrap();
        let mut order: Vec<usize> = (0..data.len()).collect();
        // Fisher-Yates driven by a splitmix stream
        let mut state = perm_seed;
        for i in (1..order.len()).rev() {
            state = spatial_edr::rng::splitmix64(state);
            order.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let shuffled = data.subset(&order).unwrap();
        let dirs = DMatrix::from_row_slice(1, 4, &[0.5, 0.5, 0.5, 0.5]);
        let kernel = EstimatorConfig::default().kernel;
        let a = ReducedRegressor::new(&data, dirs.clone(), kernel.clone(), 0.7).unwrap();
        let b = ReducedRegressor::new(&shuffled, dirs, kernel, 0.7).unwrap();
        let q = data.x(0);
        let pa = a.predict(q).unwrap();
        let pb = b.predict(q).unwrap();
        prop_assert!((pa - pb).abs() <= 1e-12 * pa.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn field_generation_is_deterministic(seed in any::<u64>(), radius in 0usize..3) {
        let spec = FieldSpec::moving_average(vec![20, 17], radius, MaWeights::Uniform, seed);
        let a = generate_field(&spec).unwrap();
        let b = generate_field(&spec).unwrap();
        prop_assert_eq!(a.values(), b.values());
    }

    #[test]
    fn predictor_fit_is_deterministic(seed in any::<u64>()) {
        let field = generate_field(&FieldSpec::moving_average(vec![24, 24], 1, MaWeights::Diamond, seed)).unwrap();
        let cfg = PredictorConfig { dimension: DimensionRule::Fixed(1), ..Default::default() };
        let a = fit(&field, field.region(), NeighborCount::Fixed(4), &cfg).unwrap();
        let b = fit(&field, field.region(), NeighborCount::Fixed(4), &cfg).unwrap();
        prop_assert_eq!(a.edr().eigenvalues(), b.edr().eigenvalues());
        let t = Site::new(vec![10, 10]).unwrap();
        let pa = a.predict_site(&field, field.region(), &t).unwrap();
        let pb = b.predict_site(&field, field.region(), &t).unwrap();
        prop_assert_eq!(pa.to_bits(), pb.to_bits());
    }

    #[test]
    fn prediction_is_local(seed in any::<u64>(), bump in -5.0f64..5.0) {
        // Training on the left half only; editing a right-half site that is
        // not in the target's vicinity must leave the prediction untouched.
        let field = generate_field(&FieldSpec::moving_average(vec![30, 20], 1, MaWeights::Diamond, seed)).unwrap();
        let observed = field.region().clone();
        let train = LatticeRegion::new(vec![15, 20]).unwrap();
        let cfg = PredictorConfig { dimension: DimensionRule::Fixed(1), ..Default::default() };
        let model = fit(&field, &train, NeighborCount::Fixed(4), &cfg).unwrap();
        let target = Site::new(vec![22, 10]).unwrap();
        let before = model.predict_site(&field, &observed, &target).unwrap();

        let mut edited: ScalarField = field.clone();
        let far = Site::new(vec![27, 3]).unwrap();
        edited.set(&far, field.get(&far).unwrap() + bump).unwrap();
        let refit = fit(&edited, &train, NeighborCount::Fixed(4), &cfg).unwrap();
        let after = refit.predict_site(&edited, &observed, &target).unwrap();
        prop_assert_eq!(before.to_bits(), after.to_bits());
        prop_assert_eq!(
            vicinity_values(&field, &target, 4, &observed).unwrap(),
            vicinity_values(&edited, &target, 4, &observed).unwrap()
        );
    }
}
