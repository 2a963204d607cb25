use nalgebra::{DMatrix, DVector};
use toral_lab::cones::CuDisk;
use toral_lab::holonomy::*;
use toral_lab::linalg;
use toral_lab::torus::*;

fn mu() -> f64 {
    (3.0 + 5f64.sqrt()) / 2.0
}

fn base_map() -> DeformedMap {
    build_example(&ExampleParams::default()).unwrap()
}

/// Source disk at the second site and a tilted target shifted along `E^cs`.
fn disks(map: &DeformedMap, source_radius: f64) -> (CuDisk, CuDisk) {
    let (cs, cu) = map.reference_splitting();
    let site = map.sites()[1].center.clone();
    let source = CuDisk::new(site.clone(), &cu, source_radius).unwrap();
    let tilt = &cu + &cs * DMatrix::from_row_slice(2, 2, &[0.05, 0.02, -0.03, 0.04]);
    let shift = &cs * DVector::from_vec(vec![0.006, -0.004]);
    let target = CuDisk::new(site.translate(&shift), &tilt, 0.02).unwrap();
    (source, target)
}

fn site_balls(map: &DeformedMap) -> Vec<(TorusPoint, f64)> {
    map.sites().iter().map(|s| (s.center.clone(), s.radius)).collect()
}

#[test]
fn linear_holonomy_is_the_affine_projection() {
    let map = base_map();
    let (cs, _) = map.reference_splitting();
    let (source, target) = disks(&map, 0.006);
    let params = grid_params(2, 0.006, 9);
    let pair = stable_holonomy(&map, &source, &params, &target, &HolonomyOptions::default()).unwrap();
    assert_eq!(pair.matches.len(), params.len());
    // x + cs s = c_t + B t, solved as one linear system
    let mut system = DMatrix::zeros(4, 4);
    system.columns_mut(0, 2).copy_from(target.basis());
    system.columns_mut(2, 2).copy_from(&(-&cs));
    let inverse = system.try_inverse().unwrap();
    for m in &pair.matches {
        let x = source.point(&DVector::from_column_slice(&pair.params[m.index]));
        let rhs = nearest_offset(target.center(), &x);
        let ts = &inverse * rhs;
        for i in 0..2 {
            assert!((m.target_param[i] - ts[i]).abs() <= 1e-8);
        }
        assert!((m.stable_distance - ts.rows(2, 2).norm()).abs() <= 1e-8);
        assert!(m.contraction_rate <= 1.0 / mu() + 1e-9);
    }
}

#[test]
fn target_through_the_source_point_fixes_it() {
    let map = default_deformed_map().unwrap();
    let (source, _) = disks(&map, 0.006);
    let params = grid_params(2, 0.006, 7);
    let pair = stable_holonomy(&map, &source, &params, &source, &HolonomyOptions::default()).unwrap();
    assert_eq!(pair.matches.len(), params.len());
    for m in &pair.matches {
        for (a, b) in m.target_param.iter().zip(&pair.params[m.index]) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert!(m.stable_distance <= 1e-12);
    }
}

#[test]
fn holonomy_is_identity_on_matched_target_points() {
    let map = default_deformed_map().unwrap();
    let (source, target) = disks(&map, 0.006);
    let params = grid_params(2, 0.006, 9);
    let opts = HolonomyOptions::default();
    let pair = stable_holonomy(&map, &source, &params, &target, &opts).unwrap();
    let images: Vec<DVector<f64>> = pair.matches.iter().map(|m| DVector::from_column_slice(&m.target_param)).collect();
    let again = stable_holonomy(&map, &target, &images, &target, &opts).unwrap();
    assert_eq!(again.matches.len(), images.len());
    for m in &again.matches {
        for (a, b) in m.target_param.iter().zip(images[m.index].iter()) {
            assert!((a - b).abs() <= 1e-6);
        }
    }
}

#[test]
fn deformed_holonomy_matches_and_contracts() {
    let map = default_deformed_map().unwrap();
    let (source, target) = disks(&map, 0.006);
    let params = grid_params(2, 0.006, 21);
    let pair = stable_holonomy(&map, &source, &params, &target, &HolonomyOptions::default()).unwrap();
    assert!(pair.match_fraction() >= 0.9);
    assert!(pair.max_contraction_rate() < 1.0);
    for m in &pair.matches {
        let y = target.point(&DVector::from_column_slice(&m.target_param));
        assert_eq!(y.as_slice(), m.target_point.as_slice());
    }
}

#[test]
fn images_beyond_reach_are_unmatched() {
    let map = base_map();
    let (cs, cu) = map.reference_splitting();
    let source = CuDisk::new(TorusPoint::new(vec![0.3, 0.3, 0.3, 0.3]).unwrap(), &cu, 0.01).unwrap();
    let far = source.center().translate(&(&cs * DVector::from_vec(vec![0.1, 0.0])));
    let target = CuDisk::new(far, &cu, 0.02).unwrap();
    let params = grid_params(2, 0.01, 5);
    let pair = stable_holonomy(&map, &source, &params, &target, &HolonomyOptions::default()).unwrap();
    assert!(pair.matches.is_empty());
    assert_eq!(pair.unmatched.len(), params.len());
}

#[test]
fn images_off_the_target_disk_are_unmatched() {
    let map = base_map();
    let (_, cu) = map.reference_splitting();
    let source = CuDisk::new(TorusPoint::new(vec![0.3, 0.3, 0.3, 0.3]).unwrap(), &cu, 0.01).unwrap();
    let target = CuDisk::new(source.center().translate(&(&cu * DVector::from_vec(vec![0.012, 0.0]))), &cu, 0.005).unwrap();
    let pair = stable_holonomy(&map, &source, &grid_params(2, 0.01, 11), &target, &HolonomyOptions::default()).unwrap();
    assert!(!pair.matches.is_empty() && !pair.unmatched.is_empty());
    assert!(pair.matches.iter().all(|m| DVector::from_column_slice(&m.target_param).norm() <= 0.005 * (1.0 + 1e-9)));
}

#[test]
fn tangent_target_is_an_error() {
    let map = base_map();
    let (cs, cu) = map.reference_splitting();
    let mut basis = cu.clone();
    basis.set_column(1, &cs.column(0));
    let source = CuDisk::new(TorusPoint::new(vec![0.3, 0.3, 0.3, 0.3]).unwrap(), &cu, 0.01).unwrap();
    let target = CuDisk::new(TorusPoint::new(vec![0.3, 0.3, 0.3, 0.3]).unwrap(), &basis, 0.01).unwrap();
    let err = stable_holonomy(&map, &source, &grid_params(2, 0.01, 3), &target, &HolonomyOptions::default());
    assert!(matches!(err, Err(toral_lab::Error::DegenerateTangency { .. })));
}

#[test]
fn linear_ratios_equal_the_projection_determinant() {
    let map = base_map();
    let (source, target) = disks(&map, 0.006);
    let pair = stable_holonomy(&map, &source, &grid_params(2, 0.006, 41), &target, &HolonomyOptions::default()).unwrap();
    let oracle = linear_holonomy_jacobian(&map, &source, &target).unwrap();
    assert!((oracle - 1.0).abs() > 1e-3);
    let report = holonomy_measure_ratio(&pair, 0.002, 20, 1).unwrap();
    assert_eq!(report.ratios.len(), 20);
    for r in &report.ratios {
        assert!((r - oracle).abs() <= 1e-8, "{r} vs {oracle}");
    }
}

#[test]
fn identity_holonomy_has_unit_ratios() {
    let map = default_deformed_map().unwrap();
    let (source, _) = disks(&map, 0.006);
    let pair = stable_holonomy(&map, &source, &grid_params(2, 0.006, 21), &source, &HolonomyOptions::default()).unwrap();
    let report = holonomy_measure_ratio(&pair, 0.002, 10, 4).unwrap();
    assert!(report.ratios.iter().all(|r| (r - 1.0).abs() <= 1e-9));
}

#[test]
fn sparse_subdisks_are_skipped_and_reported() {
    let map = base_map();
    let (source, target) = disks(&map, 0.006);
    let pair = stable_holonomy(&map, &source, &grid_params(2, 0.006, 5), &target, &HolonomyOptions::default()).unwrap();
    let report = holonomy_measure_ratio(&pair, 0.001, 10, 2).unwrap();
    assert_eq!(report.skipped.len(), 10);
    assert!(report.max_ratio.is_none());
    assert!(holonomy_measure_ratio(&pair, 0.01, 10, 2).is_err());
}

#[test]
fn deformed_ratio_bound_is_stable_under_halving() {
    let map = default_deformed_map().unwrap();
    let (source, target) = disks(&map, 0.006);
    let pair = stable_holonomy(&map, &source, &grid_params(2, 0.006, 61), &target, &HolonomyOptions::default()).unwrap();
    let k: Vec<f64> = [0.002, 0.001, 0.0005]
        .iter()
        .map(|&r| holonomy_measure_ratio(&pair, r, 30, 7).unwrap().max_ratio.unwrap())
        .collect();
    assert!(k.iter().all(|v| v.is_finite() && *v > 0.0));
    for w in k.windows(2) {
        assert!((w[1] - w[0]).abs() / w[0] < 0.2);
    }
}

#[test]
fn identical_points_and_subspaces_have_zero_gap() {
    let map = default_deformed_map().unwrap();
    let (_, cu) = map.reference_splitting();
    let x = map.sites()[0].center.clone();
    let rec = distortion_ratio(&map, &x, &x, &cu, &cu, 20, &DistortionOptions::default()).unwrap();
    assert!(rec.gaps.iter().all(|g| *g == 0.0));
    assert_eq!(rec.merged_at, Some(0));
}

#[test]
fn linear_unstable_bundle_has_zero_gap_anywhere() {
    let map = base_map();
    let (_, cu) = map.reference_splitting();
    let x = TorusPoint::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let y = TorusPoint::new(vec![0.7, 0.1, 0.5, 0.9]).unwrap();
    let rec = distortion_ratio(&map, &x, &y, &cu, &cu, 20, &DistortionOptions::default()).unwrap();
    assert!(rec.gaps.iter().all(|g| *g == 0.0));
    assert_eq!(rec.fit.unwrap().slope, 0.0);
}

#[test]
fn frozen_distinct_subspaces_grow_linearly_under_the_linear_map() {
    let map = base_map();
    let (cs, cu) = map.reference_splitting();
    let a2 = linalg::orthonormalize(&(&cu + &cs * 0.3));
    let x = TorusPoint::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let n = 30;
    let rec = distortion_ratio(&map, &x, &x, &cu, &a2, n, &DistortionOptions { frozen: true, ..DistortionOptions::default() }).unwrap();
    let a = map.base().matrix();
    let per_step = (linalg::restriction(a, &cu).det.ln() - linalg::restriction(a, &a2).det.ln()).abs();
    assert!(per_step > 0.01);
    for (k, g) in rec.gaps.iter().enumerate() {
        assert!((g - per_step * (k + 1) as f64).abs() <= 1e-9 * (k + 1) as f64);
    }
    assert!((rec.fit.unwrap().slope - per_step).abs() <= 1e-9);
    let pushed = distortion_ratio(&map, &x, &x, &cu, &a2, n, &DistortionOptions::default()).unwrap();
    assert!(pushed.fit.unwrap().slope.abs() <= 1e-6);
}

#[test]
fn same_leaf_pairs_have_bounded_distortion() {
    let map = default_deformed_map().unwrap();
    let (_, cu) = map.reference_splitting();
    let pairs = sample_stable_pairs(&map, &site_balls(&map), 30, 0.01, 2, 3, &HolonomyOptions::default()).unwrap();
    for (x, y) in &pairs {
        let rec = distortion_ratio(&map, x, y, &cu, &cu, 40, &DistortionOptions::default()).unwrap();
        let slope = rec.fit.unwrap().slope;
        assert!((-0.01..=0.01).contains(&slope), "{slope}");
        assert!(rec.truncated_at.is_none());
        assert!(rec.gaps.iter().all(|g| g.is_finite()));
    }
}

#[test]
fn short_distortion_range_is_rejected() {
    let map = base_map();
    let (_, cu) = map.reference_splitting();
    let x = TorusPoint::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    assert!(distortion_ratio(&map, &x, &x, &cu, &cu, 3, &DistortionOptions::default()).is_err());
}

#[test]
fn stable_pairs_lie_on_one_leaf() {
    let map = default_deformed_map().unwrap();
    let pairs = sample_stable_pairs(&map, &site_balls(&map), 10, 0.01, 2, 8, &HolonomyOptions::default()).unwrap();
    for (x, y) in &pairs {
        let d0 = torus_distance(x, y).unwrap();
        assert!(d0 >= 0.01 - 1e-9);
        let d = torus_distance(&map.iterate(x, 8), &map.iterate(y, 8)).unwrap();
        assert!(d <= d0 * 0.5f64.powi(8), "{d} vs {d0}");
    }
}

#[test]
fn coincident_pairs_have_zero_distance_angles() {
    let map = default_deformed_map().unwrap();
    let pairs: Vec<(TorusPoint, TorusPoint)> = sample_stable_pairs(&map, &site_balls(&map), 10, 0.01, 2, 1, &HolonomyOptions::default())
        .unwrap()
        .into_iter()
        .map(|(x, _)| (x.clone(), x))
        .collect();
    let fit = angle_holder_fit(&map, &pairs, 12, 1).unwrap();
    for s in fit.samples.iter().filter(|s| !s.same_point) {
        assert_eq!(s.distance, 0.0);
        assert!(s.angle <= 1e-12, "pair {} step {}: {}", s.pair, s.k, s.angle);
    }
    assert!(fit.alpha.is_none());
}

#[test]
fn linear_angles_decay_at_the_domination_rate() {
    let map = base_map();
    let lambda = mu().powi(-2);
    let pairs: Vec<(TorusPoint, TorusPoint)> = (0..10)
        .map(|i| {
            let x = TorusPoint::new(vec![0.05 + 0.09 * i as f64, 0.3, 0.6, 0.2]).unwrap();
            (x.clone(), x)
        })
        .collect();
    let fit = angle_holder_fit(&map, &pairs, 10, 2).unwrap();
    assert!((fit.lambda_dom - lambda).abs() <= 1e-9);
    assert!((fit.theta - lambda).abs() <= 0.01 * lambda, "{} vs {lambda}", fit.theta);
    for p in 0..10 {
        let same: Vec<f64> = fit.samples.iter().filter(|s| s.pair == p && s.same_point).map(|s| s.angle).collect();
        let ratio = same[9] / same[8];
        assert!((ratio - lambda).abs() <= 1e-3 * lambda, "{ratio}");
    }
}

#[test]
fn deformed_angle_fit_reports_constants() {
    let map = default_deformed_map().unwrap();
    let pairs = sample_stable_pairs(&map, &site_balls(&map), 20, 0.01, 2, 4, &HolonomyOptions::default()).unwrap();
    let fit = angle_holder_fit(&map, &pairs, 40, 4).unwrap();
    assert!(fit.theta < 1.0);
    let alpha = fit.alpha.unwrap();
    assert!(alpha > 0.0 && alpha <= 1.0);
    assert!(fit.constant.is_finite());
    assert!((fit.theta_squared - fit.theta * fit.theta).abs() < 1e-15);
}

#[test]
fn angle_fit_needs_ten_pairs() {
    let map = base_map();
    let x = TorusPoint::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let pairs = vec![(x.clone(), x); 9];
    assert!(matches!(angle_holder_fit(&map, &pairs, 10, 0), Err(toral_lab::Error::TooFewPoints { .. })));
}
