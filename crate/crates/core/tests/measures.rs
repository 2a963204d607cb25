use std::f64::consts::TAU;

use toral_lab::cones::CuDisk;
use toral_lab::measures::*;
use toral_lab::sampling;
use toral_lab::torus::*;

fn base_map() -> DeformedMap {
    build_example(&ExampleParams::default()).unwrap()
}

fn disk(map: &DeformedMap, center: [f64; 4], radius: f64) -> CuDisk {
    let (_, cu) = map.reference_splitting();
    CuDisk::new(TorusPoint::new(center.to_vec()).unwrap(), &cu, radius).unwrap()
}

fn small() -> MeasureOptions {
    MeasureOptions { grid: 16, ..MeasureOptions::default() }
}

#[test]
fn total_mass_is_one() {
    let map = default_deformed_map().unwrap();
    let d = disk(&map, [0.13, 0.71, 0.37, 0.52], 0.02);
    let m = pushforward_average(&map, &d, 50, 1000, 3, &ObservableSet::standard(&map, 8), &small()).unwrap();
    assert!((m.total_mass() - 1.0).abs() <= 1e-12);
    for marginal in &m.marginals {
        assert!((marginal.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
    let kept = m.samples.as_ref().unwrap();
    assert_eq!(kept.len(), 50 * 1000);
    assert!((kept.iter().map(|s| s.1).sum::<f64>() - 1.0).abs() <= 1e-12);
}

#[test]
fn one_step_measure_is_the_disk_sample() {
    let map = default_deformed_map().unwrap();
    let d = disk(&map, [0.3, 0.6, 0.1, 0.9], 0.02);
    let seed = 11;
    let m = pushforward_average(&map, &d, 1, 1000, seed, &ObservableSet::fourier(4), &small()).unwrap();
    let kept = m.samples.unwrap();
    for (i, (x, w)) in kept.iter().enumerate() {
        let (_, expected) = d.sample(&mut sampling::stream(seed, i as u64));
        assert_eq!(x, &expected);
        assert_eq!(*w, 1e-3);
        assert!(torus_distance(x, d.center()).unwrap() <= 0.02 + 1e-12);
    }
}

#[test]
fn integrals_equal_averaged_orbit_sums() {
    let map = default_deformed_map().unwrap();
    let d = disk(&map, [0.4, 0.78, 0.01, 0.02], 0.02);
    let obs = ObservableSet::standard(&map, 8);
    let (n, samples, seed) = (200, 1000, 5);
    let m = pushforward_average(&map, &d, n, samples, seed, &obs, &small()).unwrap();
    let mut direct = vec![0.0; obs.len()];
    for i in 0..samples {
        let (_, x) = d.sample(&mut sampling::stream(seed, i as u64));
        for (acc, v) in direct.iter_mut().zip(birkhoff_average(&map, &x, n, &obs).unwrap()) {
            *acc += v / samples as f64;
        }
    }
    for (a, b) in m.integrals.iter().zip(&direct) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
}

#[test]
fn disk_outside_the_cone_is_rejected() {
    let map = base_map();
    let (cs, _) = map.reference_splitting();
    let d = CuDisk::new(TorusPoint::new(vec![0.2, 0.2, 0.2, 0.2]).unwrap(), &cs, 0.02).unwrap();
    let err = pushforward_average(&map, &d, 10, 1000, 1, &ObservableSet::fourier(4), &small());
    assert!(matches!(err, Err(toral_lab::Error::DiskNotInCone { .. })));
}

#[test]
fn too_few_samples_are_rejected() {
    let map = base_map();
    let d = disk(&map, [0.2, 0.2, 0.2, 0.2], 0.02);
    assert!(pushforward_average(&map, &d, 10, 10, 1, &ObservableSet::fourier(4), &small()).is_err());
}

#[test]
fn linear_pushforward_is_close_to_uniform() {
    let map = base_map();
    let d = disk(&map, [0.13, 0.71, 0.37, 0.52], 0.02);
    let obs = ObservableSet::fourier(4);
    let opts = MeasureOptions { grid: 32, ..MeasureOptions::default() };
    let m = pushforward_average(&map, &d, 1000, 2000, 1, &obs, &opts).unwrap();
    let noise: Vec<f64> = (0..5)
        .map(|k| {
            let again = pushforward_average(&map, &d, 1000, 2000, 100 + k, &obs, &opts).unwrap();
            m.marginal_tv(&again).unwrap()
        })
        .collect();
    let noise = noise.iter().sum::<f64>() / noise.len() as f64;
    assert!(m.tv_to_uniform() <= 3.0 * noise, "tv {} noise {}", m.tv_to_uniform(), noise);
}

#[test]
fn linear_birkhoff_average_of_cosine_vanishes() {
    let map = base_map();
    let obs = ObservableSet::new(vec![Observable::Cos { m: vec![1, 0, 0, 0] }]);
    let n = 100_000;
    let x = TorusPoint::new(vec![0.1234, 0.5678, 0.9012, 0.3456]).unwrap();
    let avg = birkhoff_average(&map, &x, n, &obs).unwrap();
    assert!(avg[0].abs() <= 5.0 / (n as f64).sqrt(), "{}", avg[0]);
}

#[test]
fn single_step_birkhoff_average_is_the_value() {
    let map = default_deformed_map().unwrap();
    let obs = ObservableSet::standard(&map, 8);
    let x = TorusPoint::new(vec![0.41, 0.79, 0.01, 0.99]).unwrap();
    let avg = birkhoff_average(&map, &x, 1, &obs).unwrap();
    for (a, o) in avg.iter().zip(&obs.observables) {
        assert_eq!(*a, o.eval(&x));
    }
    assert_eq!(avg[0], (TAU * 0.41).cos());
}

#[test]
fn same_start_has_zero_dispersion() {
    let map = default_deformed_map().unwrap();
    let r = ergodicity_dispersion(&map, 5, 1000, &ObservableSet::standard(&map, 8), 2, true).unwrap();
    assert_eq!(r.dispersion, 0.0);
    assert!(r.pass);
}

#[test]
fn linear_dispersion_is_within_the_envelope() {
    let map = base_map();
    let r = ergodicity_dispersion(&map, 100, 10_000, &ObservableSet::standard(&map, 8), 4, false).unwrap();
    assert!(r.pass, "{} > {}", r.dispersion, r.envelope);
    assert_eq!(r.envelope, 5.0 / 100.0);
}

#[test]
fn dispersion_needs_two_starts() {
    let map = base_map();
    assert!(ergodicity_dispersion(&map, 1, 10, &ObservableSet::fourier(4), 0, false).is_err());
}

#[test]
fn identical_disk_and_seed_give_zero_distance() {
    let map = default_deformed_map().unwrap();
    let d = disk(&map, [0.13, 0.71, 0.37, 0.52], 0.02);
    let r = srb_uniqueness_distance(&map, &d, &d, 100, 1000, 9, 3, &ObservableSet::standard(&map, 8), &small()).unwrap();
    assert_eq!(r.distance, 0.0);
    assert_eq!(r.baseline.len(), 3);
    assert!(r.baseline.iter().all(|b| *b > 0.0));
    assert!(r.pass);
}

#[test]
fn distance_between_distinct_disks_shrinks_like_one_over_n() {
    // at equal work, four times longer orbits leave a quarter of the start-up bias
    let map = base_map();
    let a = disk(&map, [0.13, 0.71, 0.37, 0.52], 0.02);
    let b = disk(&map, [0.62, 0.21, 0.83, 0.05], 0.02);
    let obs = ObservableSet::standard(&map, 8);
    let short = srb_uniqueness_distance(&map, &a, &b, 250, 4000, 1, 0, &obs, &small()).unwrap();
    let long = srb_uniqueness_distance(&map, &a, &b, 1000, 1000, 1, 0, &obs, &small()).unwrap();
    assert!(long.integral_difference < 0.5 * short.integral_difference, "{} vs {}", long.integral_difference, short.integral_difference);
}

#[test]
fn volume_preserving_map_keeps_uniform_samples_uniform() {
    let map = default_deformed_map().unwrap();
    let g = 16;
    let samples = 200_000;
    let histogram = |steps: usize| -> Vec<f64> {
        let mut h = vec![0.0; g * g];
        let mut rng = sampling::stream(17, 0);
        for _ in 0..samples {
            let x = map.iterate(&sampling::uniform_point(&mut rng, 4), steps);
            let c = x.as_slice();
            h[(c[0] * g as f64) as usize * g + (c[1] * g as f64) as usize] += 1.0 / samples as f64;
        }
        h
    };
    let tv = |h: &[f64]| 0.5 * h.iter().map(|p| (p - 1.0 / (g * g) as f64).abs()).sum::<f64>();
    let before = tv(&histogram(0));
    let after = tv(&histogram(10));
    assert!(after <= 1.5 * before, "{after} vs {before}");
}

#[test]
fn scan_across_the_verified_range() {
    let map = default_deformed_map().unwrap();
    let verify = VerifyOptions { samples: 300, ..VerifyOptions::default() };
    let strengths: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|f| f * MEASURED_MAX_STRENGTH).collect();
    let rows = stability_scan(&map, &strengths, &verify, 10, 2000, 8, 3).unwrap();
    assert_eq!(rows.len(), 5);
    for row in &rows {
        assert!(row.conditions_pass, "strength {}", row.strength);
        assert!(row.worst_check_ratio <= 1.0);
        assert!(row.dispersion.as_ref().unwrap().pass);
    }
}

#[test]
fn scan_at_zero_strength_is_the_linear_dispersion() {
    let map = default_deformed_map().unwrap();
    let verify = VerifyOptions { samples: 200, ..VerifyOptions::default() };
    let rows = stability_scan(&map, &[0.0], &verify, 10, 2000, 8, 3).unwrap();
    let linear = ergodicity_dispersion(&map.with_uniform_strength(0.0).unwrap(), 10, 2000, &ObservableSet::standard(&map, 8), 3, false).unwrap();
    assert_eq!(rows[0].dispersion.as_ref().unwrap().dispersion, linear.dispersion);
}

#[test]
fn out_of_range_strength_is_flagged_without_a_probe() {
    let map = default_deformed_map().unwrap();
    let verify = VerifyOptions { samples: 300, ..VerifyOptions::default() };
    let rows = stability_scan(&map, &[20.0 * MEASURED_MAX_STRENGTH], &verify, 10, 2000, 8, 3).unwrap();
    assert!(!rows[0].conditions_pass);
    assert!(rows[0].dispersion.is_none());
}
