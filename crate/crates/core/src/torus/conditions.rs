//! Sampled verification of the defining open conditions of the deformed map:
//! invariance of the cone fields, uniform hyperbolicity of cone planes outside
//! `V`, bounded loss of hyperbolicity inside `V`, and volume preservation.
//!
//! The cone fields are the constant cones of aperture `a` around the base
//! splitting `E^s + E^u`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DeformedMap, Dynamics, TorusPoint};
use crate::cones::{image_aperture_linear, sample_cone_plane, Cone, SplittingFrame};
use crate::error::{Error, Result};
use crate::linalg;
use crate::sampling;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    /// Required bound on cone-plane norms outside `V`.
    pub sigma: f64,
    /// Inside `V` the bound is `1 + delta0`.
    pub delta0: f64,
    /// Cone aperture `a`.
    pub aperture: f64,
    pub samples: usize,
    pub seed: u64,
    /// Random cone planes examined per sample point, besides the bundles themselves.
    pub planes_per_point: usize,
    pub det_tolerance: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { sigma: 0.6, delta0: 0.1, aperture: 0.05, samples: 10_000, seed: 0, planes_per_point: 8, det_tolerance: 1e-8 }
    }
}

/// Sup norms measured in one region (outside or inside `V`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionNorms {
    pub points: usize,
    /// `sup ||Df|P||` over sampled planes `P` in the cs cone.
    pub max_cs_norm: f64,
    /// `sup ||(Df|P)^{-1}||` over sampled planes `P` in the cu cone.
    pub max_cu_inverse_norm: f64,
    /// The same two sups restricted to the reference bundles themselves.
    pub bundle_cs_norm: f64,
    pub bundle_cu_inverse_norm: f64,
    pub bound: f64,
    pub pass: bool,
}

impl RegionNorms {
    fn empty(bound: f64) -> Self {
        Self {
            points: 0,
            max_cs_norm: 0.0,
            max_cu_inverse_norm: 0.0,
            bundle_cs_norm: 0.0,
            bundle_cu_inverse_norm: 0.0,
            bound,
            pass: true,
        }
    }

    pub fn margin(&self) -> f64 {
        self.max_cs_norm.max(self.max_cu_inverse_norm)
    }

    pub fn bundle_margin(&self) -> f64 {
        self.bundle_cs_norm.max(self.bundle_cu_inverse_norm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub options: VerifyOptions,
    /// Largest `a'/a` for `Df(C^cu_a(x)) ⊂ C^cu_{a'}(f x)`.
    pub cone_cu_ratio: f64,
    /// Largest `a'/a` for `Df^{-1}(C^cs_a(f x)) ⊂ C^cs_{a'}(x)`.
    pub cone_cs_ratio: f64,
    pub outside: RegionNorms,
    pub inside: RegionNorms,
    /// `max | |det Df| - 1 |`, reported for conservative maps.
    pub det_deviation: Option<f64>,
    pub checks: Vec<ConditionCheck>,
    pub pass: bool,
}

impl ConditionReport {
    /// Human-readable table of the checks.
    pub fn table(&self) -> String {
        let mut out = format!("{:<28} {:>14} {:>14}  {}\n", "condition", "measured", "bound", "result");
        for c in &self.checks {
            out.push_str(&format!(
                "{:<28} {:>14.6e} {:>14.6e}  {}\n",
                c.name,
                c.value,
                c.bound,
                if c.pass { "pass" } else { "FAIL" }
            ));
        }
        out
    }
}

struct SampleResult {
    inside: bool,
    cu_ratio: f64,
    cs_ratio: f64,
    cs_norm: f64,
    cu_inv: f64,
    bundle_cs: f64,
    bundle_cu_inv: f64,
    det_dev: f64,
}

fn sample_point(map: &DeformedMap, i: usize, rng: &mut impl Rng) -> (TorusPoint, bool) {
    let n = map.dim();
    let sites = map.sites();
    if i % 2 == 1 && !sites.is_empty() {
        let s = &sites[rng.gen_range(0..sites.len())];
        let v = sampling::in_ball(rng, n, s.radius);
        let x = s.center.translate(&v);
        let inside = map.in_perturbation(&x);
        return (x, inside);
    }
    loop {
        let x = sampling::uniform_point(rng, n);
        if !map.in_perturbation(&x) {
            return (x, false);
        }
    }
}

fn examine(
    map: &DeformedMap,
    reference: &SplittingFrame,
    x: &TorusPoint,
    opts: &VerifyOptions,
    rng: &mut impl Rng,
) -> Result<(f64, f64, f64, f64, f64, f64, f64)> {
    let j = map.jacobian(x);
    let jinv = j.clone().try_inverse().ok_or(Error::NanJacobian { step: 0 })?;
    let here = reference.relocated(x.clone());
    let there = reference.relocated(map.apply(x));
    let cu = Cone::cu(opts.aperture)?;
    let cs = Cone::cs(opts.aperture)?;
    let cu_ratio = image_aperture_linear(&j, &cu, &here, &there) / opts.aperture;
    let cs_ratio = image_aperture_linear(&jinv, &cs, &there, &here) / opts.aperture;
    let bundle_cs = if here.cs().ncols() > 0 { linalg::restriction(&j, here.cs()).norm } else { 0.0 };
    let bundle_cu_inv = if here.cu().ncols() > 0 { linalg::restriction(&j, here.cu()).inverse_norm() } else { 0.0 };
    let (mut cs_norm, mut cu_inv) = (bundle_cs, bundle_cu_inv);
    for p in 0..opts.planes_per_point {
        // most planes on the cone boundary, where the sup is typically attained
        let fraction = if p % 4 == 3 { rng.gen::<f64>() } else { 1.0 };
        if here.cs().ncols() > 0 {
            let plane = sample_cone_plane(&cs, &here, fraction, rng);
            cs_norm = cs_norm.max(linalg::restriction(&j, &plane).norm);
        }
        if here.cu().ncols() > 0 {
            let plane = sample_cone_plane(&cu, &here, fraction, rng);
            cu_inv = cu_inv.max(linalg::restriction(&j, &plane).inverse_norm());
        }
    }
    let det_dev = (j.determinant().abs() - 1.0).abs();
    Ok((cu_ratio, cs_ratio, cs_norm, cu_inv, bundle_cs, bundle_cu_inv, det_dev))
}

/// Samples half the points uniformly on `T^n \ V` and half uniformly in `V`
/// (all outside when `V` is empty) and checks every condition at each.
pub fn verify_map_conditions(map: &DeformedMap, opts: &VerifyOptions) -> Result<ConditionReport> {
    if !(opts.aperture > 0.0) {
        return Err(Error::Parameter { name: "aperture", reason: "must be positive".into() });
    }
    if opts.samples == 0 {
        return Err(Error::Parameter { name: "samples", reason: "at least one sample is required".into() });
    }
    let reference = SplittingFrame::reference(map, &TorusPoint::origin(map.dim()))?;
    let results: Vec<Result<SampleResult>> = (0..opts.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sampling::stream(opts.seed, i as u64);
            let (x, inside) = sample_point(map, i, &mut rng);
            let (cu_ratio, cs_ratio, cs_norm, cu_inv, bundle_cs, bundle_cu_inv, det_dev) = examine(map, &reference, &x, opts, &mut rng)?;
            Ok(SampleResult { inside, cu_ratio, cs_ratio, cs_norm, cu_inv, bundle_cs, bundle_cu_inv, det_dev })
        })
        .collect();
    let mut outside = RegionNorms::empty(opts.sigma);
    let mut inside = RegionNorms::empty(1.0 + opts.delta0);
    let (mut cone_cu_ratio, mut cone_cs_ratio, mut det_dev) = (0.0f64, 0.0f64, 0.0f64);
    for r in results {
        let r = r?;
        let region = if r.inside { &mut inside } else { &mut outside };
        region.points += 1;
        region.max_cs_norm = region.max_cs_norm.max(r.cs_norm);
        region.max_cu_inverse_norm = region.max_cu_inverse_norm.max(r.cu_inv);
        region.bundle_cs_norm = region.bundle_cs_norm.max(r.bundle_cs);
        region.bundle_cu_inverse_norm = region.bundle_cu_inverse_norm.max(r.bundle_cu_inv);
        cone_cu_ratio = cone_cu_ratio.max(r.cu_ratio);
        cone_cs_ratio = cone_cs_ratio.max(r.cs_ratio);
        det_dev = det_dev.max(r.det_dev);
    }
    for region in [&mut outside, &mut inside] {
        region.pass = region.margin() < region.bound;
    }
    let check = |name: &str, value: f64, bound: f64, strict: bool| ConditionCheck {
        name: name.to_string(),
        value,
        bound,
        pass: if strict { value < bound } else { value <= bound },
    };
    let mut checks = vec![
        check("cone_cu_invariance", cone_cu_ratio, 1.0, true),
        check("cone_cs_invariance", cone_cs_ratio, 1.0, true),
        check("outside_cs_norm", outside.max_cs_norm, outside.bound, true),
        check("outside_cu_inverse_norm", outside.max_cu_inverse_norm, outside.bound, true),
    ];
    if inside.points > 0 {
        checks.push(check("inside_cs_norm", inside.max_cs_norm, inside.bound, true));
        checks.push(check("inside_cu_inverse_norm", inside.max_cu_inverse_norm, inside.bound, true));
    }
    let det_deviation = map.conservative().then_some(det_dev);
    if let Some(d) = det_deviation {
        checks.push(check("volume_preservation", d, opts.det_tolerance, false));
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(ConditionReport { options: opts.clone(), cone_cu_ratio, cone_cs_ratio, outside, inside, det_deviation, checks, pass })
}

/// Largest uniform site strength in `[0, 1]` (to within `tolerance`) at which
/// [`verify_map_conditions`] still passes with the given options.
pub fn max_safe_strength(map: &DeformedMap, opts: &VerifyOptions, tolerance: f64) -> Result<f64> {
    let passes = |t: f64| -> Result<bool> { Ok(verify_map_conditions(&map.with_uniform_strength(t)?, opts)?.pass) };
    if !passes(0.0)? {
        return Err(Error::Parameter {
            name: "aperture",
            reason: "conditions fail for the undeformed map; no safe strength exists".into(),
        });
    }
    if passes(1.0)? {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        if passes(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `sup ||Df|P||` and `sup ||(Df|P)^{-1}||` over the cone planes sampled at the
/// single point `x` (used by the sensitivity report over apertures).
pub fn cone_plane_norms(map: &DeformedMap, x: &TorusPoint, aperture: f64, planes: usize, seed: u64) -> Result<(f64, f64)> {
    let opts = VerifyOptions { aperture, planes_per_point: planes, ..VerifyOptions::default() };
    let mut rng = sampling::stream(seed, 0);
    let reference = SplittingFrame::reference(map, x)?;
    let (_, _, cs, cu, _, _, _) = examine(map, &reference, x, &opts, &mut rng)?;
    Ok((cs, cu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{build_example, ExampleParams};
    use approx::assert_abs_diff_eq;

    fn mu() -> f64 {
        (3.0 + 5f64.sqrt()) / 2.0
    }

    fn quick(samples: usize) -> VerifyOptions {
        VerifyOptions { samples, ..VerifyOptions::default() }
    }

    #[test]
    fn undeformed_margins_match_eigenvalues() {
        let map = build_example(&ExampleParams::default()).unwrap();
        let r = verify_map_conditions(&map, &quick(400)).unwrap();
        assert!(r.pass, "{}", r.table());
        assert_abs_diff_eq!(r.outside.bundle_margin(), 1.0 / mu(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.inside.bundle_margin(), 1.0 / mu(), epsilon = 1e-12);
        assert!(r.det_deviation.unwrap() < 1e-12);
        assert!(r.cone_cu_ratio <= mu().powi(-2) * (1.0 + 1e-9));
    }

    #[test]
    fn over_strength_fails_inside() {
        let map = build_example(&ExampleParams::default()).unwrap().with_uniform_strength(1.0).unwrap();
        let r = verify_map_conditions(&map, &quick(400)).unwrap();
        assert!(!r.pass);
        assert!(r.outside.pass);
        assert!(!r.inside.pass);
        assert!(r.det_deviation.unwrap() < 1e-8);
    }

    #[test]
    fn wide_cones_fail_even_without_deformation() {
        let map = build_example(&ExampleParams::default()).unwrap();
        let r = verify_map_conditions(&map, &VerifyOptions { aperture: 0.2, ..quick(100) }).unwrap();
        // sup over cs-cone planes is about sqrt(mu^-2 + a^2 mu^4) > sigma
        assert!(!r.outside.pass);
    }

    #[test]
    fn safe_strength_is_consistent() {
        let map = build_example(&ExampleParams::default()).unwrap();
        let opts = quick(300);
        let t = max_safe_strength(&map, &opts, 1e-3).unwrap();
        assert!(t > 0.0 && t < 1.0, "t_max = {t}");
        assert!(verify_map_conditions(&map.with_uniform_strength(t).unwrap(), &opts).unwrap().pass);
    }
}
