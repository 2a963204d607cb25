use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::map::MAX_SITE_RADIUS;
use super::{torus_distance, DeformationSite, DeformedMap, LinearToralMap, SiteMode, TorusPoint};
use crate::error::{Error, Result};

/// Parameters of the default deformed example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExampleParams {
    pub n: usize,
    /// Integer base matrix; `None` selects [`default_matrix`].
    pub matrix: Option<Vec<Vec<i64>>>,
    /// Site radius `delta`.
    pub delta: f64,
    /// Allowed loss of hyperbolicity inside `V`.
    pub delta0: f64,
    /// Per-site strengths in `[0, 1]`; `None` means all zero.
    pub strengths: Option<Vec<f64>>,
    pub conservative: bool,
    /// Coefficient of the contracting term in dissipative mode.
    pub dissipation: f64,
    pub integrator_step: f64,
}

impl Default for ExampleParams {
    fn default() -> Self {
        Self {
            n: 4,
            matrix: None,
            delta: 0.05,
            delta0: 0.1,
            strengths: None,
            conservative: true,
            dissipation: 0.0,
            integrator_step: 0.02,
        }
    }
}

/// Largest uniform site strength for which the default example passes
/// [`verify_map_conditions`](super::verify_map_conditions) with the default
/// options, as found by [`max_safe_strength`](super::max_safe_strength) with
/// tolerance `1e-3` over 2000 samples.
pub const MEASURED_MAX_STRENGTH: f64 = 0.015625;

/// Strength of the default deformed map: half of [`MEASURED_MAX_STRENGTH`].
pub const DEFAULT_STRENGTH: f64 = MEASURED_MAX_STRENGTH / 2.0;

impl ExampleParams {
    /// The default example with every site at [`DEFAULT_STRENGTH`].
    pub fn deformed() -> Self {
        Self { strengths: Some(vec![DEFAULT_STRENGTH; 2]), ..Self::default() }
    }
}

/// The default deformed map (conservative, `T^4`, strength [`DEFAULT_STRENGTH`]).
pub fn default_deformed_map() -> Result<DeformedMap> {
    build_example(&ExampleParams::deformed())
}

/// `block-diag(C^m, C^{m-1}, ..., C)` on `T^{2m}` with `C = [[2,1],[1,1]]`.
///
/// For `n = 4` this is `block-diag(C^2, C)`: stable rates `mu^-2 < mu^-1` and
/// a two-dimensional unstable bundle.
pub fn default_matrix(n: usize) -> Result<Vec<Vec<i64>>> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::Unsupported(format!("no default matrix in odd dimension {n}; supply one")));
    }
    let m = n / 2;
    let mut rows = vec![vec![0i64; n]; n];
    for block in 0..m {
        let power = (m - block) as u32;
        // C^k = [[F(2k+1), F(2k)], [F(2k), F(2k-1)]] with Fibonacci numbers
        let fib = |k: u32| -> i64 {
            let (mut a, mut b) = (0i64, 1i64);
            for _ in 0..k {
                let t = a + b;
                a = b;
                b = t;
            }
            a
        };
        let o = 2 * block;
        rows[o][o] = fib(2 * power + 1);
        rows[o][o + 1] = fib(2 * power);
        rows[o + 1][o] = fib(2 * power);
        rows[o + 1][o + 1] = fib(2 * power - 1);
    }
    Ok(rows)
}

/// Builds the default experiment map.
///
/// Consecutive one-dimensional stable directions `E^s_i, E^s_{i+1}` (most
/// contracting first) each receive a flip site that weakens `E^s_{i+1}` toward
/// `1 + delta0`; when `dim E^u >= 2` a last site in the plane of the two weakest
/// unstable directions pushes the weakest one toward `1/(1 + delta0)`. Sites sit
/// at distinct non-zero fixed points of the base map; the origin is the
/// distinguished fixed point `q` and stays outside every site.
pub fn build_example(params: &ExampleParams) -> Result<DeformedMap> {
    let rows = match &params.matrix {
        Some(m) => m.clone(),
        None => default_matrix(params.n)?,
    };
    if rows.len() != params.n {
        return Err(Error::DimensionMismatch { expected: params.n, got: rows.len() });
    }
    if !(params.delta > 0.0 && params.delta <= MAX_SITE_RADIUS) {
        return Err(Error::Parameter { name: "delta", reason: format!("{} not in (0, {MAX_SITE_RADIUS}]", params.delta) });
    }
    if !(params.delta0 > 0.0 && params.delta0 <= 1.0) {
        return Err(Error::Parameter { name: "delta0", reason: format!("{} not in (0, 1]", params.delta0) });
    }
    let base = LinearToralMap::new(rows)?;
    let plan = site_plan(&base, params.delta0)?;
    let strengths = match &params.strengths {
        Some(s) if s.len() != plan.len() => {
            return Err(Error::Parameter {
                name: "strengths",
                reason: format!("expected {} values (one per site), got {}", plan.len(), s.len()),
            })
        }
        Some(s) => s.clone(),
        None => vec![0.0; plan.len()],
    };
    let centers = choose_centers(&base, plan.len(), params.delta)?;
    let sites = plan
        .into_iter()
        .zip(centers)
        .zip(strengths)
        .map(|(((mode, plane, rate), center), strength)| DeformationSite {
            center,
            radius: params.delta,
            plane,
            strength,
            mode,
            rate,
        })
        .collect();
    let dissipation = if params.conservative { 0.0 } else { params.dissipation };
    DeformedMap::new(base, sites, params.conservative, dissipation, params.integrator_step)
}

type PlannedSite = (SiteMode, [DVector<f64>; 2], f64);

fn site_plan(base: &LinearToralMap, delta0: f64) -> Result<Vec<PlannedSite>> {
    let stable: Vec<_> = base.eigen().stable().collect();
    let unstable: Vec<_> = base.eigen().unstable().collect();
    let line = |c: &super::EigenComponent| -> Result<DVector<f64>> {
        if c.basis.ncols() != 1 {
            return Err(Error::Unsupported(
                "the example construction needs simple real eigenvalues along the deformed directions".into(),
            ));
        }
        Ok(c.basis.column(0).into_owned())
    };
    let mut plan = Vec::new();
    for pair in stable.windows(2) {
        let (strong, weak) = (pair[0], pair[1]);
        let rate = ((1.0 + delta0) / weak.modulus).ln();
        plan.push((SiteMode::Flip, [line(weak)?, line(strong)?], rate));
    }
    if unstable.len() >= 2 {
        let (weak, next) = (unstable[0], unstable[1]);
        let rate = (weak.modulus * (1.0 + delta0)).ln();
        plan.push((SiteMode::UnstableFlip, [line(next)?, line(weak)?], rate));
    }
    Ok(plan)
}

fn choose_centers(base: &LinearToralMap, count: usize, delta: f64) -> Result<Vec<TorusPoint>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let q = TorusPoint::origin(base.dim());
    let mut chosen: Vec<TorusPoint> = Vec::new();
    for p in base.fixed_points()? {
        if torus_distance(&p, &q)? <= delta {
            continue;
        }
        let mut clear = true;
        for c in &chosen {
            if torus_distance(&p, c)? <= 2.0 * delta {
                clear = false;
                break;
            }
        }
        if clear {
            chosen.push(p);
            if chosen.len() == count {
                return Ok(chosen);
            }
        }
    }
    Err(Error::InvalidSites(format!(
        "only {} fixed points admit disjoint balls of radius {delta} avoiding q; {count} needed",
        chosen.len()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::Dynamics;
    use approx::assert_abs_diff_eq;

    #[test]
    fn default_matrix_blocks() {
        assert_eq!(default_matrix(2).unwrap(), vec![vec![2, 1], vec![1, 1]]);
        assert_eq!(
            default_matrix(4).unwrap(),
            vec![vec![5, 3, 0, 0], vec![3, 2, 0, 0], vec![0, 0, 2, 1], vec![0, 0, 1, 1]]
        );
        assert!(default_matrix(3).is_err());
    }

    #[test]
    fn default_sites() {
        let map = build_example(&ExampleParams::default()).unwrap();
        assert_eq!(map.sites().len(), 2);
        assert_eq!(map.sites()[0].mode, SiteMode::Flip);
        assert_eq!(map.sites()[1].mode, SiteMode::UnstableFlip);
        assert_eq!(map.sites()[0].center.as_slice(), &[0.2, 0.4, 0.0, 0.0]);
        assert_eq!(map.sites()[1].center.as_slice(), &[0.4, 0.8, 0.0, 0.0]);
        let mu = (3.0 + 5f64.sqrt()) / 2.0;
        assert_abs_diff_eq!(map.sites()[0].rate, (1.1 * mu).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(map.sites()[1].rate, (1.1 * mu).ln(), epsilon = 1e-12);
        assert!(!map.in_perturbation(&TorusPoint::origin(4)));
    }

    #[test]
    fn cat_map_has_no_sites() {
        let map = build_example(&ExampleParams { n: 2, ..ExampleParams::default() }).unwrap();
        assert!(map.sites().is_empty());
    }

    #[test]
    fn full_strength_center_eigenvalues() {
        let map = build_example(&ExampleParams { strengths: Some(vec![1.0, 1.0]), ..ExampleParams::default() }).unwrap();
        let mu = (3.0 + 5f64.sqrt()) / 2.0;
        let p = &map.sites()[0];
        let j = map.jacobian(&p.center);
        // the weak stable direction is stretched to 1 + delta0 (up to integrator error)
        assert_abs_diff_eq!((&j * &p.plane[0]).norm(), 1.1, epsilon = 1e-3);
        assert_abs_diff_eq!((&j * &p.plane[1]).norm(), mu.powi(-2) / (1.1 * mu), epsilon = 1e-3);
        let p = &map.sites()[1];
        let j = map.jacobian(&p.center);
        assert_abs_diff_eq!((&j * &p.plane[1]).norm(), 1.0 / 1.1, epsilon = 1e-3);
    }

    #[test]
    fn rejects_bad_parameters() {
        let bad = |p: ExampleParams| build_example(&p).is_err();
        assert!(bad(ExampleParams { delta: 0.3, ..ExampleParams::default() }));
        assert!(bad(ExampleParams { strengths: Some(vec![0.1]), ..ExampleParams::default() }));
        assert!(bad(ExampleParams { strengths: Some(vec![1.5, 0.0]), ..ExampleParams::default() }));
        assert!(bad(ExampleParams {
            matrix: Some(vec![vec![1, 1, 0, 0], vec![0, 1, 0, 0], vec![0, 0, 2, 1], vec![0, 0, 1, 1]]),
            ..ExampleParams::default()
        }));
    }
}
