use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::patch::{Flavor, GraphPatch};
use crate::cones::{estimate_invariant_splitting, Bundle, SplittingFrame};
use crate::error::{Error, Result};
use crate::hyperbolicity::orbit_stats;
use crate::linalg;
use crate::sampling;
use crate::torus::{Dynamics, Inverse, LinearChart, TorusPoint};

/// Iteration cap for inverting `alpha`.
pub const MAX_INVERSION_ITERATIONS: usize = 100;

/// Outcome of one graph transform.
#[derive(Debug, Clone)]
pub struct TransformReport {
    pub patch: GraphPatch,
    /// `min |alpha(xi)|_inf / |xi|_inf` over the boundary of the input domain.
    pub gamma: f64,
    /// `k_out / k_in`, absent when the input graph is flat.
    pub theta: Option<f64>,
    /// Most quasi-Newton steps needed at any node.
    pub iterations: usize,
}

/// The image under `map` of the graph `patch`, written as a graph over the
/// same bundle of `target` (a frame at `f(base_point)`), on the domain cube of
/// radius `min(gamma * radius, max_radius)`.
///
/// Offsets are transported with [`Dynamics::displace`]; in the coordinates of
/// `target` the image of `xi + h(xi)` is `alpha(xi) + beta(xi)`, and the new
/// graph is `beta o alpha^{-1}`. `alpha` is inverted node by node with the
/// quasi-Newton step `xi <- xi + L^{-1}(target - alpha(xi))`, `L` being the
/// domain block of `Df` in the two frames.
pub fn graph_transform<M: Dynamics + ?Sized>(
    map: &M,
    patch: &GraphPatch,
    target: &SplittingFrame,
    max_radius: f64,
) -> Result<TransformReport> {
    let d = patch.domain_dim();
    if d == 0 {
        return Err(Error::Unsupported("graph over a zero-dimensional bundle".into()));
    }
    let bundle = patch.flavor().domain();
    if target.bundle(bundle).ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: target.bundle(bundle).ncols() });
    }
    if !(max_radius > 0.0) {
        return Err(Error::Parameter { name: "max_radius", reason: format!("must be positive, got {max_radius}") });
    }
    let x = patch.base_point().clone();
    let image = map.apply(&x);
    let frame_out = target.relocated(image);
    let r = patch.radius();

    let split = |w: &DVector<f64>| -> (DVector<f64>, DVector<f64>) {
        let (on, off) = frame_out.coefficient_blocks(bundle, &DMatrix::from_column_slice(w.len(), 1, w.as_slice()));
        (on.column(0).into_owned(), off.column(0).into_owned())
    };
    let clamp = |xi: &DVector<f64>| xi.map(|v| v.clamp(-r, r));
    let alpha_beta = |xi: &DVector<f64>| -> (DVector<f64>, DVector<f64>) {
        let v = patch.offset(&clamp(xi)).expect("clamped into the domain");
        split(&map.displace(&x, &v))
    };

    let (l, _) = frame_out.coefficient_blocks(bundle, &(map.jacobian(&x) * patch.domain_basis()));
    let l_inv = l.clone().try_inverse().ok_or(Error::IllConditioned { cond: f64::INFINITY })?;

    let mut gamma = f64::INFINITY;
    for i in 0..patch.node_count() {
        let xi = patch.node_coords(i);
        let size = xi.amax();
        if size >= r * (1.0 - 1e-12) {
            let (a, _) = alpha_beta(&xi);
            gamma = gamma.min(a.amax() / size);
        }
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::IllConditioned { cond: 1.0 / gamma });
    }
    let r_out = (gamma * r).min(max_radius);

    let shape = GraphPatch::zero(frame_out.clone(), patch.flavor(), r_out, patch.resolution())?;
    let tol = 1e-13 * r_out;
    let solved: Vec<Result<(Vec<f64>, usize)>> = (0..shape.node_count())
        .into_par_iter()
        .map(|i| {
            let target_xi = shape.node_coords(i);
            if target_xi.amax() == 0.0 {
                return Ok((vec![0.0; shape.codim()], 0));
            }
            let mut xi = &l_inv * &target_xi;
            let mut residual = f64::INFINITY;
            for it in 0..=MAX_INVERSION_ITERATIONS {
                let (a, b) = alpha_beta(&xi);
                let res = &target_xi - a;
                residual = res.amax();
                if residual <= tol {
                    if xi.amax() > r * (1.0 + 1e-9) {
                        break;
                    }
                    return Ok((b.iter().copied().collect(), it));
                }
                xi += &l_inv * res;
            }
            Err(Error::NoConvergence { iterations: MAX_INVERSION_ITERATIONS, residual })
        })
        .collect();
    let mut values = Vec::with_capacity(shape.node_count() * shape.codim());
    let mut iterations = 0;
    for s in solved {
        let (v, it) = s?;
        values.extend(v);
        iterations = iterations.max(it);
    }
    let out = shape.with_values(frame_out, r_out, values)?;
    let theta = (patch.k_bound() > 0.0).then(|| out.k_bound() / patch.k_bound());
    Ok(TransformReport { patch: out, gamma, theta, iterations })
}

/// Forward transform of a centre-unstable graph.
pub fn graph_transform_cu<M: Dynamics + ?Sized>(
    map: &M,
    patch: &GraphPatch,
    target: &SplittingFrame,
    max_radius: f64,
) -> Result<TransformReport> {
    if patch.flavor() != Flavor::CuGraph {
        return Err(Error::Parameter { name: "patch", reason: "expected a cu graph".into() });
    }
    graph_transform(map, patch, target, max_radius)
}

/// Backward transform of a centre-stable graph: `patch` sits at `x` and the
/// result is a graph over `E^cs` at `f^{-1}(x)` in the frame `target`.
pub fn graph_transform_cs<M: Dynamics + ?Sized>(
    map: &M,
    patch: &GraphPatch,
    target: &SplittingFrame,
    max_radius: f64,
) -> Result<TransformReport> {
    if patch.flavor() != Flavor::CsGraph {
        return Err(Error::Parameter { name: "patch", reason: "expected a cs graph".into() });
    }
    let swapped = patch.with_frame(patch.frame().swapped(), Flavor::CuGraph);
    let report = graph_transform(&Inverse(map), &swapped, &target.swapped(), max_radius)?;
    let out = report.patch.with_frame(report.patch.frame().swapped(), Flavor::CsGraph);
    Ok(TransformReport { patch: out, ..report })
}

/// The same set of points written as a graph over the corresponding bundle of
/// `frame` (which must sit at the same base point), with the largest domain
/// cube the change of frame allows.
pub fn rebase(patch: &GraphPatch, frame: &SplittingFrame) -> Result<GraphPatch> {
    let n = patch.base_point().dim();
    let u = patch.frame().cu().ncols();
    let identity = LinearChart::new(DMatrix::identity(n, n), u)?;
    let moved = frame.relocated(patch.base_point().clone());
    Ok(graph_transform(&identity, patch, &moved, f64::INFINITY)?.patch)
}

/// Result of the Hadamard construction of a local stable manifold.
#[derive(Debug, Clone)]
pub struct StableManifold {
    pub patch: GraphPatch,
    /// Sup distance between the constructions from `f^m(x)` and `f^{m-1}(x)`.
    pub settle_distance: f64,
    /// `gamma` and `k` of every pull-back, starting at `f^{m-1}(x)`.
    pub gammas: Vec<f64>,
    pub k_bounds: Vec<f64>,
}

/// Largest settle distance accepted by [`local_stable_manifold`].
pub const SETTLE_TOLERANCE: f64 = 1e-8;

/// Local centre-stable manifold of `x`: the flat cs-graph of radius `delta1` at
/// `f^m(x)` is pulled back `m` times with [`graph_transform_cs`] using the
/// invariant frames along the orbit. The construction is repeated from
/// `f^{m-1}(x)`; if the two results differ by more than
/// [`SETTLE_TOLERANCE`] the patch has not settled and an error is returned.
pub fn local_stable_manifold<M: Dynamics + ?Sized>(
    map: &M,
    x: &TorusPoint,
    delta1: f64,
    m: usize,
    resolution: usize,
) -> Result<StableManifold> {
    if m < 10 {
        return Err(Error::Parameter { name: "m", reason: format!("at least 10 transforms are required, got {m}") });
    }
    let frames = orbit_frames(map, x, m)?;
    let (chain, gammas, k_bounds) = pull_back_chain(map, &frames, delta1, resolution, 0)?;
    let (check, _, _) = pull_back_chain(map, &frames[..m], delta1, resolution, 0)?;
    let patch = chain.into_iter().next().expect("one patch is kept");
    let settle_distance = patch.sup_distance(&check[0]);
    if !(settle_distance <= SETTLE_TOLERANCE) {
        return Err(Error::PatchNotSettled { distance: settle_distance });
    }
    Ok(StableManifold { patch, settle_distance, gammas, k_bounds })
}

/// Pulls the flat cs graph at the last frame back to the first, keeping the
/// patches at frames `0..=keep`. Also returns `gamma` and `k` of every step.
fn pull_back_chain<M: Dynamics + ?Sized>(
    map: &M,
    frames: &[SplittingFrame],
    delta1: f64,
    resolution: usize,
    keep: usize,
) -> Result<(Vec<GraphPatch>, Vec<f64>, Vec<f64>)> {
    let last = frames.len() - 1;
    let mut patch = GraphPatch::zero(frames[last].clone(), Flavor::CsGraph, delta1, resolution)?;
    let mut kept = Vec::with_capacity(keep + 1);
    let (mut gammas, mut ks) = (Vec::new(), Vec::new());
    for j in (0..last).rev() {
        let report = graph_transform_cs(map, &patch, &frames[j], delta1)?;
        gammas.push(report.gamma);
        ks.push(report.patch.k_bound());
        patch = report.patch;
        if j <= keep {
            kept.push(patch.clone());
        }
    }
    if last == 0 {
        kept.push(patch);
    }
    kept.reverse();
    Ok((kept, gammas, ks))
}

/// Invariant frames at `x, f(x), ..., f^m(x)`.
pub fn orbit_frames<M: Dynamics + ?Sized>(map: &M, x: &TorusPoint, m: usize) -> Result<Vec<SplittingFrame>> {
    let mut points = vec![x.clone()];
    for j in 0..m {
        points.push(map.apply(&points[j]));
    }
    points.into_par_iter().map(|p| estimate_invariant_splitting(map, &p, FRAME_STEPS)).collect()
}

/// Extra orbit length beyond `n` used to build the stable patches.
pub const CHAIN_LEAD: usize = 20;

/// Power-iteration length used for frames along orbits.
pub const FRAME_STEPS: usize = 40;

/// Forward contraction measured on a cs patch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionReport {
    /// `max_y d(f^k x, f^k y) / d(x, y)` for `k = 0..=n`.
    pub max_ratio: Vec<f64>,
    /// `exp` of the least-squares slope of `ln max_ratio` over `k in [n/2, n]`.
    pub rate: Option<f64>,
    /// `sup ||Df|E^cs||` along the orbit of `x`.
    pub lambda: f64,
    /// `(1 + c) lambda`.
    pub lambda_bar: f64,
    pub samples: usize,
}

/// Samples `samples` points `y` of `patch` (a cs graph at `x`) and follows the
/// offsets `f^k y - f^k x` for `k <= n`.
///
/// Forward iteration of a stable offset amplifies rounding errors along the
/// unstable bundle, so after every step the offset is put back on the local
/// stable manifold of `f^{k+1}(x)` (a chain of patches obtained by pulling
/// back from `f^{n + CHAIN_LEAD}(x)`), keeping its cs coordinates.
pub fn contraction_verify<M: Dynamics + ?Sized>(
    map: &M,
    patch: &GraphPatch,
    n: usize,
    samples: usize,
    c: f64,
    seed: u64,
) -> Result<ContractionReport> {
    if patch.flavor() != Flavor::CsGraph {
        return Err(Error::Parameter { name: "patch", reason: "expected a cs graph".into() });
    }
    let x = patch.base_point().clone();
    let d = patch.domain_dim();
    let offsets: Vec<DVector<f64>> = (0..samples)
        .map(|i| {
            let mut rng = sampling::stream(seed, i as u64);
            let xi = DVector::from_fn(d, |_, _| rand::Rng::gen_range(&mut rng, -1.0..=1.0) * patch.radius());
            patch.offset(&xi).expect("sampled in the domain")
        })
        .filter(|v| v.norm() > 0.0)
        .collect();
    let frames = orbit_frames(map, &x, n + CHAIN_LEAD)?;
    let orbit: Vec<TorusPoint> = frames.iter().map(|f| f.point().clone()).collect();
    let (chain, _, _) = pull_back_chain(map, &frames, patch.radius(), patch.resolution(), n)?;
    let ratios: Vec<Vec<f64>> = offsets
        .par_iter()
        .map(|v0| {
            let base = v0.norm();
            let mut v = v0.clone();
            let mut out = vec![1.0];
            for k in 0..n {
                v = map.displace(&orbit[k], &v);
                let leaf = &chain[k + 1];
                let (xi, _) = leaf.frame().coefficient_blocks(Bundle::CenterStable, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()));
                if let Some(w) = leaf.offset(&xi.column(0).into_owned()) {
                    v = w;
                }
                out.push(v.norm() / base);
            }
            out
        })
        .collect();
    let max_ratio: Vec<f64> = (0..=n).map(|k| ratios.iter().map(|r| r[k]).fold(if k == 0 { 1.0 } else { 0.0 }, f64::max)).collect();
    let rate = if n >= 2 {
        let ks: Vec<f64> = (n / 2..=n).map(|k| k as f64).collect();
        let logs: Vec<f64> = (n / 2..=n).map(|k| max_ratio[k].ln()).collect();
        Some(crate::stats::fit_line(&ks, &logs, None, 2)?.slope.exp())
    } else {
        None
    };
    let stats = orbit_stats(map, &x, n.max(1))?;
    let lambda = stats.log_cs_norm.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)).exp();
    Ok(ContractionReport { max_ratio, rate, lambda, lambda_bar: (1.0 + c) * lambda, samples: offsets.len() })
}

/// Slopes and domain growth of repeated forward cu-transforms along an orbit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformSeries {
    pub k_bounds: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Largest `k_{i+1} / k_i` among steps whose input slope exceeds the floor.
    pub theta: f64,
    pub gamma: f64,
    /// `(1 + c) sup ||Df|E^cs||` along the same orbit segment.
    pub lambda_bar: f64,
}

/// Slopes below this are treated as discretization noise when measuring `theta`.
pub const SLOPE_FLOOR: f64 = 1e-9;

/// Starts from the linear cu graph `h(xi) = k0 P xi` at `x`, with `P` a fixed
/// unit-norm map between the bundles, and applies `iterations` forward
/// transforms with the invariant frames along the orbit.
pub fn transform_series<M: Dynamics + ?Sized>(
    map: &M,
    x: &TorusPoint,
    radius: f64,
    k0: f64,
    iterations: usize,
    c: f64,
    resolution: usize,
) -> Result<TransformSeries> {
    let frames = orbit_frames(map, x, iterations)?;
    let d = frames[0].cu().ncols();
    let s = frames[0].cs().ncols();
    let p = DMatrix::from_fn(s, d, |i, j| if i == j { 1.0 } else { 0.0 });
    let p = if p.norm() > 0.0 { &p / linalg::extreme_singular_values(&p).0 } else { p };
    let mut patch = GraphPatch::from_fn(frames[0].clone(), Flavor::CuGraph, radius, resolution, |xi| k0 * (&p * xi))?;
    let mut k_bounds = vec![patch.k_bound()];
    let mut gammas = Vec::new();
    let mut theta: f64 = 0.0;
    for frame in &frames[1..] {
        let report = graph_transform_cu(map, &patch, frame, radius)?;
        if patch.k_bound() > SLOPE_FLOOR {
            theta = theta.max(report.theta.unwrap_or(0.0));
        }
        gammas.push(report.gamma);
        k_bounds.push(report.patch.k_bound());
        patch = report.patch;
    }
    let stats = orbit_stats(map, x, iterations.max(1))?;
    let lambda = stats.log_cs_norm.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)).exp();
    let gamma = gammas.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(TransformSeries { k_bounds, gammas, theta, gamma, lambda_bar: (1.0 + c) * lambda })
}
