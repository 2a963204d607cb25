//! Local invariant manifolds: graph patches and the graph transform, stable
//! manifolds by the Hadamard construction, grown unstable manifolds of a fixed
//! point, their density, and dynamical flatness.

mod patch;
mod transform;
mod unstable;

pub use patch::{Flavor, GraphPatch, DEFAULT_RESOLUTION};
pub use transform::{
    contraction_verify, graph_transform, graph_transform_cs, graph_transform_cu, local_stable_manifold, orbit_frames,
    rebase, transform_series, ContractionReport, CHAIN_LEAD, StableManifold, TransformReport, TransformSeries, FRAME_STEPS,
    MAX_INVERSION_ITERATIONS, SETTLE_TOLERANCE, SLOPE_FLOOR,
};
pub use unstable::{
    density_check, dynamical_flatness, grow_unstable_manifold, transverse_gaps, CurveSegment, DensityReport,
    FlatnessReport, GrowOptions,
};
