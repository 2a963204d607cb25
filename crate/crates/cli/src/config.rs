//! Experiment configuration: one TOML document with top-level run settings,
//! an optional `[map]` table and one table per command.
//!
//! Every field has a default, so an empty document is a valid configuration
//! apart from the mandatory `seed`. Values given on the command line with
//! `--set section.key=value` are merged into the document before it is read.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toral_lab::torus::{DeformedMap, ExampleParams, MapSpec, MEASURED_MAX_STRENGTH};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("field `{field}`: {reason}")]
    Field { field: String, reason: String },

    #[error("cannot read `{path}`: {source}")]
    Read { path: PathBuf, source: std::io::Error },
}

impl ConfigError {
    pub fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Field { field: field.into(), reason: reason.into() }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Master seed; every random stream is derived from it.
    pub seed: Option<u64>,
    /// Worker threads; `None` uses one per core.
    pub threads: Option<usize>,
    /// Output directory.
    pub out: Option<PathBuf>,
    /// Inline map specification; the default deformed example when absent.
    pub map: Option<MapSpec>,
    /// TOML file holding a map specification, as an alternative to `[map]`.
    pub map_file: Option<PathBuf>,
    pub map_verify: MapVerifyConfig,
    pub lyapunov: LyapunovConfig,
    pub occupation: OccupationConfig,
    pub birkhoff: BirkhoffConfig,
    pub manifold: ManifoldConfig,
    pub density: DensityConfig,
    pub flatness: FlatnessConfig,
    pub srb: SrbConfig,
    pub ergodicity: ErgodicityConfig,
    pub holonomy: HolonomyConfig,
    pub distortion: DistortionConfig,
    pub scan: ScanConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapVerifyConfig {
    pub sigma: f64,
    pub delta0: f64,
    pub aperture: f64,
    pub samples: usize,
    pub planes_per_point: usize,
    pub det_tolerance: f64,
    /// Random points of the domination survey.
    pub domination_points: usize,
    /// Random cu-cone planes pushed forward to measure angle contraction.
    pub angle_samples: usize,
    /// Power-iteration length for the invariant splitting at each point.
    pub frame_steps: usize,
}

impl Default for MapVerifyConfig {
    fn default() -> Self {
        Self {
            sigma: 0.6,
            delta0: 0.1,
            aperture: 0.05,
            samples: 10_000,
            planes_per_point: 8,
            det_tolerance: 1e-8,
            domination_points: 10_000,
            angle_samples: 1000,
            frame_steps: 40,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovConfig {
    pub n: usize,
    /// Initial point; a seeded Lebesgue-random point when absent.
    pub start: Option<Vec<f64>>,
    /// Allowed deviation from the eigenvalue oracle (undeformed maps) or of
    /// the exponent sum from the mean log-determinant (deformed maps).
    pub tolerance: f64,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self { n: 100_000, start: None, tolerance: 1e-3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OccupationConfig {
    pub starts: usize,
    pub n: usize,
    /// The reported occupation fraction is this quantile over the starts.
    pub quantile: f64,
    /// Centre of the cu-disk used for the itinerary tails; the first site centre when absent.
    pub tail_center: Option<Vec<f64>>,
    pub tail_radius: f64,
    pub tail_epsilon: f64,
    pub tail_lengths: Vec<usize>,
    pub tail_samples: usize,
    /// The fitted log-tail slope must lie this many standard errors below zero.
    pub tail_sigmas: f64,
}

impl Default for OccupationConfig {
    fn default() -> Self {
        Self {
            starts: 1000,
            n: 10_000,
            quantile: 0.01,
            tail_center: None,
            tail_radius: 0.02,
            tail_epsilon: 0.9,
            tail_lengths: vec![10, 20, 40],
            tail_samples: 10_000,
            tail_sigmas: 3.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BirkhoffConfig {
    pub starts: usize,
    pub n: usize,
    /// `c0` and the occupation fraction are taken at this quantile over the starts.
    pub quantile: f64,
    pub sigma: f64,
    pub delta0: f64,
    /// Allowed shortfall of the measured rate below the occupation bound.
    pub margin: f64,
}

impl Default for BirkhoffConfig {
    fn default() -> Self {
        Self { starts: 1000, n: 100_000, quantile: 0.01, sigma: 0.6, delta0: 0.1, margin: 0.05 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManifoldConfig {
    /// Base point; a seeded Lebesgue-random point when absent.
    pub point: Option<Vec<f64>>,
    /// Radius of the stable patch.
    pub delta1: f64,
    /// Pull-backs used to build the patch.
    pub transforms: usize,
    /// Grid nodes per axis of every patch.
    pub resolution: usize,
    pub contraction_n: usize,
    pub contraction_samples: usize,
    /// `lambda_bar = (1 + c) sup ||Df|E^cs||`.
    pub c: f64,
    pub series_radius: f64,
    /// Slope of the initial cu graph.
    pub series_k0: f64,
    pub series_iterations: usize,
    pub plane_tolerance: f64,
    pub rate_tolerance: f64,
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        Self {
            point: None,
            delta1: 0.01,
            transforms: 12,
            resolution: 17,
            contraction_n: 50,
            contraction_samples: 100,
            c: 0.05,
            series_radius: 0.01,
            series_k0: 0.04,
            series_iterations: 20,
            plane_tolerance: 1e-10,
            rate_tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityConfig {
    /// Fixed point whose stable manifold is grown; the origin when absent.
    pub fixed_point: Option<Vec<f64>>,
    pub length: f64,
    pub resolution: f64,
    pub budget: usize,
    pub epsilon0: f64,
    pub trials: usize,
    pub min_fraction: f64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self { fixed_point: None, length: 6.0, resolution: 0.2, budget: 2_000_000, epsilon0: 0.4, trials: 100, min_fraction: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlatnessConfig {
    /// Disk centre; the origin when absent.
    pub center: Option<Vec<f64>>,
    pub radius: f64,
    /// Iterate counts compared; the largest area may not grow by more than
    /// `growth_tolerance` from the first to the last.
    pub lengths: Vec<usize>,
    pub cubes: usize,
    pub grid: usize,
    pub growth_tolerance: f64,
}

impl Default for FlatnessConfig {
    fn default() -> Self {
        Self { center: None, radius: 1e-4, lengths: vec![10, 15, 20], cubes: 100, grid: 48, growth_tolerance: 0.25 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrbConfig {
    pub disk_a: Vec<f64>,
    pub disk_b: Vec<f64>,
    pub radius: f64,
    pub n: usize,
    pub samples: usize,
    pub resamples: usize,
    /// Cells per axis of the two-dimensional marginals.
    pub grid: usize,
    pub observables: usize,
    /// Orbit length for the cs-Birkhoff terminal values of the final cloud.
    pub cloud_n: usize,
    pub cloud_fraction: f64,
}

impl Default for SrbConfig {
    fn default() -> Self {
        Self {
            disk_a: vec![0.13, 0.71, 0.37, 0.52],
            disk_b: vec![0.62, 0.21, 0.83, 0.05],
            radius: 0.02,
            n: 1000,
            samples: 10_000,
            resamples: 20,
            grid: 16,
            observables: 8,
            cloud_n: 10_000,
            cloud_fraction: 0.95,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErgodicityConfig {
    pub starts: usize,
    pub n: usize,
    pub observables: usize,
    /// Use one start for every orbit (a calibration run with zero dispersion).
    pub same_start: bool,
}

impl Default for ErgodicityConfig {
    fn default() -> Self {
        Self { starts: 100, n: 100_000, observables: 8, same_start: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HolonomyConfig {
    /// Source disk centre; the last site centre when absent.
    pub source_center: Option<Vec<f64>>,
    pub source_radius: f64,
    /// Grid points per axis on the source disk.
    pub grid: usize,
    /// Target basis is `E^cu + E^cs T` with `T` given row by row.
    pub target_tilt: Vec<Vec<f64>>,
    /// Target centre is the source centre plus `E^cs s`.
    pub target_shift: Vec<f64>,
    pub target_radius: f64,
    /// Sub-disk radii for the measure ratio, in the order compared.
    pub radii: Vec<f64>,
    pub subdisks: usize,
    pub max_drift: f64,
    pub min_match_fraction: f64,
    pub steps: usize,
    pub reach: f64,
    pub oracle_tolerance: f64,
}

impl Default for HolonomyConfig {
    fn default() -> Self {
        Self {
            source_center: None,
            source_radius: 0.006,
            grid: 61,
            target_tilt: vec![vec![0.05, 0.02], vec![-0.03, 0.04]],
            target_shift: vec![0.006, -0.004],
            target_radius: 0.02,
            radii: vec![0.002, 0.001, 0.0005],
            subdisks: 30,
            max_drift: 0.2,
            min_match_fraction: 0.9,
            steps: 16,
            reach: 0.05,
            oracle_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistortionConfig {
    pub pairs: usize,
    pub separation: f64,
    /// Pairs are seeded in the site balls and pulled back this many steps.
    pub lead: usize,
    pub n_max: usize,
    pub slope_bound: f64,
    /// Orbit length for the Hölder fit of the cu bundle along stable leaves.
    pub holder_n: usize,
    pub steps: usize,
}

impl Default for DistortionConfig {
    fn default() -> Self {
        Self { pairs: 100, separation: 0.01, lead: 2, n_max: 40, slope_bound: 0.01, holder_n: 40, steps: 16 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    /// Uniform site strengths; `0, 0.2, ..., 0.8` times the measured maximum
    /// when absent.
    pub strengths: Option<Vec<f64>>,
    pub samples: usize,
    pub starts: usize,
    pub n: usize,
    pub observables: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { strengths: None, samples: 10_000, starts: 100, n: 100_000, observables: 8 }
    }
}

impl ScanConfig {
    pub fn strengths(&self) -> Vec<f64> {
        self.strengths.clone().unwrap_or_else(|| [0.0, 0.2, 0.4, 0.6, 0.8].iter().map(|f| f * MEASURED_MAX_STRENGTH).collect())
    }
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn parse_value(value: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {value}")) {
        Ok(mut t) => t.remove("v").expect("key was just written"),
        Err(_) => toml::Value::String(value.to_string()),
    }
}

/// Sets `path` (dotted) in `table` to `value`, creating tables on the way.
pub fn set_path(table: &mut toml::Table, path: &str, value: &str) -> Result<()> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(ConfigError::field(path, "empty key in override"));
    }
    let mut current = table;
    for (i, key) in keys[..keys.len() - 1].iter().enumerate() {
        let entry = current.entry(key.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = entry.as_table_mut().ok_or_else(|| ConfigError::field(keys[..=i].join("."), "is not a table"))?;
    }
    current.insert(keys[keys.len() - 1].to_string(), parse_value(value));
    Ok(())
}

/// Parses a `key=value` override.
pub fn split_override(text: &str) -> Result<(&str, &str)> {
    text.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| ConfigError::field(text, "override must have the form key=value"))
}

impl Config {
    /// Reads a configuration table, applying `overrides` (dotted key, raw
    /// value) first. Relative `map_file` paths are resolved against `base_dir`.
    pub fn from_table(mut table: toml::Table, overrides: &[(String, String)], base_dir: Option<&Path>) -> Result<Self> {
        for (k, v) in overrides {
            set_path(&mut table, k, v)?;
        }
        let mut config: Config = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
            let path = e.path().to_string();
            let reason = e.into_inner().to_string();
            let reason = reason.lines().next().unwrap_or_default().to_string();
            ConfigError::field(if path == "." { "config".to_string() } else { path }, reason)
        })?;
        if let (Some(dir), Some(file)) = (base_dir, config.map_file.as_ref()) {
            if file.is_relative() {
                config.map_file = Some(dir.join(file));
            }
        }
        Ok(config)
    }

    pub fn from_toml_str(text: &str, overrides: &[(String, String)], base_dir: Option<&Path>) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::field("config", e.message().to_string()))?;
        Self::from_table(table, overrides, base_dir)
    }

    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.to_path_buf(), source })?;
                Self::from_toml_str(&text, overrides, p.parent())
            }
            None => Self::from_table(toml::Table::new(), overrides, None),
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| ConfigError::field("seed", "a master seed is required (set `seed` or pass --seed)"))
    }

    /// The map specification in force: `map_file`, else `[map]`, else the
    /// default deformed example.
    pub fn map_spec(&self) -> Result<MapSpec> {
        match (&self.map, &self.map_file) {
            (Some(_), Some(_)) => Err(ConfigError::field("map_file", "give either `map_file` or a `[map]` table, not both")),
            (Some(spec), None) => Ok(spec.clone()),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.clone(), source })?;
                MapSpec::from_toml_str(&text).map_err(|e| ConfigError::field("map_file", e.to_string()))
            }
            (None, None) => Ok(MapSpec::Example(ExampleParams::deformed())),
        }
    }

    pub fn build_map(&self) -> Result<DeformedMap> {
        let field = if self.map_file.is_some() { "map_file" } else { "map" };
        self.map_spec()?.build().map_err(|e| ConfigError::field(field, e.to_string()))
    }

    /// Range checks on the run settings and on the section of `command`.
    pub fn validate(&self, command: &str) -> Result<()> {
        self.seed()?;
        if self.threads == Some(0) {
            return Err(ConfigError::field("threads", "must be at least 1"));
        }
        let positive = |field: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::field(field, format!("must be positive and finite, got {v}")))
            }
        };
        let at_least = |field: &str, v: usize, min: usize| -> Result<()> {
            if v >= min {
                Ok(())
            } else {
                Err(ConfigError::field(field, format!("must be at least {min}, got {v}")))
            }
        };
        let fraction = |field: &str, v: f64| -> Result<()> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(ConfigError::field(field, format!("must lie in [0, 1], got {v}")))
            }
        };
        match command {
            "map-verify" => {
                let c = &self.map_verify;
                positive("map_verify.sigma", c.sigma)?;
                positive("map_verify.aperture", c.aperture)?;
                at_least("map_verify.samples", c.samples, 1)?;
                at_least("map_verify.domination_points", c.domination_points, 1)?;
                at_least("map_verify.frame_steps", c.frame_steps, 1)?;
            }
            "lyapunov" => {
                at_least("lyapunov.n", self.lyapunov.n, 100)?;
                positive("lyapunov.tolerance", self.lyapunov.tolerance)?;
            }
            "occupation" => {
                let c = &self.occupation;
                at_least("occupation.starts", c.starts, 1)?;
                at_least("occupation.n", c.n, 1)?;
                fraction("occupation.quantile", c.quantile)?;
                positive("occupation.tail_radius", c.tail_radius)?;
                fraction("occupation.tail_epsilon", c.tail_epsilon)?;
                at_least("occupation.tail_samples", c.tail_samples, 1000)?;
                if c.tail_lengths.len() < 2 || c.tail_lengths.contains(&0) {
                    return Err(ConfigError::field("occupation.tail_lengths", "need at least two positive lengths"));
                }
            }
            "birkhoff" => {
                let c = &self.birkhoff;
                at_least("birkhoff.starts", c.starts, 1)?;
                at_least("birkhoff.n", c.n, 1)?;
                fraction("birkhoff.quantile", c.quantile)?;
                positive("birkhoff.sigma", c.sigma)?;
            }
            "manifold" => {
                let c = &self.manifold;
                positive("manifold.delta1", c.delta1)?;
                at_least("manifold.transforms", c.transforms, 10)?;
                at_least("manifold.resolution", c.resolution, 2)?;
                at_least("manifold.contraction_n", c.contraction_n, 2)?;
                at_least("manifold.contraction_samples", c.contraction_samples, 1)?;
                positive("manifold.series_radius", c.series_radius)?;
                at_least("manifold.series_iterations", c.series_iterations, 1)?;
            }
            "density" => {
                let c = &self.density;
                positive("density.length", c.length)?;
                positive("density.resolution", c.resolution)?;
                positive("density.epsilon0", c.epsilon0)?;
                at_least("density.trials", c.trials, 1)?;
                fraction("density.min_fraction", c.min_fraction)?;
            }
            "flatness" => {
                let c = &self.flatness;
                positive("flatness.radius", c.radius)?;
                at_least("flatness.cubes", c.cubes, 1)?;
                at_least("flatness.grid", c.grid, 2)?;
                if c.lengths.is_empty() {
                    return Err(ConfigError::field("flatness.lengths", "need at least one length"));
                }
            }
            "srb" => {
                let c = &self.srb;
                positive("srb.radius", c.radius)?;
                at_least("srb.n", c.n, 1)?;
                at_least("srb.samples", c.samples, 1000)?;
                at_least("srb.grid", c.grid, 1)?;
                at_least("srb.cloud_n", c.cloud_n, 1)?;
                fraction("srb.cloud_fraction", c.cloud_fraction)?;
            }
            "ergodicity" => {
                at_least("ergodicity.starts", self.ergodicity.starts, 2)?;
                at_least("ergodicity.n", self.ergodicity.n, 1)?;
            }
            "holonomy" => {
                let c = &self.holonomy;
                positive("holonomy.source_radius", c.source_radius)?;
                positive("holonomy.target_radius", c.target_radius)?;
                at_least("holonomy.grid", c.grid, 2)?;
                at_least("holonomy.subdisks", c.subdisks, 1)?;
                if c.radii.is_empty() {
                    return Err(ConfigError::field("holonomy.radii", "need at least one radius"));
                }
                for &r in &c.radii {
                    if !(r > 0.0 && r < c.source_radius) {
                        return Err(ConfigError::field("holonomy.radii", format!("radius {r} must lie in (0, source_radius)")));
                    }
                }
            }
            "distortion" => {
                let c = &self.distortion;
                at_least("distortion.pairs", c.pairs, 1)?;
                positive("distortion.separation", c.separation)?;
                at_least("distortion.n_max", c.n_max, 4)?;
                at_least("distortion.holder_n", c.holder_n, 2)?;
            }
            "scan" => {
                let c = &self.scan;
                if c.strengths().iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                    return Err(ConfigError::field("scan.strengths", "strengths must be finite and non-negative"));
                }
                at_least("scan.starts", c.starts, 2)?;
                at_least("scan.n", c.n, 1)?;
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn overrides(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn empty_document_gives_defaults_and_the_deformed_map() {
        let c = Config::from_toml_str("seed = 1", &[], None).unwrap();
        assert_eq!(c.lyapunov.n, 100_000);
        assert_eq!(c.map_spec().unwrap(), MapSpec::Example(ExampleParams::deformed()));
        assert!(c.validate("lyapunov").is_ok());
    }

    #[test]
    fn overrides_are_typed_and_create_tables() {
        let c = Config::from_toml_str("", &overrides(&[("seed", "7"), ("srb.radius", "0.01"), ("map", "{kind = \"example\"}")]), None).unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.srb.radius, 0.01);
        assert_eq!(c.map_spec().unwrap(), MapSpec::Example(ExampleParams::default()));
    }

    #[test]
    fn later_overrides_win() {
        let c = Config::from_toml_str("seed = 1\n[ergodicity]\nn = 5\n", &overrides(&[("ergodicity.n", "6"), ("ergodicity.n", "8")]), None).unwrap();
        assert_eq!(c.ergodicity.n, 8);
    }

    #[test]
    fn errors_name_the_field() {
        let err = Config::from_toml_str("seed = 1\n[birkhoff]\nstarts = -3\n", &[], None).unwrap_err();
        assert!(err.to_string().contains("birkhoff.starts"), "{err}");
        let err = Config::from_toml_str("seed = 1\n[scan]\nstrenghts = [0.1]\n", &[], None).unwrap_err();
        assert!(err.to_string().contains("strenghts"), "{err}");
        let err = Config::from_toml_str("", &[], None).unwrap().validate("density").unwrap_err();
        assert!(err.to_string().contains("`seed`"), "{err}");
        let err = Config::from_toml_str("seed = 1\n[occupation]\ntail_lengths = [10]\n", &[], None).unwrap().validate("occupation").unwrap_err();
        assert!(err.to_string().contains("occupation.tail_lengths"), "{err}");
        assert!(split_override("srb.n").is_err());
        assert!(set_path(&mut toml::Table::new(), "a..b", "1").is_err());
    }

    #[test]
    fn scalar_in_the_way_of_a_table_is_reported() {
        let err = Config::from_toml_str("seed = 1\n", &overrides(&[("seed.x", "1")]), None).unwrap_err();
        assert!(err.to_string().contains("`seed`"), "{err}");
    }

    #[test]
    fn unparsable_values_become_strings() {
        assert_eq!(parse_value("0.5"), toml::Value::Float(0.5));
        assert_eq!(parse_value("[1, 2]"), toml::Value::Array(vec![toml::Value::Integer(1), toml::Value::Integer(2)]));
        assert_eq!(parse_value("runs/a"), toml::Value::String("runs/a".into()));
    }

    #[test]
    fn default_scan_strengths_stay_inside_the_measured_range() {
        let s = ScanConfig::default().strengths();
        assert_eq!(s.len(), 5);
        assert_eq!(s[0], 0.0);
        assert!(s.iter().all(|t| *t < MEASURED_MAX_STRENGTH));
    }
}
