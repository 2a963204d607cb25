//! Text serialization of map specifications.
//!
//! ```toml
//! kind = "example"
//! n = 4
//! delta = 0.05
//! delta0 = 0.1
//! strengths = [0.3, 0.3]
//! conservative = true
//! ```
//!
//! or, with every site spelled out,
//!
//! ```toml
//! kind = "explicit"
//! matrix = [[2, 1], [1, 1]]
//! conservative = true
//! integrator_step = 0.02
//! [[sites]]
//! center = [0.2, 0.4, 0.0, 0.0]
//! ...
//! ```

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{build_example, DeformationSite, DeformedMap, ExampleParams, LinearToralMap, SiteMode, TorusPoint};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Two orthonormal vectors spanning the deformation plane.
    pub plane: [Vec<f64>; 2],
    pub strength: f64,
    pub mode: SiteMode,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapSpec {
    Example(ExampleParams),
    Explicit {
        matrix: Vec<Vec<i64>>,
        #[serde(default)]
        sites: Vec<SiteSpec>,
        #[serde(default = "default_true")]
        conservative: bool,
        #[serde(default)]
        dissipation: f64,
        #[serde(default = "default_step")]
        integrator_step: f64,
    },
}

fn default_true() -> bool {
    true
}

fn default_step() -> f64 {
    0.02
}

impl Default for MapSpec {
    fn default() -> Self {
        MapSpec::Example(ExampleParams::default())
    }
}

impl MapSpec {
    pub fn build(&self) -> Result<DeformedMap> {
        match self {
            MapSpec::Example(p) => build_example(p),
            MapSpec::Explicit { matrix, sites, conservative, dissipation, integrator_step } => {
                let base = LinearToralMap::new(matrix.clone())?;
                let sites = sites
                    .iter()
                    .map(|s| {
                        Ok(DeformationSite {
                            center: TorusPoint::new(s.center.clone())?,
                            radius: s.radius,
                            plane: [DVector::from_vec(s.plane[0].clone()), DVector::from_vec(s.plane[1].clone())],
                            strength: s.strength,
                            mode: s.mode,
                            rate: s.rate,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                DeformedMap::new(base, sites, *conservative, *dissipation, *integrator_step)
            }
        }
    }

    /// Explicit specification reproducing `map` exactly.
    pub fn from_map(map: &DeformedMap) -> Self {
        MapSpec::Explicit {
            matrix: map.base().rows().to_vec(),
            sites: map
                .sites()
                .iter()
                .map(|s| SiteSpec {
                    center: s.center.as_slice().to_vec(),
                    radius: s.radius,
                    plane: [s.plane[0].as_slice().to_vec(), s.plane[1].as_slice().to_vec()],
                    strength: s.strength,
                    mode: s.mode,
                    rate: s.rate,
                })
                .collect(),
            conservative: map.conservative(),
            dissipation: map.dissipation(),
            integrator_step: map.integrator_step(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Short content hash of a built map: the first 16 hex digits of the SHA-256 of
/// its explicit specification in JSON.
pub fn map_hash(map: &DeformedMap) -> String {
    let json = serde_json::to_string(&MapSpec::from_map(map)).expect("map specs serialize");
    let digest = Sha256::digest(json.as_bytes());
    hex::encode(digest)[..16].to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::Dynamics;

    #[test]
    fn example_round_trip() {
        let text = "kind = \"example\"\nn = 4\nstrengths = [0.25, 0.5]\n";
        let spec = MapSpec::from_toml_str(text).unwrap();
        let map = spec.build().unwrap();
        assert_eq!(map.sites()[1].strength, 0.5);
        let again = MapSpec::from_toml_str(&spec.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, spec);
    }

    #[test]
    fn explicit_round_trip_is_exact() {
        let map = MapSpec::from_toml_str("kind = \"example\"\nstrengths = [0.3, 0.7]\n").unwrap().build().unwrap();
        let spec = MapSpec::from_map(&map);
        let text = spec.to_toml_string().unwrap();
        let rebuilt = MapSpec::from_toml_str(&text).unwrap().build().unwrap();
        assert_eq!(map_hash(&map), map_hash(&rebuilt));
        let x = TorusPoint::new(vec![0.21, 0.39, 0.01, 0.02]).unwrap();
        assert_eq!(map.apply(&x), rebuilt.apply(&x));
    }

    #[test]
    fn hash_distinguishes_strengths() {
        let a = MapSpec::default().build().unwrap();
        let b = a.with_uniform_strength(0.1).unwrap();
        assert_ne!(map_hash(&a), map_hash(&b));
        assert_eq!(map_hash(&a).len(), 16);
    }

    #[test]
    fn unknown_fields_and_kinds_are_rejected() {
        assert!(MapSpec::from_toml_str("kind = \"example\"\nsize = 3\n").is_err());
        assert!(MapSpec::from_toml_str("kind = \"other\"\n").is_err());
        assert!(MapSpec::from_toml_str("kind = \"explicit\"\nmatrix = [[1, 1], [0, 1]]\n").unwrap().build().is_err());
    }
}
