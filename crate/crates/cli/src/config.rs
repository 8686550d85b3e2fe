use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use treebolic::geometry::{Node, Params};
use treebolic::kernels::BoundaryParamWire;
use treebolic::simulate::{SimConfig, Simulator, StripDomain};

/// Everything a run depends on. Parsed from a JSON file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: Params<f64>,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub grid: GridSection,
    /// Kernels checked by `harmonicity`; a default set is used when empty.
    #[serde(default)]
    pub kernels: Vec<BoundaryParamWire>,
    /// Boundary data for `dirichlet-compare`, given as the kernel whose lift is used.
    #[serde(default)]
    pub data: Option<BoundaryParamWire>,
    /// Half-widths r for `exit-tails`.
    #[serde(default)]
    pub radii: Vec<f64>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    /// Euler step; (ln q)²/100 when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub line_tol: Option<f64>,
    #[serde(default)]
    pub max_steps: Option<u64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_n")]
    pub n: usize,
}

fn default_seed() -> u64 {
    1
}
fn default_replicas() -> usize {
    16
}
fn default_n() -> usize {
    10_000
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection { dt: None, line_tol: None, max_steps: None, seed: default_seed(), replicas: default_replicas(), n: default_n() }
    }
}

/// A subtree (`vertices`), a ball (`radius` around `center`) or the star of
/// `center`, optionally cut to |x| < r.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    #[serde(default)]
    pub center: Option<Node>,
    #[serde(default)]
    pub radius: Option<u32>,
    #[serde(default)]
    pub vertices: Option<Vec<Node>>,
    #[serde(default)]
    pub r: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Coarsest grid; each refinement level doubles both.
    pub nx: usize,
    pub nu: usize,
    pub levels: usize,
    pub tol: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { nx: 24, nu: 4, levels: 4, tol: 1e-10 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub sigma: f64,
    pub chi_square_p: f64,
    pub r_squared: f64,
    /// Accepted band around 4 for successive FD error ratios.
    pub ratio_band: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { sigma: 3.0, chi_square_p: 1e-3, r_squared: 0.9, ratio_band: 0.5 }
    }
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sim.n == 0 || self.sim.replicas == 0 {
            bail!("sim.n and sim.replicas must be positive");
        }
        if self.grid.nx < 2 || self.grid.nu < 2 || self.grid.levels == 0 {
            bail!("grid needs nx >= 2, nu >= 2 and at least one level");
        }
        if self.radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            bail!("radii must be positive");
        }
        self.sim_config().validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn sim_config(&self) -> SimConfig<f64> {
        let mut cfg = SimConfig::for_params(&self.params).with_seed(self.sim.seed);
        if let Some(dt) = self.sim.dt {
            cfg = cfg.with_dt(dt);
        }
        if let Some(t) = self.sim.line_tol {
            cfg.line_tol = t;
        }
        if let Some(m) = self.sim.max_steps {
            cfg.max_steps = m;
        }
        cfg
    }

    pub fn simulator(&self) -> Result<Simulator<f64>> {
        Ok(Simulator::new(self.params, self.sim_config())?)
    }

    /// The configured domain, or the star of o cut at `default_r`.
    pub fn domain_or(&self, default_r: Option<f64>) -> Result<StripDomain<f64>> {
        let spec = self.domain.clone().unwrap_or_default();
        let center = spec.center.unwrap_or_else(Node::root);
        let p = self.params.p();
        let mut d = match (&spec.vertices, spec.radius) {
            (Some(vs), _) => StripDomain::subtree(vs.iter().cloned(), p)?,
            (None, Some(k)) => StripDomain::ball(&center, k, p)?,
            (None, None) => StripDomain::star(center),
        };
        if let Some(r) = spec.r.or(default_r) {
            d = d.with_x_bound(r)?;
        }
        Ok(d)
    }

    pub fn center(&self) -> Node {
        self.domain.as_ref().and_then(|d| d.center.clone()).unwrap_or_else(Node::root)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"params":{"q":2,"p":2,"alpha":1,"beta":1}}"#).unwrap();
        assert_eq!(cfg.sim.replicas, 16);
        assert_eq!(cfg.thresholds.sigma, 3.0);
        cfg.validate().unwrap();
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn hash_tracks_content() {
        let mut cfg: ExperimentConfig = serde_json::from_str(r#"{"params":{"q":2,"p":2,"alpha":1,"beta":1}}"#).unwrap();
        let h = cfg.hash();
        cfg.sim.seed = 2;
        assert_ne!(h, cfg.hash());
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"params":{"q":2,"p":2,"alpha":1,"beta":1},"x":1}"#).is_err());
    }
}
