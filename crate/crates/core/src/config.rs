//! Flat JSON run configuration: strict parsing (unknown and duplicate keys
//! rejected), defaults recorded, and revalidation of every geometric and
//! numerical constraint the modules rely on.

use crate::error::{Error, Result};
use crate::kawasaki::{JumpProfile, ProfileKind};
use crate::potential::PairPotential;
use crate::space::PeriodicBox;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dim: usize,
    pub side: f64,
    /// "zero", "smooth-bump" or "soft-core"
    pub potential: String,
    pub beta: f64,
    pub phi_range: f64,
    pub z: f64,
    /// "indicator" or "bump"
    pub profile: String,
    pub jump_radius: f64,
    pub eps: f64,
    /// scale grid for the convergence study; empty means the default grid
    pub eps_grid: Vec<f64>,
    pub s: f64,
    pub t_max: f64,
    pub dt: f64,
    pub time_scaling: bool,
    pub obs_interval: f64,
    pub n_samples: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// quadrature nodes per axis for generator evaluation
    pub nodes: usize,
    pub seed: u64,
    /// Monte Carlo points per sample for identity right-hand sides
    pub gnz_probes: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            side: 10.0,
            potential: "zero".into(),
            beta: 1.0,
            phi_range: 1.0,
            z: 1.0,
            profile: "indicator".into(),
            jump_radius: 1.0,
            eps: 0.1,
            eps_grid: vec![],
            s: 0.5,
            t_max: 1.0,
            dt: 0.01,
            time_scaling: true,
            obs_interval: 0.1,
            n_samples: 1000,
            burn_in: 1000,
            thin: 5,
            nodes: 16,
            seed: 0,
            gnz_probes: 32,
        }
    }
}

impl RunConfig {
    pub fn boxx(&self) -> Result<PeriodicBox> {
        PeriodicBox::new(self.dim, self.side)
    }

    pub fn pair_potential(&self) -> Result<PairPotential> {
        let phi = PairPotential::by_name(&self.potential, self.beta, self.phi_range)?;
        if phi.range() > self.side / 2.0 {
            return Err(Error::Config(format!(
                "phi_range {} violates phi_range <= side/2 = {}",
                phi.range(),
                self.side / 2.0
            )));
        }
        Ok(phi)
    }

    pub fn jump_profile(&self) -> Result<JumpProfile> {
        let kind = match self.profile.as_str() {
            "indicator" => ProfileKind::Indicator,
            "bump" => ProfileKind::Bump,
            other => return Err(Error::Config(format!("unknown profile {other:?}"))),
        };
        JumpProfile::new(kind, self.jump_radius, self.dim)
    }

    pub fn effective_eps_grid(&self) -> Vec<f64> {
        if self.eps_grid.is_empty() {
            vec![0.2, 0.1, 0.05, 0.025]
        } else {
            self.eps_grid.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.boxx()?;
        self.pair_potential()?;
        self.jump_profile()?;
        let half = self.side / 2.0;
        for &eps in std::iter::once(&self.eps).chain(&self.effective_eps_grid()) {
            if !(eps > 0.0) {
                return Err(Error::Config(format!("eps {eps} must be > 0")));
            }
            if eps * self.jump_radius > half {
                return Err(Error::Config(format!(
                    "eps {} violates eps * jump_radius <= side/2 = {half}",
                    eps
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.s) {
            return Err(Error::Config(format!("s = {} must lie in [0, 1]", self.s)));
        }
        if !(self.z > 0.0) {
            return Err(Error::Config(format!("z = {} must be > 0", self.z)));
        }
        if !(self.dt > 0.0) || !(self.t_max >= 0.0) || !(self.obs_interval > 0.0) {
            return Err(Error::Config(format!(
                "need dt > 0, t_max >= 0, obs_interval > 0; got {}, {}, {}",
                self.dt, self.t_max, self.obs_interval
            )));
        }
        if self.n_samples == 0 || self.gnz_probes == 0 {
            return Err(Error::Config(
                "n_samples and gnz_probes must be >= 1".into(),
            ));
        }
        if self.nodes < 8 {
            return Err(Error::Config(format!(
                "nodes = {} must be >= 8 per axis",
                self.nodes
            )));
        }
        Ok(())
    }
}

/// Reject duplicate top-level keys, which serde would otherwise silently
/// collapse to the last occurrence.
fn check_duplicate_keys(text: &str) -> Result<()> {
    use serde::de::{DeserializeSeed, IgnoredAny, MapAccess, Visitor};
    use std::fmt;

    struct KeyCollector;
    impl<'de> Visitor<'de> for KeyCollector {
        type Value = Vec<String>;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            write!(f, "a flat JSON object")
        }
        fn visit_map<A: MapAccess<'de>>(
            self,
            mut map: A,
        ) -> std::result::Result<Self::Value, A::Error> {
            let mut keys = Vec::new();
            while let Some(k) = map.next_key::<String>()? {
                map.next_value::<IgnoredAny>()?;
                keys.push(k);
            }
            Ok(keys)
        }
    }

    struct MapOnly;
    impl<'de> DeserializeSeed<'de> for MapOnly {
        type Value = Vec<String>;
        fn deserialize<D: serde::Deserializer<'de>>(
            self,
            de: D,
        ) -> std::result::Result<Self::Value, D::Error> {
            de.deserialize_map(KeyCollector)
        }
    }

    let mut de = serde_json::Deserializer::from_str(text);
    let keys = MapOnly.deserialize(&mut de)?;
    let mut seen = std::collections::HashSet::new();
    for k in keys {
        if !seen.insert(k.clone()) {
            return Err(Error::Config(format!("duplicate key {k:?}")));
        }
    }
    Ok(())
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    check_duplicate_keys(text)?;
    let cfg: RunConfig = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("invalid config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config_str("{}").unwrap();
        assert_eq!(cfg.dim, 1);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.effective_eps_grid(), vec![0.2, 0.1, 0.05, 0.025]);
    }

    #[test]
    fn unknown_key_named_in_error() {
        let err = parse_config_str(r#"{"sid": 5.0}"#).unwrap_err();
        assert!(err.to_string().contains("sid"), "{err}");
    }

    #[test]
    fn duplicate_key_rejected() {
        let err = parse_config_str(r#"{"z": 1.0, "z": 2.0}"#).unwrap_err();
        assert!(err.to_string().contains("duplicate key"), "{err}");
    }

    #[test]
    fn oversized_jump_reach_rejected_with_constraint_named() {
        let err =
            parse_config_str(r#"{"side": 4.0, "eps": 3.0, "jump_radius": 1.0}"#).unwrap_err();
        assert!(
            err.to_string().contains("eps * jump_radius <= side/2"),
            "{err}"
        );
    }

    #[test]
    fn bad_potential_range_rejected() {
        let err = parse_config_str(r#"{"side": 4.0, "potential": "smooth-bump", "phi_range": 3.0}"#)
            .unwrap_err();
        assert!(err.to_string().contains("phi_range <= side/2"), "{err}");
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back = parse_config_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }
}
