//! JSON system block: either a preset name or explicit term tables.
//!
//! ```json
//! {"preset": "cubic_exchange", "d": [1.0, 0.1]}
//! {"m": 2, "d": [1, 1], "reactions": [[{"c": 1, "exp": [0, 3]}], [{"c": -1, "exp": [0, 3]}]],
//!  "isc_matrix": [[1, 0], [1, 1]], "r": 3, "ell": 3, "alpha": [1, 1], "k0": 0, "k1": 0}
//! ```

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Monomial, PolynomialKinetics, Preset, ReactionSystem};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemConfig {
    Preset(PresetConfig),
    Table(TableConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetConfig {
    pub preset: String,
    /// Overrides the preset's diffusion coefficients; for `heat` it also sets
    /// the species count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<f64>>,
    /// Exponent of `power_exchange`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub m: usize,
    pub d: Vec<f64>,
    pub reactions: Vec<Vec<Monomial>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isc_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<f64>,
}

impl SystemConfig {
    pub fn preset(name: &str) -> Self {
        SystemConfig::Preset(PresetConfig {
            preset: name.to_string(),
            d: None,
            r: None,
            alpha: None,
            k0: None,
            k1: None,
        })
    }

    pub fn build(&self) -> Result<ReactionSystem> {
        match self {
            SystemConfig::Preset(p) => p.build(),
            SystemConfig::Table(t) => t.build(),
        }
    }
}

fn cfg_err(e: Error) -> Error {
    match e {
        Error::InvalidInput(msg) => Error::Config(format!("system: {msg}")),
        other => other,
    }
}

impl PresetConfig {
    pub fn build(&self) -> Result<ReactionSystem> {
        let preset = match (Preset::from_name(&self.preset), self.preset.as_str()) {
            (Some(Preset::Heat { .. }), _) => Preset::Heat {
                species: self.d.as_ref().map_or(1, Vec::len).max(1),
            },
            (Some(Preset::PowerExchange { .. }), _) => Preset::PowerExchange {
                order: self.r.unwrap_or(3),
            },
            (Some(p), _) => p,
            (None, name) => {
                return Err(Error::Config(format!(
                    "system.preset: unknown preset \"{name}\" (known: {})",
                    Preset::NAMES.join(", ")
                )))
            }
        };
        if self.r.is_some() && !matches!(preset, Preset::PowerExchange { .. }) {
            return Err(Error::Config(format!(
                "system.r: only power_exchange takes an exponent, not \"{}\"",
                self.preset
            )));
        }
        let base = preset.build();
        let sys = match &self.d {
            Some(d) => ReactionSystem::new(base.name(), d.clone(), Arc::clone(base.kinetics()))
                .and_then(|s| s.with_isc(base.isc_matrix().to_vec(), base.isc_order()))
                .and_then(|s| s.with_growth_order(base.growth_order()))
                .and_then(|s| {
                    s.with_mass_control(base.mass_weights().to_vec(), base.k0(), base.k1())
                })
                .map_err(cfg_err)?,
            None => base,
        };
        if self.alpha.is_some() || self.k0.is_some() || self.k1.is_some() {
            let alpha = self
                .alpha
                .clone()
                .unwrap_or_else(|| sys.mass_weights().to_vec());
            let (k0, k1) = (self.k0.unwrap_or(sys.k0()), self.k1.unwrap_or(sys.k1()));
            return sys.with_mass_control(alpha, k0, k1).map_err(cfg_err);
        }
        Ok(sys)
    }
}

impl TableConfig {
    pub fn build(&self) -> Result<ReactionSystem> {
        if self.d.len() != self.m {
            return Err(Error::Config(format!(
                "system.d: expected {} entries, found {}",
                self.m,
                self.d.len()
            )));
        }
        if self.reactions.len() != self.m {
            return Err(Error::Config(format!(
                "system.reactions: expected {} species tables, found {}",
                self.m,
                self.reactions.len()
            )));
        }
        let poly = PolynomialKinetics::new(self.reactions.clone()).map_err(cfg_err)?;
        let ell = self
            .ell
            .unwrap_or_else(|| f64::from(poly.max_degree().max(1)));
        let mut sys = ReactionSystem::new("table", self.d.clone(), Arc::new(poly))
            .and_then(|s| s.with_growth_order(ell))
            .map_err(cfg_err)?;
        if self.isc_matrix.is_some() || self.r.is_some() {
            let matrix = self
                .isc_matrix
                .clone()
                .unwrap_or_else(|| sys.isc_matrix().to_vec());
            sys = sys
                .with_isc(matrix, self.r.unwrap_or(1.0))
                .map_err(cfg_err)?;
        }
        let alpha = self.alpha.clone().unwrap_or_else(|| vec![1.0; self.m]);
        sys.with_mass_control(alpha, self.k0.unwrap_or(0.0), self.k1.unwrap_or(0.0))
            .map_err(cfg_err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_preset_and_table() {
        let p: SystemConfig = serde_json::from_str(r#"{"preset":"cubic_exchange"}"#).unwrap();
        let sys = p.build().unwrap();
        assert_eq!(sys.name(), "cubic_exchange");
        assert_eq!(sys.diffusion(), &[1.0, 0.1]);

        let t: SystemConfig = serde_json::from_str(
            r#"{"m":2,"d":[1,0.5],"reactions":[[{"c":1,"exp":[0,3]},{"c":-1,"exp":[3,0]}],
                [{"c":-1,"exp":[0,3]},{"c":1,"exp":[3,0]}]],
                "isc_matrix":[[1,0],[1,1]],"r":3,"alpha":[1,1],"k0":0,"k1":0}"#,
        )
        .unwrap();
        let sys = t.build().unwrap();
        assert_eq!(sys.species(), 2);
        assert_eq!(sys.isc_order(), 3.0);
        assert_eq!(sys.growth_order(), 3.0);
        let mut f = [0.0; 2];
        sys.rates(0.0, 0.0, &[0.0, 2.0], &mut f);
        assert_eq!(f, [8.0, -8.0]);
    }

    #[test]
    fn table_defaults_to_identity_isc() {
        let t: SystemConfig =
            serde_json::from_str(r#"{"m":1,"d":[1],"reactions":[[{"c":1,"exp":[2]}]]}"#).unwrap();
        let sys = t.build().unwrap();
        assert_eq!(sys.isc_matrix(), &[vec![1.0]]);
    }

    #[test]
    fn heat_species_from_diffusion() {
        let p: SystemConfig = serde_json::from_str(r#"{"preset":"heat","d":[1,2,3]}"#).unwrap();
        assert_eq!(p.build().unwrap().species(), 3);
    }

    #[test]
    fn errors_name_the_field() {
        let p: SystemConfig = serde_json::from_str(r#"{"preset":"nope"}"#).unwrap();
        let msg = p.build().unwrap_err().to_string();
        assert!(msg.contains("system.preset"), "{msg}");

        let t: SystemConfig =
            serde_json::from_str(r#"{"m":2,"d":[1],"reactions":[[],[]]}"#).unwrap();
        assert!(t.build().unwrap_err().to_string().contains("system.d"));

        let p: SystemConfig =
            serde_json::from_str(r#"{"preset":"cubic_exchange","d":[1,-1]}"#).unwrap();
        assert!(p.build().is_err());
    }

    #[test]
    fn power_exchange_order() {
        let p: SystemConfig = serde_json::from_str(r#"{"preset":"power_exchange","r":2}"#).unwrap();
        let sys = p.build().unwrap();
        assert_eq!(sys.isc_order(), 2.0);
        let mut f = [0.0; 2];
        sys.rates(0.0, 0.0, &[1.0, 3.0], &mut f);
        assert_eq!(f, [8.0, -8.0]);
    }
}
