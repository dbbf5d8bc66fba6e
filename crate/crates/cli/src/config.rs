//! JSON run, verification, and scan configurations.
//!
//! ```json
//! {"grid": {"L": 1, "n": 401},
//!  "system": {"preset": "cubic_exchange"},
//!  "solver": {"dt": 1e-3, "scheme": "backward_euler", "T": 10, "snapshot_stride": 20},
//!  "initial": {"kind": "random_cosine", "max": 1},
//!  "seed": 7}
//! ```

use std::path::Path;

use anyhow::{bail, Context, Result};
use rd_core::grid::Grid1D;
use rd_core::inequalities::{EnsembleSpec, InequalityId};
use rd_core::morrey::HolderConfig;
use rd_core::solver::{InitialData, Scheme, SolverConfig};
use rd_core::systems::SystemConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub length: f64,
    pub n: usize,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid1D> {
        Grid1D::new(self.length, self.n).context("grid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(rename = "T")]
    pub t_end: f64,
    /// Initial step; also the step cap unless `dt_max` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_max: Option<f64>,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl_reaction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blowup_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positivity_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub output_times: Vec<f64>,
}

impl SolverSection {
    pub fn build(&self) -> Result<SolverConfig> {
        let d = SolverConfig::default();
        let dt_initial = self.dt.unwrap_or(d.dt_initial);
        let cfg = SolverConfig {
            dt_initial,
            dt_min: self.dt_min.unwrap_or(d.dt_min.min(dt_initial)),
            dt_max: self.dt_max.unwrap_or(if self.dt.is_some() {
                dt_initial
            } else {
                d.dt_max
            }),
            cfl_reaction: self.cfl_reaction.unwrap_or(d.cfl_reaction),
            scheme: self.scheme,
            blowup_threshold: self.blowup_threshold.unwrap_or(d.blowup_threshold),
            snapshot_stride: self.snapshot_stride.unwrap_or(d.snapshot_stride),
            positivity_tolerance: self.positivity_tolerance.unwrap_or(d.positivity_tolerance),
            output_times: self.output_times.clone(),
        };
        cfg.validate().context("solver")?;
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            bail!("solver.T: must be positive and finite, got {}", self.t_end);
        }
        Ok(cfg)
    }
}

/// Diagnostic options carried with a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Energy exponent.
    pub p: u32,
    /// Energy weights; defaults to all ones.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    pub alpha_trial: f64,
    /// Start of the window for `Y` and the duality norms; defaults to the
    /// first snapshot.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub holder: HolderConfig,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            p: 2,
            theta: None,
            alpha_trial: 0.5,
            tau: None,
            holder: HolderConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub system: SystemConfig,
    pub solver: SolverSection,
    #[serde(default = "default_initial")]
    pub initial: InitialData,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
}

fn default_initial() -> InitialData {
    InitialData::random_cosine(1.0)
}

/// One inequality of a verification run; omitted cutoff parameters take
/// the defaults of the key inequalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalityEntry {
    pub inequality: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<f64>>,
}

impl InequalityEntry {
    pub fn build(&self, grid: &Grid1D) -> Result<InequalityId> {
        let need_delta = || {
            self.delta
                .with_context(|| format!("inequalities: \"{}\" needs \"delta\"", self.inequality))
        };
        let key = |id: InequalityId| match id {
            InequalityId::Key1 {
                cutoff_radius,
                centers,
            } => InequalityId::Key1 {
                cutoff_radius: self.cutoff_radius.unwrap_or(cutoff_radius),
                centers: self.centers.clone().unwrap_or(centers),
            },
            InequalityId::Key2 {
                delta,
                cutoff_radius,
                centers,
            } => InequalityId::Key2 {
                delta,
                cutoff_radius: self.cutoff_radius.unwrap_or(cutoff_radius),
                centers: self.centers.clone().unwrap_or(centers),
            },
            other => other,
        };
        Ok(match self.inequality.as_str() {
            "key1" => key(InequalityId::key1_default(grid)),
            "key2" => key(InequalityId::key2_default(grid, need_delta()?)),
            "interp_morrey" => InequalityId::InterpMorrey {
                delta: need_delta()?,
                eps_weight: self.eps_weight.with_context(|| {
                    "inequalities: \"interp_morrey\" needs \"eps_weight\"".to_string()
                })?,
            },
            other => bail!(
                "inequalities: unknown inequality \"{other}\" (known: key1, key2, interp_morrey)"
            ),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub grid: GridConfig,
    /// Training ensemble; its seed is the run seed.
    pub ensemble: EnsembleSpec,
    /// Held-out seed; defaults to the training seed plus one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held_out_seed: Option<u64>,
    #[serde(default = "default_safety")]
    pub safety_factor: f64,
    pub inequalities: Vec<InequalityEntry>,
}

fn default_safety() -> f64 {
    1.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub grid: GridConfig,
    pub solver: SolverSection,
    pub presets: Vec<String>,
    /// Exponents for `power_exchange`; other presets keep their own.
    #[serde(default)]
    pub r: Vec<u32>,
    /// `d = (1, ρ, …, ρ)`; empty keeps each preset's coefficients.
    #[serde(default)]
    pub diffusion_ratios: Vec<f64>,
    /// Sup of the random initial data.
    #[serde(default = "default_masses")]
    pub initial_max: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "yes")]
    pub diagnose: bool,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
}

fn default_masses() -> Vec<f64> {
    vec![1.0]
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn yes() -> bool {
    true
}

/// Reads a JSON file; parse errors carry line, column, and field names.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<(T, Vec<u8>)> {
    let bytes =
        std::fs::read(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let value = serde_json::from_slice(&bytes)
        .with_context(|| format!("malformed config {}", path.display()))?;
    Ok((value, bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_key_is_named() {
        let err = serde_json::from_str::<RunConfig>(
            r#"{"system": {"preset": "heat"}, "solver": {"T": 1}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("`grid`"), "{err}");
    }

    #[test]
    fn dt_caps_the_step() {
        let s: SolverSection = serde_json::from_str(r#"{"T": 1, "dt": 0.001}"#).unwrap();
        let cfg = s.build().unwrap();
        assert_eq!(cfg.dt_initial, 0.001);
        assert_eq!(cfg.dt_max, 0.001);
        let s: SolverSection = serde_json::from_str(r#"{"T": 1}"#).unwrap();
        assert_eq!(s.build().unwrap(), SolverConfig::default());
        let s: SolverSection = serde_json::from_str(r#"{"T": -1}"#).unwrap();
        assert!(s.build().is_err());
    }

    #[test]
    fn inequality_entries() {
        let g = Grid1D::new(1.0, 101).unwrap();
        let e: InequalityEntry =
            serde_json::from_str(r#"{"inequality": "key2", "delta": 0.1, "centers": [0.5]}"#)
                .unwrap();
        match e.build(&g).unwrap() {
            InequalityId::Key2 { delta, centers, .. } => {
                assert_eq!(delta, 0.1);
                assert_eq!(centers, vec![0.5]);
            }
            other => panic!("{other:?}"),
        }
        let e: InequalityEntry =
            serde_json::from_str(r#"{"inequality": "interp_morrey"}"#).unwrap();
        assert!(e.build(&g).unwrap_err().to_string().contains("delta"));
        let e: InequalityEntry = serde_json::from_str(r#"{"inequality": "key9"}"#).unwrap();
        assert!(e.build(&g).is_err());
    }
}
