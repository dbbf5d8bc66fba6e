//! Calibration on a training ensemble and validation on a held-out one.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rd_core::inequalities::{
    calibrate_constant, generate_ensemble, validate_constant, EnsembleSpec,
};
use serde::{Deserialize, Serialize};

use crate::config::VerifyConfig;
use crate::run::{write_file, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyResult {
    pub inequality: String,
    pub delta: Option<f64>,
    pub samples: usize,
    /// Largest per-sample constant on the held-out ensemble.
    pub max_ratio: f64,
    #[serde(rename = "calibrated_C")]
    pub calibrated_c: f64,
    /// `safety_factor × calibrated_C`.
    #[serde(rename = "tested_C")]
    pub tested_c: f64,
    pub violations: usize,
    pub seed: u64,
    pub held_out_seed: u64,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub results: Vec<VerifyResult>,
    pub total_violations: usize,
}

pub fn run_verify(config: &VerifyConfig, out: &Path) -> Result<VerifyReport> {
    let grid = config.grid.build()?;
    let seed = config.ensemble.seed;
    let held_out_seed = config.held_out_seed.unwrap_or(seed.wrapping_add(1));
    let train = generate_ensemble(grid, &config.ensemble).context("ensemble")?;
    let held = generate_ensemble(
        grid,
        &EnsembleSpec {
            seed: held_out_seed,
            ..config.ensemble.clone()
        },
    )
    .context("ensemble")?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;

    let mut results = Vec::new();
    for (idx, entry) in config.inequalities.iter().enumerate() {
        let id = entry.build(&grid)?;
        let calibrated = calibrate_constant(&train, &id)?;
        let tested = config.safety_factor * calibrated;
        let report = validate_constant(&held, &id, tested)?;
        let witness = match report.witness {
            Some(w) if report.violations > 0 => {
                let file = format!("witness_{idx}_{}.csv", id.name());
                write_file(&out.join(&file), |o| held[w].write_csv(o))?;
                eprintln!(
                    "{}: {} held-out violations at C = {:e}; worst sample {w} needs {:e}, dumped to {file}",
                    id.name(),
                    report.violations,
                    tested,
                    report.max_ratio
                );
                Some(file)
            }
            _ => None,
        };
        results.push(VerifyResult {
            inequality: id.name().to_string(),
            delta: id.delta(),
            samples: held.len(),
            max_ratio: report.max_ratio,
            calibrated_c: calibrated,
            tested_c: tested,
            violations: report.violations,
            seed,
            held_out_seed,
            witness,
        });
    }
    let report = VerifyReport {
        config: config.clone(),
        total_violations: results.iter().map(|r| r.violations).sum(),
        results,
    };
    write_json(&out.join("verify_report.json"), &report)?;
    Ok(report)
}
