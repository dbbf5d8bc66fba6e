//! Parameter scans: every row is an independent simulate-then-diagnose run
//! in its own subdirectory.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use rd_core::grid::fmt_f64;
use rd_core::solver::{InitialData, Termination};
use rd_core::systems::{Preset, PresetConfig, SystemConfig};
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, ScanConfig};
use crate::diagnose::run_diagnose;
use crate::run::{run_simulation, write_file};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub row: usize,
    pub preset: String,
    pub r: Option<u32>,
    pub d_ratio: Option<f64>,
    pub initial_max: f64,
    pub seed: u64,
    pub status: String,
    pub t_final: Option<f64>,
    pub sup_linf: Option<f64>,
    pub sup_morrey_z: Option<f64>,
    pub nonconcentration_ratio: Option<f64>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub error: Option<String>,
}

/// Expands the scan grid into per-row run configurations.
pub fn expand(config: &ScanConfig) -> Result<Vec<(ScanRow, RunConfig)>> {
    let mut rows = Vec::new();
    for preset in &config.presets {
        let kind = Preset::from_name(preset)
            .with_context(|| format!("presets: unknown preset \"{preset}\""))?;
        let species = kind.build().species();
        let rs: Vec<Option<u32>> = match kind {
            Preset::PowerExchange { .. } if !config.r.is_empty() => {
                config.r.iter().copied().map(Some).collect()
            }
            _ => vec![None],
        };
        let ratios: Vec<Option<f64>> = if config.diffusion_ratios.is_empty() || species < 2 {
            vec![None]
        } else {
            config.diffusion_ratios.iter().copied().map(Some).collect()
        };
        for &r in &rs {
            for &ratio in &ratios {
                for &max in &config.initial_max {
                    for &seed in &config.seeds {
                        let system = SystemConfig::Preset(PresetConfig {
                            preset: preset.clone(),
                            d: ratio.map(|rho| {
                                std::iter::once(1.0)
                                    .chain(std::iter::repeat_n(rho, species - 1))
                                    .collect()
                            }),
                            r,
                            alpha: None,
                            k0: None,
                            k1: None,
                        });
                        let run = RunConfig {
                            grid: config.grid.clone(),
                            system,
                            solver: config.solver.clone(),
                            initial: InitialData::random_cosine(max),
                            seed,
                            diagnostics: config.diagnostics.clone(),
                        };
                        let row = ScanRow {
                            row: rows.len(),
                            preset: preset.clone(),
                            r,
                            d_ratio: ratio,
                            initial_max: max,
                            seed,
                            status: String::new(),
                            t_final: None,
                            sup_linf: None,
                            sup_morrey_z: None,
                            nonconcentration_ratio: None,
                            gamma: None,
                            delta: None,
                            error: None,
                        };
                        rows.push((row, run));
                    }
                }
            }
        }
    }
    Ok(rows)
}

fn run_row(mut row: ScanRow, run: &RunConfig, dir: &Path, diagnose: bool) -> ScanRow {
    let result = (|| -> Result<()> {
        let (manifest, traj) = run_simulation(run, dir)?;
        row.status = match &manifest.termination {
            Termination::Completed => "completed",
            Termination::BlownUp { .. } => "blown_up",
            Termination::StepFailure { .. } => "step_failure",
        }
        .to_string();
        row.t_final = Some(traj.final_state().time());
        row.sup_linf = Some(traj.sup_linf());
        if diagnose && manifest.termination.is_completed() {
            let s = run_diagnose(dir, dir, None)?;
            row.sup_morrey_z = Some(s.sup_morrey_z);
            row.nonconcentration_ratio = Some(s.nonconcentration_ratio);
            row.gamma = Some(s.gamma);
            row.delta = Some(s.delta);
        }
        Ok(())
    })();
    if let Err(e) = result {
        if row.status.is_empty() {
            row.status = "error".to_string();
        }
        row.error = Some(format!("{e:#}"));
    }
    row
}

/// Runs all rows on at most `jobs` threads and writes `scan.csv`.
pub fn run_scan(config: &ScanConfig, out: &Path, jobs: Option<usize>) -> Result<Vec<ScanRow>> {
    let rows = expand(config)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .context("thread pool")?;
    let results: Vec<ScanRow> = pool.install(|| {
        rows.into_par_iter()
            .map(|(row, run)| {
                let dir = out.join(format!("row_{:04}", row.row));
                run_row(row, &run, &dir, config.diagnose)
            })
            .collect()
    });
    let num = |v: Option<f64>| {
        v.map(|x| {
            if x.is_finite() {
                fmt_f64(x)
            } else {
                x.to_string()
            }
        })
        .unwrap_or_default()
    };
    write_file(&out.join("scan.csv"), |w| {
        writeln!(
            w,
            "row,preset,r,d_ratio,initial_max,seed,status,t_final,sup_linf,sup_morrey_z,nonconcentration_ratio,gamma,delta,error"
        )?;
        for r in &results {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.row,
                r.preset,
                r.r.map(|v| v.to_string()).unwrap_or_default(),
                num(r.d_ratio),
                fmt_f64(r.initial_max),
                r.seed,
                r.status,
                num(r.t_final),
                num(r.sup_linf),
                num(r.sup_morrey_z),
                num(r.nonconcentration_ratio),
                num(r.gamma),
                num(r.delta),
                r.error.as_deref().unwrap_or("").replace([',', '\n'], ";")
            )?;
        }
        Ok(())
    })?;
    Ok(results)
}
