//! Diagnostics of a stored trajectory: Morrey series, Hölder estimate of
//! `Y`, energy monitor, and space-time `L²` norms.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rd_core::energy::{energy_dissipation_monitor, spacetime_l2};
use rd_core::grid::fmt_f64;
use rd_core::morrey::{
    auxiliary_fields, delta_from_gamma, estimate_holder, track_morrey, HolderEstimate, MorreyParams,
};
use rd_core::solver::Termination;
use serde::{Deserialize, Serialize};

use crate::run::{load_trajectory, write_file, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub gamma: f64,
    pub holder: HolderEstimate,
    pub delta: f64,
    pub sup_morrey_z: f64,
    pub sup_morrey_species: Vec<f64>,
    pub nonconcentration_ratio: f64,
    pub energy_p: u32,
    pub energy_sup_ratio: f64,
    pub spacetime_l2: Vec<f64>,
    pub tau: f64,
    pub sup_linf: f64,
    pub termination: Termination,
    pub snapshots: usize,
    pub outputs: Vec<String>,
}

fn opt(v: f64) -> String {
    if v.is_finite() {
        fmt_f64(v)
    } else {
        v.to_string()
    }
}

/// Diagnoses the trajectory in `dir` and writes the reports to `out`.
pub fn run_diagnose(dir: &Path, out: &Path, holder_seed: Option<u64>) -> Result<Summary> {
    let (manifest, traj) = load_trajectory(dir)?;
    let cfg = &manifest.config;
    let diag = &cfg.diagnostics;
    let sys = cfg.system.build()?;
    let times = traj.times();
    let tau = diag.tau.unwrap_or(times[0]);

    let mut holder_cfg = diag.holder;
    if let Some(seed) = holder_seed {
        holder_cfg.seed = seed;
    }
    let aux = auxiliary_fields(&traj, sys.diffusion(), tau).context("auxiliary field Y")?;
    let holder = estimate_holder(&aux.y, &holder_cfg).context("Hölder estimate")?;
    let delta = delta_from_gamma(holder.gamma)?;
    let morrey = track_morrey(&traj, &MorreyParams::new(delta))?;

    let theta = diag
        .theta
        .clone()
        .unwrap_or_else(|| vec![1.0; sys.species()]);
    let energy =
        energy_dissipation_monitor(&traj, diag.p, &theta, sys.isc_order(), diag.alpha_trial)
            .context("energy monitor")?;
    let t_last = times[times.len() - 1];

    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let m = sys.species();
    write_file(&out.join("morrey.csv"), |w| {
        write!(w, "t,morrey_z")?;
        for i in 1..=m {
            write!(w, ",morrey_u{i}")?;
        }
        writeln!(w, ",holder_gamma,delta,nonconcentration_ratio")?;
        let last = morrey.times.len() - 1;
        for (j, t) in morrey.times.iter().enumerate() {
            write!(w, "{},{}", fmt_f64(*t), fmt_f64(morrey.z[j]))?;
            for v in &morrey.species[j] {
                write!(w, ",{}", fmt_f64(*v))?;
            }
            if j == last {
                writeln!(
                    w,
                    ",{},{},{}",
                    fmt_f64(holder.gamma),
                    fmt_f64(delta),
                    opt(morrey.nonconcentration_ratio)
                )?;
            } else {
                writeln!(w, ",,,")?;
            }
        }
        Ok(())
    })?;
    write_file(&out.join("energy.csv"), |w| {
        writeln!(w, "t,E_p,grad_term,rhs_term,ratio")?;
        for j in 0..energy.times.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_f64(energy.times[j]),
                fmt_f64(energy.energy[j]),
                fmt_f64(energy.grad_term[j]),
                fmt_f64(energy.rhs_term[j]),
                fmt_f64(energy.ratio[j])
            )?;
        }
        Ok(())
    })?;
    // Space-time norms over the growing windows [τ, t].
    let duality = times
        .iter()
        .filter(|&&t| t > tau)
        .map(|&t| spacetime_l2(&traj, tau, t).map(|v| (t, v)))
        .collect::<rd_core::Result<Vec<_>>>()?;
    write_file(&out.join("duality.csv"), |w| {
        write!(w, "t")?;
        for i in 1..=m {
            write!(w, ",l2_u{i}")?;
        }
        writeln!(w, ",l2_total")?;
        for (t, v) in &duality {
            write!(w, "{}", fmt_f64(*t))?;
            for x in v {
                write!(w, ",{}", fmt_f64(*x))?;
            }
            writeln!(
                w,
                ",{}",
                fmt_f64(v.iter().map(|x| x * x).sum::<f64>().sqrt())
            )?;
        }
        Ok(())
    })?;

    let summary = Summary {
        gamma: holder.gamma,
        holder,
        delta,
        sup_morrey_z: morrey.sup_z,
        sup_morrey_species: morrey.sup_species.clone(),
        nonconcentration_ratio: morrey.nonconcentration_ratio,
        energy_p: diag.p,
        energy_sup_ratio: energy.sup_ratio,
        spacetime_l2: spacetime_l2(&traj, tau, t_last)?,
        tau,
        sup_linf: traj.sup_linf(),
        termination: traj.termination().clone(),
        snapshots: times.len(),
        outputs: ["morrey.csv", "energy.csv", "duality.csv", "summary.json"]
            .map(String::from)
            .to_vec(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}
