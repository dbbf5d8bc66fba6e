//! Simulation runs and their on-disk trajectory format: one CSV per
//! snapshot (`x,u1,…,um`) plus `manifest.json`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use rd_core::grid::{fmt_f64, Field, Grid1D};
use rd_core::solver::{simulate, DtStats, Termination, Trajectory};
use rd_core::systems::StateVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub file: String,
    pub t: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: RunConfig,
    pub seed: u64,
    pub termination: Termination,
    pub dt_stats: DtStats,
    pub wall_time_s: f64,
    pub snapshots: Vec<SnapshotEntry>,
    pub outputs: Vec<String>,
    /// SHA-256 of the effective configuration.
    pub input_sha256: String,
}

pub fn version() -> String {
    format!("rd-verify {}", env!("CARGO_PKG_VERSION"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Writes `contents` through a buffered file.
pub fn write_file(
    path: &Path,
    contents: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<()> {
    let file =
        fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut out = BufWriter::new(file);
    contents(&mut out).with_context(|| format!("cannot write {}", path.display()))?;
    out.flush()
        .with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_snapshot(path: &Path, state: &StateVector) -> Result<()> {
    write_file(path, |out| {
        write!(out, "x")?;
        for i in 1..=state.species_count() {
            write!(out, ",u{i}")?;
        }
        writeln!(out)?;
        for k in 0..state.grid().len() {
            write!(out, "{}", fmt_f64(state.grid().x(k)))?;
            for f in state.species() {
                write!(out, ",{}", fmt_f64(f.values()[k]))?;
            }
            writeln!(out)?;
        }
        Ok(())
    })
}

fn read_snapshot(path: &Path, grid: Grid1D, species: usize, t: f64) -> Result<StateVector> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read snapshot {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let expected: Vec<String> = std::iter::once("x".to_string())
        .chain((1..=species).map(|i| format!("u{i}")))
        .collect();
    ensure!(
        header.split(',').eq(expected.iter().map(String::as_str)),
        "corrupt snapshot {}: header \"{header}\", expected \"{}\"",
        path.display(),
        expected.join(",")
    );
    let mut columns = vec![Vec::with_capacity(grid.len()); species];
    for (k, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        ensure!(
            cells.len() == species + 1,
            "corrupt snapshot {}: row {} has {} cells",
            path.display(),
            k + 1,
            cells.len()
        );
        let parse = |c: &str| {
            c.trim().parse::<f64>().with_context(|| {
                format!(
                    "corrupt snapshot {}: row {}: \"{c}\"",
                    path.display(),
                    k + 1
                )
            })
        };
        let x = parse(cells[0])?;
        ensure!(
            k < grid.len() && (x - grid.x(k)).abs() <= 1e-12 * grid.length(),
            "corrupt snapshot {}: row {} is off the grid",
            path.display(),
            k + 1
        );
        for (col, cell) in columns.iter_mut().zip(&cells[1..]) {
            col.push(parse(cell)?);
        }
    }
    ensure!(
        columns[0].len() == grid.len(),
        "corrupt snapshot {}: {} rows, expected {}",
        path.display(),
        columns[0].len(),
        grid.len()
    );
    let fields = columns
        .into_iter()
        .map(|c| Field::new(grid, c))
        .collect::<rd_core::Result<Vec<_>>>()?;
    Ok(StateVector::new(t, fields)?)
}

/// Runs the configured simulation and writes its trajectory to `dir`.
pub fn run_simulation(config: &RunConfig, dir: &Path) -> Result<(RunManifest, Trajectory)> {
    let grid = config.grid.build()?;
    let sys = config.system.build()?;
    let solver = config.solver.build()?;
    let u0 = config
        .initial
        .state(grid, sys.species(), config.seed)
        .context("initial")?;
    let start = Instant::now();
    let traj = simulate(&sys, &u0, config.solver.t_end, &solver)?;
    let wall = start.elapsed().as_secs_f64();

    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut snapshots = Vec::new();
    for (j, s) in traj.snapshots().iter().enumerate() {
        let file = format!("snapshot_{j:05}.csv");
        write_snapshot(&dir.join(&file), s)?;
        snapshots.push(SnapshotEntry { file, t: s.time() });
    }
    let mut outputs: Vec<String> = snapshots.iter().map(|s| s.file.clone()).collect();
    outputs.push(MANIFEST.to_string());
    let manifest = RunManifest {
        version: version(),
        config: config.clone(),
        seed: config.seed,
        termination: traj.termination().clone(),
        dt_stats: traj.dt_stats(),
        wall_time_s: wall,
        snapshots,
        outputs,
        input_sha256: sha256_hex(&serde_json::to_vec(config)?),
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok((manifest, traj))
}

/// Reads a trajectory written by [`run_simulation`].
pub fn load_trajectory(dir: &Path) -> Result<(RunManifest, Trajectory)> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        bail!("{} holds no {MANIFEST}", dir.display());
    }
    let text =
        fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).with_context(|| format!("malformed {}", path.display()))?;
    let grid = manifest.config.grid.build()?;
    let species = manifest.config.system.build()?.species();
    ensure!(
        !manifest.snapshots.is_empty(),
        "{} lists no snapshots",
        path.display()
    );
    let snaps = manifest
        .snapshots
        .iter()
        .map(|s| read_snapshot(&dir.join(&s.file), grid, species, s.t))
        .collect::<Result<Vec<_>>>()?;
    let traj = Trajectory::from_snapshots(snaps, manifest.termination.clone())?;
    Ok((manifest, traj))
}
