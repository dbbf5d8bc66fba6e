//! IMEX time stepping with homogeneous Neumann boundaries.
//!
//! Diffusion is implicit (backward Euler or Crank–Nicolson) and reactions are
//! explicit. The second-difference operator uses mirrored ghost nodes, so its
//! trapezoid-weighted column sums vanish and the scheme conserves the
//! discrete mass `Σ_k w_k u_k` up to round-off in the tridiagonal solve.

mod initial;

pub use initial::InitialData;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, Grid1D};
use crate::systems::{evaluate_reactions, ReactionSystem, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    BackwardEuler,
    CrankNicolson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub dt_initial: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Fraction of `1/‖∂f/∂u‖_∞` allowed for the explicit reaction stage.
    pub cfl_reaction: f64,
    pub scheme: Scheme,
    pub blowup_threshold: f64,
    pub snapshot_stride: usize,
    pub positivity_tolerance: f64,
    /// Extra times the integrator lands on exactly and records.
    pub output_times: Vec<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt_initial: 1e-3,
            dt_min: 1e-12,
            dt_max: 1e-2,
            cfl_reaction: 0.5,
            scheme: Scheme::BackwardEuler,
            blowup_threshold: 1e12,
            snapshot_stride: 10,
            positivity_tolerance: 1e-10,
            output_times: Vec::new(),
        }
    }
}

impl SolverConfig {
    /// Constant step `dt`: adaptivity and the reaction cap are disabled.
    pub fn fixed_step(dt: f64) -> Self {
        Self {
            dt_initial: dt,
            dt_min: dt,
            dt_max: dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(self.dt_initial) && positive(self.dt_min) && positive(self.dt_max)) {
            return Err(invalid("solver time steps must be positive and finite"));
        }
        if !(self.dt_min <= self.dt_initial && self.dt_initial <= self.dt_max) {
            return Err(invalid(format!(
                "solver needs dt_min <= dt_initial <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_initial, self.dt_max
            )));
        }
        if !(self.cfl_reaction > 0.0 && self.cfl_reaction <= 1.0) {
            return Err(invalid(format!(
                "cfl_reaction must lie in (0, 1], got {}",
                self.cfl_reaction
            )));
        }
        if !positive(self.blowup_threshold) {
            return Err(invalid("blowup_threshold must be positive"));
        }
        if self.snapshot_stride == 0 {
            return Err(invalid("snapshot_stride must be at least 1"));
        }
        if !(self.positivity_tolerance >= 0.0) {
            return Err(invalid("positivity_tolerance must be nonnegative"));
        }
        if self.output_times.iter().any(|t| !t.is_finite()) {
            return Err(invalid("output_times must be finite"));
        }
        Ok(())
    }
}

/// Solves a tridiagonal system by the Thomas algorithm. `lower[k]` couples
/// row `k + 1` to column `k`; `upper[k]` couples row `k` to column `k + 1`.
pub fn thomas_solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 || rhs.len() != n || lower.len() + 1 != n || upper.len() + 1 != n {
        return Err(invalid(format!(
            "tridiagonal sizes do not match: lower {}, diag {n}, upper {}, rhs {}",
            lower.len(),
            upper.len(),
            rhs.len()
        )));
    }
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(Error::ZeroPivot { row: 0 });
    }
    x[0] = rhs[0] / pivot;
    for k in 1..n {
        c[k - 1] = upper[k - 1] / pivot;
        pivot = diag[k] - lower[k - 1] * c[k - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::ZeroPivot { row: k });
        }
        x[k] = (rhs[k] - lower[k - 1] * x[k - 1]) / pivot;
    }
    for k in (0..n - 1).rev() {
        x[k] -= c[k] * x[k + 1];
    }
    Ok(x)
}

/// `D₂ u` with mirrored ghost nodes: `(2u₁ − 2u₀)/h²` at the left end.
pub fn neumann_laplacian(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    let inv = 1.0 / (h * h);
    let mut out = vec![0.0; n];
    out[0] = 2.0 * (u[1] - u[0]) * inv;
    for k in 1..n - 1 {
        out[k] = (u[k + 1] - 2.0 * u[k] + u[k - 1]) * inv;
    }
    out[n - 1] = 2.0 * (u[n - 2] - u[n - 1]) * inv;
    out
}

/// Solves `(I − c D₂) v = rhs` for `c > 0`, in increment form
/// `v = rhs + e` with `(I − c D₂) e = c D₂ rhs`, so constants pass through
/// bitwise.
fn implicit_diffusion(rhs: &[f64], c: f64, h: f64) -> Result<Vec<f64>> {
    let n = rhs.len();
    let s = c / (h * h);
    let diag = vec![1.0 + 2.0 * s; n];
    let mut lower = vec![-s; n - 1];
    let mut upper = vec![-s; n - 1];
    upper[0] = -2.0 * s;
    lower[n - 2] = -2.0 * s;
    let source: Vec<f64> = neumann_laplacian(rhs, h).iter().map(|v| c * v).collect();
    let e = thomas_solve(&lower, &diag, &upper, &source)?;
    Ok(rhs.iter().zip(&e).map(|(r, e)| r + e).collect())
}

/// One IMEX step of size `dt`.
///
/// Backward Euler: `(I − dt d_i D₂) u_i⁺ = u_i + dt f_i(x, t, u)`.
/// Crank–Nicolson: `(I − ½dt d_i D₂) u_i⁺ = (I + ½dt d_i D₂) u_i + dt f_i(x, t + ½dt, u)`.
///
/// No positivity control happens here; see [`simulate`].
pub fn step_imex(
    sys: &ReactionSystem,
    state: &StateVector,
    dt: f64,
    config: &SolverConfig,
) -> Result<StateVector> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid(format!("time step must be positive, got {dt}")));
    }
    for (i, f) in state.species().iter().enumerate() {
        if let Some(node) = f.first_non_finite() {
            return Err(Error::NonFinite {
                node,
                species: Some(i),
            });
        }
    }
    let grid = *state.grid();
    let h = grid.spacing();
    let t = state.time();
    let reaction_time = match config.scheme {
        Scheme::BackwardEuler => t,
        Scheme::CrankNicolson => t + 0.5 * dt,
    };
    let rates = evaluate_reactions(sys, &state.clone().with_time(reaction_time))?;
    let mut next = Vec::with_capacity(sys.species());
    for (i, (u, f)) in state.species().iter().zip(&rates).enumerate() {
        let d = sys.diffusion()[i];
        let values = match config.scheme {
            Scheme::BackwardEuler => {
                let rhs: Vec<f64> = u
                    .values()
                    .iter()
                    .zip(f.values())
                    .map(|(v, r)| v + dt * r)
                    .collect();
                implicit_diffusion(&rhs, dt * d, h)?
            }
            Scheme::CrankNicolson => {
                let lap = neumann_laplacian(u.values(), h);
                let rhs: Vec<f64> = u
                    .values()
                    .iter()
                    .zip(&lap)
                    .zip(f.values())
                    .map(|((v, l), r)| v + 0.5 * dt * d * l + dt * r)
                    .collect();
                implicit_diffusion(&rhs, 0.5 * dt * d, h)?
            }
        };
        next.push(Field::new(grid, values)?);
    }
    StateVector::new(t + dt, next)
}

/// Reason a trajectory stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    BlownUp { t: f64, species: usize, norm: f64 },
    StepFailure { t: f64, reason: String },
}

impl Termination {
    pub fn is_completed(&self) -> bool {
        matches!(self, Termination::Completed)
    }

    pub fn is_blown_up(&self) -> bool {
        matches!(self, Termination::BlownUp { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupFlag {
    pub species: usize,
    /// `‖u_i‖_∞`, infinite when a non-finite value was found.
    pub norm: f64,
}

/// Flags the first species whose sup norm exceeds `threshold` or that holds
/// a non-finite value.
pub fn detect_blowup(state: &StateVector, threshold: f64) -> Option<BlowupFlag> {
    for (i, f) in state.species().iter().enumerate() {
        let norm = f.values().iter().fold(0.0_f64, |m, v| {
            if v.is_finite() {
                m.max(v.abs())
            } else {
                f64::INFINITY
            }
        });
        if norm > threshold || !norm.is_finite() {
            return Some(BlowupFlag { species: i, norm });
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtStats {
    pub accepted: usize,
    pub rejected: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

/// Snapshots of a run, the accepted step sizes, and why it stopped.
#[derive(Debug, Clone)]
pub struct Trajectory {
    snapshots: Vec<StateVector>,
    dt_history: Vec<f64>,
    rejected: usize,
    termination: Termination,
}

impl Trajectory {
    /// Wraps externally produced snapshots, e.g. read back from disk or
    /// synthesized in tests.
    pub fn from_snapshots(snapshots: Vec<StateVector>, termination: Termination) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(invalid("a trajectory needs at least one snapshot"));
        }
        let grid = *snapshots[0].grid();
        let m = snapshots[0].species_count();
        for w in snapshots.windows(2) {
            if !(w[1].time() > w[0].time()) {
                return Err(invalid("snapshot times must be strictly increasing"));
            }
        }
        if snapshots
            .iter()
            .any(|s| *s.grid() != grid || s.species_count() != m)
        {
            return Err(invalid("snapshots must share one grid and species count"));
        }
        Ok(Self {
            snapshots,
            dt_history: Vec::new(),
            rejected: 0,
            termination,
        })
    }

    pub fn snapshots(&self) -> &[StateVector] {
        &self.snapshots
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(StateVector::time).collect()
    }

    pub fn grid(&self) -> &Grid1D {
        self.snapshots[0].grid()
    }

    pub fn final_state(&self) -> &StateVector {
        self.snapshots.last().expect("trajectory is never empty")
    }

    /// Snapshot recorded at exactly time `t`, if any.
    pub fn at_time(&self, t: f64) -> Option<&StateVector> {
        self.snapshots.iter().find(|s| s.time() == t)
    }

    pub fn dt_history(&self) -> &[f64] {
        &self.dt_history
    }

    pub fn termination(&self) -> &Termination {
        &self.termination
    }

    pub fn dt_stats(&self) -> DtStats {
        let n = self.dt_history.len();
        let (min, max, sum) = self
            .dt_history
            .iter()
            .fold((f64::INFINITY, 0.0_f64, 0.0), |(lo, hi, s), &d| {
                (lo.min(d), hi.max(d), s + d)
            });
        DtStats {
            accepted: n,
            rejected: self.rejected,
            min: if n == 0 { 0.0 } else { min },
            max,
            mean: if n == 0 { 0.0 } else { sum / n as f64 },
        }
    }

    /// `sup_t max_i ‖u_i(t)‖_∞` over the snapshots.
    pub fn sup_linf(&self) -> f64 {
        self.snapshots
            .iter()
            .map(StateVector::max_linf)
            .fold(0.0, f64::max)
    }
}

/// Largest row sum of `|∂f/∂u|` over the nodes.
fn reaction_stiffness(sys: &ReactionSystem, state: &StateVector) -> f64 {
    let m = sys.species();
    let grid = state.grid();
    let mut u = vec![0.0; m];
    let mut jac = vec![0.0; m * m];
    let mut worst = 0.0_f64;
    for k in 0..grid.len() {
        state.at_node(k, &mut u);
        u.iter_mut().for_each(|v| *v = v.max(0.0));
        sys.kinetics()
            .jacobian(grid.x(k), state.time(), &u, &mut jac);
        for row in jac.chunks(m) {
            let s: f64 = row.iter().map(|v| v.abs()).sum();
            if s.is_finite() {
                worst = worst.max(s);
            } else {
                return f64::INFINITY;
            }
        }
    }
    worst
}

/// Most negative entry relative to the allowed floor, if below it.
fn positivity_violation(state: &StateVector, tolerance: f64) -> Option<(usize, usize, f64)> {
    let floor = -tolerance * (1.0 + state.max_linf());
    for (i, f) in state.species().iter().enumerate() {
        if let Some((k, &v)) = f
            .values()
            .iter()
            .enumerate()
            .filter(|(_, v)| **v < floor)
            .min_by(|a, b| a.1.total_cmp(b.1))
        {
            return Some((i, k, v));
        }
    }
    None
}

const GROWTH: f64 = 1.2;
const CLEAN_STEPS_BEFORE_GROWTH: usize = 10;

/// Integrates from `u0` to time `t_end`.
///
/// The step is `min(dt, dt_max, cfl/‖∂f/∂u‖_∞)`, clamped below by `dt_min`,
/// and shortened to land exactly on `t_end` and on every configured output
/// time. Steps with negative entries beyond tolerance or non-finite values
/// are retried at half the size; after ten clean steps the size grows by
/// 1.2. Snapshots are taken initially, every `snapshot_stride` accepted
/// steps, at output times, and at the end.
pub fn simulate(
    sys: &ReactionSystem,
    u0: &StateVector,
    t_end: f64,
    config: &SolverConfig,
) -> Result<Trajectory> {
    config.validate()?;
    if u0.species_count() != sys.species() {
        return Err(invalid(format!(
            "initial state has {} species, system has {}",
            u0.species_count(),
            sys.species()
        )));
    }
    if !(t_end.is_finite() && t_end > u0.time()) {
        return Err(invalid(format!(
            "final time {t_end} must exceed the initial time {}",
            u0.time()
        )));
    }
    for (i, f) in u0.species().iter().enumerate() {
        if let Some(node) = f.first_non_finite() {
            return Err(Error::NonFinite {
                node,
                species: Some(i),
            });
        }
    }
    if let Some((i, k, v)) = positivity_violation(u0, config.positivity_tolerance) {
        return Err(invalid(format!(
            "initial data is negative: species {} node {k} value {v}",
            i + 1
        )));
    }

    let mut targets: Vec<f64> = config
        .output_times
        .iter()
        .copied()
        .filter(|&t| t > u0.time() && t < t_end)
        .collect();
    targets.sort_by(f64::total_cmp);
    targets.dedup();
    targets.push(t_end);
    let mut next_target = 0;

    let mut traj = Trajectory {
        snapshots: vec![u0.clone()],
        dt_history: Vec::new(),
        rejected: 0,
        termination: Termination::Completed,
    };
    let mut state = u0.clone();
    let mut dt_current = config.dt_initial;
    let mut clean = 0usize;
    let mut since_snapshot = 0usize;

    if let Some(flag) = detect_blowup(&state, config.blowup_threshold) {
        traj.termination = Termination::BlownUp {
            t: state.time(),
            species: flag.species,
            norm: flag.norm,
        };
        return Ok(traj);
    }

    loop {
        let t = state.time();
        let target = targets[next_target];
        let stiffness = reaction_stiffness(sys, &state);
        if !stiffness.is_finite() {
            let flag = detect_blowup(&state, config.blowup_threshold);
            traj.termination = Termination::BlownUp {
                t,
                species: flag.map_or(0, |f| f.species),
                norm: flag.map_or(state.max_linf(), |f| f.norm),
            };
            break;
        }
        let mut dt = dt_current.min(config.dt_max);
        if stiffness > 0.0 {
            dt = dt.min(config.cfl_reaction / stiffness);
        }
        dt = dt.max(config.dt_min);
        let remaining = target - t;
        // Stretch by a hair rather than leave a sliver before the target.
        let lands = dt * (1.0 + 1e-9) >= remaining;
        if lands {
            dt = remaining;
        }

        let attempt = match step_imex(sys, &state, dt, config) {
            Ok(next) => {
                if next.species().iter().any(|f| !f.is_finite()) {
                    Err("non-finite values after step".to_string())
                } else if let Some((i, k, v)) =
                    positivity_violation(&next, config.positivity_tolerance)
                {
                    Err(format!("species {} negative at node {k}: {v}", i + 1))
                } else {
                    Ok(next)
                }
            }
            Err(Error::ReactionOverflow { species, .. }) => {
                traj.termination = Termination::BlownUp {
                    t,
                    species,
                    norm: state.species()[species]
                        .linf_norm()
                        .unwrap_or(f64::INFINITY),
                };
                break;
            }
            Err(e) => Err(e.to_string()),
        };

        let next = match attempt {
            Ok(next) => next,
            Err(reason) => {
                traj.rejected += 1;
                clean = 0;
                if dt <= config.dt_min {
                    traj.termination = Termination::StepFailure { t, reason };
                    break;
                }
                dt_current = (0.5 * dt).max(config.dt_min);
                continue;
            }
        };

        state = if lands { next.with_time(target) } else { next };
        traj.dt_history.push(dt);
        since_snapshot += 1;
        clean += 1;
        if clean >= CLEAN_STEPS_BEFORE_GROWTH {
            dt_current = (dt_current * GROWTH).min(config.dt_max);
            clean = 0;
        }

        if let Some(flag) = detect_blowup(&state, config.blowup_threshold) {
            traj.termination = Termination::BlownUp {
                t: state.time(),
                species: flag.species,
                norm: flag.norm,
            };
            traj.snapshots.push(state);
            return Ok(traj);
        }
        if lands || since_snapshot >= config.snapshot_stride {
            traj.snapshots.push(state.clone());
            since_snapshot = 0;
        }
        if lands {
            next_target += 1;
            if next_target == targets.len() {
                break;
            }
        }
    }
    if traj.final_state().time() < state.time() {
        traj.snapshots.push(state);
    }
    Ok(traj)
}
