//! The auxiliary fields `z = Σ u_i`, `w = Σ d_i u_i`, `Y = ∂_x ∫_τ^t w ds`
//! and an envelope estimate of the Hölder exponent of `Y` in the parabolic
//! metric `|Δx|² + |Δt|`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{Field, Grid1D};
use crate::solver::Trajectory;

/// A scalar field sampled on a grid at a strictly increasing list of times.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTime {
    grid: Grid1D,
    times: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl SpaceTime {
    pub fn new(grid: Grid1D, times: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != rows.len() {
            return Err(invalid(format!(
                "space-time field has {} times and {} rows",
                times.len(),
                rows.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid(
                "space-time field times must be strictly increasing",
            ));
        }
        if rows.iter().any(|r| r.len() != grid.len()) {
            return Err(invalid("every space-time row must have one value per node"));
        }
        Ok(Self { grid, times, rows })
    }

    pub fn from_fn(grid: Grid1D, times: Vec<f64>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let rows = times
            .iter()
            .map(|&t| grid.nodes().map(|x| f(x, t)).collect())
            .collect();
        Self::new(grid, times, rows)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, j: usize) -> Field {
        Field::new(self.grid, self.rows[j].clone()).expect("row length checked")
    }

    pub fn sample_count(&self) -> usize {
        self.times.len() * self.grid.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryFields {
    pub tau: f64,
    pub times: Vec<f64>,
    pub z: Vec<Field>,
    pub w: Vec<Field>,
    pub y: SpaceTime,
}

/// Builds `z`, `w` and `Y` on the snapshots from `τ` on. The time integral is
/// the cumulative trapezoid rule over snapshots, so `Y(·, τ) ≡ 0`.
pub fn auxiliary_fields(traj: &Trajectory, diffusion: &[f64], tau: f64) -> Result<AuxiliaryFields> {
    let snaps = traj.snapshots();
    let m = snaps[0].species_count();
    if diffusion.len() != m {
        return Err(invalid(format!(
            "expected {m} diffusion coefficients, got {}",
            diffusion.len()
        )));
    }
    let tol = 1e-9 * tau.abs().max(1.0);
    let start = snaps
        .iter()
        .position(|s| (s.time() - tau).abs() <= tol)
        .ok_or_else(|| invalid(format!("tau = {tau} is not a snapshot time")))?;
    if snaps.len() - start - 1 < 2 {
        return Err(invalid(format!(
            "need at least 2 snapshots after tau = {tau}, found {}",
            snaps.len() - start - 1
        )));
    }
    let grid = *snaps[0].grid();
    let window = &snaps[start..];
    let times: Vec<f64> = window.iter().map(|s| s.time()).collect();
    let z: Vec<Field> = window.iter().map(|s| s.total()).collect();
    let w: Vec<Field> = window.iter().map(|s| s.weighted_sum(diffusion)).collect();
    let mut integral = vec![0.0; grid.len()];
    let mut rows = Vec::with_capacity(window.len());
    rows.push(vec![0.0; grid.len()]);
    for j in 1..window.len() {
        let dt = times[j] - times[j - 1];
        for ((acc, a), b) in integral
            .iter_mut()
            .zip(w[j - 1].values())
            .zip(w[j].values())
        {
            *acc += 0.5 * dt * (a + b);
        }
        rows.push(
            Field::new(grid, integral.clone())?
                .derivative()
                .into_values(),
        );
    }
    Ok(AuxiliaryFields {
        tau: times[0],
        y: SpaceTime::new(grid, times.clone(), rows)?,
        times,
        z,
        w,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HolderConfig {
    pub pairs: usize,
    pub seed: u64,
    /// Envelope quantile of `|ΔY|`.
    pub quantile: f64,
    /// Logarithmic scale bands used in the fit.
    pub bands: usize,
    /// Bands with fewer pairs are ignored.
    pub min_band_pairs: usize,
}

impl Default for HolderConfig {
    fn default() -> Self {
        Self {
            pairs: 100_000,
            seed: 0,
            quantile: 0.99,
            bands: 16,
            min_band_pairs: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub gamma: f64,
    pub constant: f64,
    /// RMS residual of the log-log envelope fit.
    pub residual: f64,
    pub pairs: usize,
    /// `Y` was constant; `γ = 1` and `𝒞 = 0` by convention.
    pub degenerate: bool,
}

/// Nearest-rank quantile; reorders `v`.
fn quantile(v: &mut [f64], q: f64) -> f64 {
    let n = v.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    *v.select_nth_unstable_by(rank, f64::total_cmp).1
}

/// Fits `|ΔY| ≲ 𝒞 (|Δx|² + |Δt|)^γ`.
///
/// Pairs are stratified by scale: a target `s` is drawn log-uniformly
/// between the finest resolvable scale `min(h², Δt_min)` and a sixteenth
/// of `min(L², T)`, split at random into `|Δx|² = λs` and `|Δt| = (1 − λ)s`,
/// and snapped to the grid. `γ` is the log-log slope of the per-band
/// envelope quantile of `|ΔY|` against scale; `𝒞` is the same quantile of
/// `|ΔY| / s^γ` over all pairs.
pub fn estimate_holder(y: &SpaceTime, cfg: &HolderConfig) -> Result<HolderEstimate> {
    if y.sample_count() < 100 {
        return Err(invalid(format!(
            "Hölder estimate needs at least 100 space-time samples, got {}",
            y.sample_count()
        )));
    }
    if !(cfg.quantile > 0.0 && cfg.quantile < 1.0) || cfg.pairs == 0 || cfg.bands < 2 {
        return Err(invalid("Hölder configuration out of range"));
    }
    let first = y.rows[0][0];
    if y.rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid("Y holds non-finite values"));
    }
    if y.rows.iter().flatten().all(|&v| v == first) {
        return Ok(HolderEstimate {
            gamma: 1.0,
            constant: 0.0,
            residual: 0.0,
            pairs: 0,
            degenerate: true,
        });
    }

    let grid = y.grid;
    let nx = grid.len();
    let nt = y.times.len();
    let h = grid.spacing();
    let length = grid.length();
    let (t0, t1) = (y.times[0], y.times[nt - 1]);
    let dt_min = y
        .times
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let s_min = (h * h).min(dt_min);
    let mut s_max = if nt > 1 {
        (length * length).min(t1 - t0) / 16.0
    } else {
        length * length / 16.0
    };
    s_max = s_max.max(4.0 * s_min);
    let (ls_min, ls_max) = (s_min.ln(), s_max.ln());

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut scales = Vec::with_capacity(cfg.pairs);
    let mut jumps = Vec::with_capacity(cfg.pairs);
    let mut attempts = 0usize;
    while scales.len() < cfg.pairs && attempts < 20 * cfg.pairs {
        attempts += 1;
        let s = (ls_min + rng.gen::<f64>() * (ls_max - ls_min)).exp();
        let lambda = if nt > 1 { rng.gen::<f64>() } else { 1.0 };
        let steps = ((lambda * s).sqrt() / h).round() as usize;
        let k1 = rng.gen_range(0..nx);
        let k2 = if rng.gen::<bool>() {
            if k1 + steps < nx {
                k1 + steps
            } else {
                k1.saturating_sub(steps)
            }
        } else if k1 >= steps {
            k1 - steps
        } else {
            (k1 + steps).min(nx - 1)
        };
        let j1 = rng.gen_range(0..nt);
        let j2 = if nt > 1 {
            let span = (1.0 - lambda) * s;
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let mut target = y.times[j1] + sign * span;
            if target > t1 || target < t0 {
                target = y.times[j1] - sign * span;
            }
            nearest_index(&y.times, target.clamp(t0, t1))
        } else {
            0
        };
        if k1 == k2 && j1 == j2 {
            continue;
        }
        let dx = grid.x(k2) - grid.x(k1);
        let scale = dx * dx + (y.times[j2] - y.times[j1]).abs();
        scales.push(scale);
        jumps.push((y.rows[j2][k2] - y.rows[j1][k1]).abs());
    }
    if scales.len() < cfg.min_band_pairs * 2 {
        return Err(invalid(
            "too few distinct space-time pairs for a Hölder fit",
        ));
    }

    let logs: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
    let (lo, hi) = logs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let width = (hi - lo) / cfg.bands as f64;
    let mut band_jumps: Vec<Vec<f64>> = vec![Vec::new(); cfg.bands];
    let mut band_logs: Vec<f64> = vec![0.0; cfg.bands];
    for (&l, &j) in logs.iter().zip(&jumps) {
        let b = if width > 0.0 {
            (((l - lo) / width) as usize).min(cfg.bands - 1)
        } else {
            0
        };
        band_jumps[b].push(j);
        band_logs[b] += l;
    }
    let mut points = Vec::new();
    for (mut js, sum) in band_jumps.into_iter().zip(band_logs) {
        if js.len() < cfg.min_band_pairs {
            continue;
        }
        let count = js.len() as f64;
        let q = quantile(&mut js, cfg.quantile);
        if q > 0.0 {
            points.push((sum / count, q.ln()));
        }
    }
    if points.len() < 2 {
        return Err(invalid(
            "Hölder fit needs populated pairs in at least two scale bands",
        ));
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 1.0 };
    let intercept = my - slope * mx;
    let residual = (points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / k)
        .sqrt();
    let gamma = slope.clamp(1e-6, 1.0);
    let mut normalized: Vec<f64> = scales
        .iter()
        .zip(&jumps)
        .map(|(s, j)| j / s.powf(gamma))
        .collect();
    let constant = quantile(&mut normalized, cfg.quantile);
    Ok(HolderEstimate {
        gamma,
        constant,
        residual,
        pairs: scales.len(),
        degenerate: false,
    })
}

fn nearest_index(times: &[f64], t: f64) -> usize {
    let i = times.partition_point(|&v| v < t);
    if i == 0 {
        0
    } else if i == times.len() {
        times.len() - 1
    } else if t - times[i - 1] <= times[i] - t {
        i - 1
    } else {
        i
    }
}

/// `δ = γ / (1 + 2γ)`.
pub fn delta_from_gamma(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(invalid(format!(
            "Hölder exponent must lie in (0, 1], got {gamma}"
        )));
    }
    Ok(gamma / (1.0 + 2.0 * gamma))
}
