//! Morrey norms `‖f‖_{M^{1,δ}} = sup_{x₀, ε} ε^{−δ} ∫_{(x₀−ε, x₀+ε)∩Ω} |f|`,
//! plateau cutoffs, localized mass, and the auxiliary field `Y` with its
//! Hölder exponent.

mod cutoff;
mod holder;

pub use cutoff::{
    localized_mass, make_cutoff, max_localized_mass, plateau_eta, plateau_eta_derivative,
    reference_bump_mass, CutoffFunction, CutoffSummary,
};
pub use holder::{
    auxiliary_fields, delta_from_gamma, estimate_holder, AuxiliaryFields, HolderConfig,
    HolderEstimate, SpaceTime,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{Field, WindowIntegrator};
use crate::solver::Trajectory;

/// Radii over which the supremum is taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadiusSet {
    /// Every multiple of `h/2` up to `L`. The windowed mass is piecewise
    /// linear in `ε` with breakpoints at exactly these radii, so this gives
    /// the supremum over all `ε ∈ (0, L]` for node centres.
    Exact,
    /// `L · 2^{−k}` for `k = 1..=levels`.
    Dyadic { levels: u32 },
    /// Explicit radii in `(0, L]`.
    List { radii: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorreyParams {
    pub delta: f64,
    pub radii: RadiusSet,
}

impl MorreyParams {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            radii: RadiusSet::Exact,
        }
    }

    pub fn dyadic(delta: f64, levels: u32) -> Self {
        Self {
            delta,
            radii: RadiusSet::Dyadic { levels },
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!(
                "Morrey exponent must lie in (0, 1), got {}",
                self.delta
            )));
        }
        match &self.radii {
            RadiusSet::Dyadic { levels: 0 } => Err(invalid("dyadic radius set is empty")),
            RadiusSet::List { radii } if radii.is_empty() => Err(invalid("radius set is empty")),
            _ => Ok(()),
        }
    }
}

/// Discrete Morrey norm with node centres. Partial end cells use clipped
/// dual-cell weights.
pub fn morrey_norm(f: &Field, params: &MorreyParams) -> Result<f64> {
    params.validate()?;
    f.ensure_finite()?;
    let grid = f.grid();
    let n = grid.len();
    let window = WindowIntegrator::new(f);
    let delta = params.delta;
    let best = match &params.radii {
        RadiusSet::Exact => {
            let half = 0.5 * grid.spacing();
            let steps = 2 * (n - 1);
            let scale: Vec<f64> = (0..=steps)
                .map(|j| {
                    if j == 0 {
                        0.0
                    } else {
                        (j as f64 * half).powf(-delta)
                    }
                })
                .collect();
            (0..n)
                .into_par_iter()
                .map(|k| {
                    let c = 2 * k as isize;
                    (1..=steps).fold(0.0_f64, |m, j| {
                        let ji = j as isize;
                        m.max(window.between_positions(c - ji, c + ji) * scale[j])
                    })
                })
                .reduce(|| 0.0, f64::max)
        }
        RadiusSet::Dyadic { levels } => {
            let radii: Vec<f64> = (1..=*levels)
                .map(|k| grid.length() * 0.5_f64.powi(k as i32))
                .collect();
            windowed_sup(f, &window, &radii, delta)
        }
        RadiusSet::List { radii } => {
            if radii
                .iter()
                .any(|&r| !(r > 0.0 && r <= grid.length() && r.is_finite()))
            {
                return Err(invalid("radii must lie in (0, L]"));
            }
            windowed_sup(f, &window, radii, delta)
        }
    };
    Ok(best)
}

fn windowed_sup(f: &Field, window: &WindowIntegrator, radii: &[f64], delta: f64) -> f64 {
    let grid = f.grid();
    radii
        .iter()
        .map(|&eps| {
            let scale = eps.powf(-delta);
            (0..grid.len()).fold(0.0_f64, |m, k| {
                let x = grid.x(k);
                m.max(window.between(x - eps, x + eps) * scale)
            })
        })
        .fold(0.0, f64::max)
}

/// Morrey norms along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorreySeries {
    pub delta: f64,
    pub times: Vec<f64>,
    /// `‖z(t)‖_{M^{1,δ}}` per snapshot.
    pub z: Vec<f64>,
    /// `‖u_i(t)‖_{M^{1,δ}}`, indexed `[snapshot][species]`.
    pub species: Vec<Vec<f64>>,
    pub sup_z: f64,
    pub sup_species: Vec<f64>,
    /// `sup_{t ∈ [T/2, T]} / sup_{t ∈ [0, T/2]}` of the `z` series, measured
    /// from the first snapshot time.
    pub nonconcentration_ratio: f64,
}

pub fn track_morrey(traj: &Trajectory, params: &MorreyParams) -> Result<MorreySeries> {
    params.validate()?;
    let snaps = traj.snapshots();
    let mut z = Vec::with_capacity(snaps.len());
    let mut species = Vec::with_capacity(snaps.len());
    for s in snaps {
        z.push(morrey_norm(&s.total(), params)?);
        species.push(
            s.species()
                .iter()
                .map(|f| morrey_norm(f, params))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let times = traj.times();
    let m = snaps[0].species_count();
    let sup_species = (0..m)
        .map(|i| {
            species
                .iter()
                .map(|row: &Vec<f64>| row[i])
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(MorreySeries {
        delta: params.delta,
        sup_z: z.iter().copied().fold(0.0, f64::max),
        sup_species,
        nonconcentration_ratio: nonconcentration_ratio(&times, &z),
        times,
        z,
        species,
    })
}

/// Late-half over early-half supremum; the midpoint belongs to both halves.
pub fn nonconcentration_ratio(times: &[f64], series: &[f64]) -> f64 {
    let (Some(&t0), Some(&t1)) = (times.first(), times.last()) else {
        return f64::NAN;
    };
    let mid = t0 + 0.5 * (t1 - t0);
    let (mut early, mut late) = (0.0_f64, 0.0_f64);
    for (&t, &v) in times.iter().zip(series) {
        if t <= mid {
            early = early.max(v);
        }
        if t >= mid {
            late = late.max(v);
        }
    }
    if early == 0.0 {
        if late == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        late / early
    }
}
