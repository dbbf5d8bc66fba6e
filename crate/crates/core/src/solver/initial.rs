//! Initial data generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{Field, Grid1D};
use crate::systems::StateVector;

/// Points used to fix the affine map of a random cosine series, so the same
/// seed gives the same continuous profile at every resolution.
const REFERENCE_POINTS: usize = 4097;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// One constant per species.
    Constant { values: Vec<f64> },
    /// `mean + amplitude · cos(mode π x / L)` for every species.
    Cosine {
        mean: f64,
        amplitude: f64,
        #[serde(default = "one")]
        mode: u32,
    },
    /// Random Neumann-compatible cosine series per species, mapped affinely
    /// onto `[0, max]`.
    RandomCosine {
        max: f64,
        #[serde(default = "default_modes")]
        modes: u32,
    },
}

fn one() -> u32 {
    1
}

fn default_modes() -> u32 {
    8
}

impl InitialData {
    pub fn random_cosine(max: f64) -> Self {
        InitialData::RandomCosine {
            max,
            modes: default_modes(),
        }
    }

    pub fn state(&self, grid: Grid1D, species: usize, seed: u64) -> Result<StateVector> {
        let fields = match self {
            InitialData::Constant { values } => {
                if values.len() != species {
                    return Err(invalid(format!(
                        "initial.values: expected {species} entries, found {}",
                        values.len()
                    )));
                }
                values.iter().map(|&c| Field::constant(grid, c)).collect()
            }
            InitialData::Cosine {
                mean,
                amplitude,
                mode,
            } => {
                let w = f64::from(*mode) * std::f64::consts::PI / grid.length();
                let f = Field::from_fn(grid, |x| mean + amplitude * (w * x).cos());
                vec![f; species]
            }
            InitialData::RandomCosine { max, modes } => {
                if !(max.is_finite() && *max >= 0.0) {
                    return Err(invalid("initial.max must be finite and nonnegative"));
                }
                (0..species)
                    .map(|i| random_series(grid, *max, *modes, seed, i as u64))
                    .collect()
            }
        };
        StateVector::new(0.0, fields)
    }
}

fn random_series(grid: Grid1D, max: f64, modes: u32, seed: u64, stream: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let coeffs: Vec<f64> = (0..=modes)
        .map(|k| rng.gen_range(-1.0..1.0) / (1.0 + f64::from(k)))
        .collect();
    let length = grid.length();
    let eval = |x: f64| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| a * (k as f64 * std::f64::consts::PI * x / length).cos())
            .sum::<f64>()
    };
    let (lo, hi) = (0..REFERENCE_POINTS)
        .map(|j| eval(length * j as f64 / (REFERENCE_POINTS - 1) as f64))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    Field::from_fn(grid, |x| {
        if span > 0.0 {
            (max * (eval(x) - lo) / span).clamp(0.0, max)
        } else {
            max
        }
    })
}
