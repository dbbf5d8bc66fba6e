//! Sampling checks for the structural assumptions.
//!
//! The assumptions quantify over the whole orthant, so every check samples
//! `[0, R]^m` and `[0, 2R]^m`, reports the worst sample as a witness, and
//! never certifies anything beyond the sampled set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ReactionSystem;

const TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Samples per radius (per face for quasi-positivity).
    pub samples: usize,
    /// Base radius `R`; each check also samples at `2R`.
    pub radius: f64,
    pub seed: u64,
    /// Spatial range for `x`.
    pub length: f64,
    /// Time range for `t`.
    pub horizon: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            samples: 20_000,
            radius: 50.0,
            seed: 0,
            length: 1.0,
            horizon: 1.0,
        }
    }
}

/// A sample point and the quantity it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: f64,
    pub t: f64,
    pub u: Vec<f64>,
    /// Species or ISC row the value belongs to, when applicable.
    pub index: Option<usize>,
    pub value: f64,
}

struct Sampler {
    rng: ChaCha8Rng,
    cfg: SamplerConfig,
}

impl Sampler {
    fn new(cfg: SamplerConfig, salt: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(salt);
        Self { rng, cfg }
    }

    /// Uniform point of `[0, radius]^m`; coordinates are snapped to the faces
    /// `0` or `radius` with small probability so edges get visited.
    fn point(&mut self, radius: f64, u: &mut [f64]) -> (f64, f64) {
        for v in u.iter_mut() {
            let roll: f64 = self.rng.gen();
            *v = if roll < 0.05 {
                0.0
            } else if roll < 0.1 {
                radius
            } else {
                self.rng.gen_range(0.0..=radius)
            };
        }
        let x = self.rng.gen_range(0.0..=self.cfg.length);
        let t = self.rng.gen_range(0.0..=self.cfg.horizon);
        (x, t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiPositivityReport {
    pub pass: bool,
    /// `max(0, −min f_i)` over face samples.
    pub worst_violation: f64,
    pub witness: Option<Witness>,
}

/// Samples each face `{u_i = 0}` and records the smallest `f_i` found there.
pub fn check_quasi_positivity(sys: &ReactionSystem, cfg: &SamplerConfig) -> QuasiPositivityReport {
    let m = sys.species();
    let mut sampler = Sampler::new(*cfg, 1);
    let mut u = vec![0.0; m];
    let mut f = vec![0.0; m];
    let mut worst: Option<Witness> = None;
    for radius in [cfg.radius, 2.0 * cfg.radius] {
        for i in 0..m {
            for _ in 0..cfg.samples.max(1) {
                let (x, t) = sampler.point(radius, &mut u);
                u[i] = 0.0;
                sys.rates(x, t, &u, &mut f);
                if worst.as_ref().is_none_or(|w| f[i] < w.value) {
                    worst = Some(Witness {
                        x,
                        t,
                        u: u.clone(),
                        index: Some(i),
                        value: f[i],
                    });
                }
            }
        }
    }
    let min = worst.as_ref().map_or(0.0, |w| w.value);
    let pass = min >= -TOLERANCE;
    QuasiPositivityReport {
        pass,
        worst_violation: (-min).max(0.0),
        witness: if pass { None } else { worst },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassReport {
    /// Largest sampled `Σ f_i`.
    pub max_sum: f64,
    /// Largest sampled `|Σ f_i|`.
    pub max_abs_sum: f64,
    /// `Σ f_i ≤ 0` on every sample.
    pub dissipative: bool,
    /// `|Σ f_i| ≤ 1e-12` on every sample.
    pub conservative: bool,
    /// Largest sampled `Σ α_i f_i − k0 − k1 Σ u_i`.
    pub mass_control_excess: f64,
    pub mass_control: bool,
    /// Sample attaining `max_sum`.
    pub witness: Option<Witness>,
}

pub fn check_mass_dissipation(sys: &ReactionSystem, cfg: &SamplerConfig) -> MassReport {
    let m = sys.species();
    let mut sampler = Sampler::new(*cfg, 2);
    let mut u = vec![0.0; m];
    let mut f = vec![0.0; m];
    let mut max_sum = f64::NEG_INFINITY;
    let mut max_abs = 0.0f64;
    let mut excess = f64::NEG_INFINITY;
    let mut witness = None;
    for radius in [cfg.radius, 2.0 * cfg.radius] {
        for _ in 0..cfg.samples.max(1) {
            let (x, t) = sampler.point(radius, &mut u);
            sys.rates(x, t, &u, &mut f);
            let mut sum = 0.0;
            for v in &f {
                sum += *v;
            }
            let weighted: f64 = f.iter().zip(sys.mass_weights()).map(|(a, b)| a * b).sum();
            let control = weighted - sys.k0() - sys.k1() * u.iter().sum::<f64>();
            excess = excess.max(control);
            max_abs = max_abs.max(sum.abs());
            if sum > max_sum {
                max_sum = sum;
                witness = Some(Witness {
                    x,
                    t,
                    u: u.clone(),
                    index: None,
                    value: sum,
                });
            }
        }
    }
    MassReport {
        max_sum,
        max_abs_sum: max_abs,
        dissipative: max_sum <= TOLERANCE,
        conservative: max_abs <= TOLERANCE,
        mass_control_excess: excess,
        mass_control: excess <= TOLERANCE,
        witness,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IscReport {
    /// Estimate of `C` over `[0, R]^m`.
    pub estimate_base: f64,
    /// Estimate of `C` over `[0, 2R]^m`.
    pub estimate_doubled: f64,
    /// `max(estimate_base, estimate_doubled)`.
    pub c_estimate: f64,
    pub pass: bool,
    pub witness: Option<Witness>,
}

/// Estimates `C` in `Σ_{j≤i} a_ij f_j ≤ C (1 + Σ u_k)^r` as the largest
/// sampled quotient. Passes when the estimate is finite and grows by at most
/// 10% when the sampling radius doubles.
pub fn check_isc(sys: &ReactionSystem, cfg: &SamplerConfig) -> IscReport {
    let m = sys.species();
    let a = sys.isc_matrix();
    let r = sys.isc_order();
    let mut sampler = Sampler::new(*cfg, 3);
    let mut u = vec![0.0; m];
    let mut f = vec![0.0; m];
    let mut estimates = [f64::NEG_INFINITY; 2];
    let mut witness: Option<Witness> = None;
    for (slot, radius) in [cfg.radius, 2.0 * cfg.radius].into_iter().enumerate() {
        for _ in 0..cfg.samples.max(1) {
            let (x, t) = sampler.point(radius, &mut u);
            sys.rates(x, t, &u, &mut f);
            let scale = (1.0 + u.iter().sum::<f64>()).powf(r);
            for (i, row) in a.iter().enumerate() {
                let partial: f64 = row[..=i].iter().zip(&f[..=i]).map(|(a, f)| a * f).sum();
                let q = partial / scale;
                if q > estimates[slot] || q.is_nan() {
                    estimates[slot] = if q.is_nan() { f64::INFINITY } else { q };
                    if witness.as_ref().is_none_or(|w| q > w.value) {
                        witness = Some(Witness {
                            x,
                            t,
                            u: u.clone(),
                            index: Some(i),
                            value: q,
                        });
                    }
                }
            }
        }
    }
    let [base, doubled] = estimates.map(|e| e.max(0.0));
    let finite = base.is_finite() && doubled.is_finite();
    let stable = if base > 0.0 {
        doubled <= 1.1 * base
    } else {
        doubled <= TOLERANCE
    };
    IscReport {
        estimate_base: base,
        estimate_doubled: doubled,
        c_estimate: base.max(doubled),
        pass: finite && stable,
        witness,
    }
}
