//! Plateau cutoffs `φ = η³`, with `η` a C² quintic plateau.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, Grid1D};

/// Nodes where `φ` is at most this are excluded from the measured constant.
const PHI_FLOOR: f64 = 1e-14;

/// Quintic smoothstep `6t⁵ − 15t⁴ + 10t³` and its derivative on `[0, 1]`.
#[inline]
fn smoothstep(t: f64) -> (f64, f64) {
    let t2 = t * t;
    let value = t2 * t * (10.0 - 15.0 * t + 6.0 * t2);
    let slope = 30.0 * t2 * (1.0 - t) * (1.0 - t);
    (value, slope)
}

/// `η(s)`: 1 on `[−1, 1]`, 0 outside `(−2, 2)`, C² and monotone in between.
pub fn plateau_eta(s: f64) -> f64 {
    let a = s.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        // Round-off can push the smoothstep past 1 near the outer edge.
        (1.0 - smoothstep(a - 1.0).0).max(0.0)
    }
}

pub fn plateau_eta_derivative(s: f64) -> f64 {
    let a = s.abs();
    if a <= 1.0 || a >= 2.0 {
        0.0
    } else {
        -smoothstep(a - 1.0).1 * s.signum()
    }
}

/// `∫ η(s)³ ds` over the real line.
pub fn reference_bump_mass() -> f64 {
    // Composite Simpson on the transition layer; the integrand is a
    // polynomial of degree 15 there, so 2000 panels are far below round-off.
    let panels = 2000;
    let h = 1.0 / panels as f64;
    let g = |t: f64| (1.0 - smoothstep(t).0).powi(3);
    let mut acc = g(0.0) + g(1.0);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * g(k as f64 * h);
    }
    2.0 + 2.0 * acc * h / 3.0
}

/// A cutoff on a grid with its derivative and the measured constant `C_φ`
/// in `|φ'| ≤ C_φ φ^a`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffFunction {
    center: f64,
    radius: f64,
    support: (f64, f64),
    values: Field,
    derivative: Field,
    c_phi: f64,
    vanishing_exponent: f64,
}

/// Serializable summary without the node values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSummary {
    pub center: f64,
    pub radius: f64,
    pub c_phi: f64,
    pub vanishing_exponent: f64,
}

impl CutoffFunction {
    /// Measures `C_φ` and checks the bound at every node, including those
    /// below the measurement floor. `index` labels the function in errors.
    pub(crate) fn from_parts(
        center: f64,
        radius: f64,
        support: (f64, f64),
        values: Field,
        derivative: Field,
        vanishing_exponent: f64,
        index: usize,
    ) -> Result<Self> {
        let a = vanishing_exponent;
        let c_phi = values
            .values()
            .iter()
            .zip(derivative.values())
            .filter(|(phi, _)| **phi > PHI_FLOOR)
            .map(|(phi, d)| d.abs() / phi.powf(a))
            .fold(0.0_f64, f64::max);
        for (node, (phi, d)) in values.values().iter().zip(derivative.values()).enumerate() {
            let bound = c_phi * phi.max(0.0).powf(a);
            let slack = 1e-12 * (1.0 + bound);
            if !d.is_finite() || !phi.is_finite() || d.abs() > bound + slack {
                return Err(Error::CutoffVerification {
                    index,
                    node,
                    derivative: d.abs(),
                    bound,
                });
            }
        }
        if !c_phi.is_finite() {
            return Err(Error::CutoffVerification {
                index,
                node: 0,
                derivative: f64::INFINITY,
                bound: c_phi,
            });
        }
        Ok(Self {
            center,
            radius,
            support,
            values,
            derivative,
            c_phi,
            vanishing_exponent,
        })
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Interval outside which `φ` vanishes, clipped to `[0, L]`.
    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn values(&self) -> &Field {
        &self.values
    }

    pub fn derivative(&self) -> &Field {
        &self.derivative
    }

    pub fn c_phi(&self) -> f64 {
        self.c_phi
    }

    pub fn vanishing_exponent(&self) -> f64 {
        self.vanishing_exponent
    }

    pub fn grid(&self) -> &Grid1D {
        self.values.grid()
    }

    pub fn summary(&self) -> CutoffSummary {
        CutoffSummary {
            center: self.center,
            radius: self.radius,
            c_phi: self.c_phi,
            vanishing_exponent: self.vanishing_exponent,
        }
    }

    /// Whether node `k` lies in the closed support.
    pub fn covers(&self, k: usize) -> bool {
        let x = self.grid().x(k);
        x >= self.support.0 && x <= self.support.1
    }

    /// `∫ z φ dx`.
    pub fn localized_mass(&self, z: &Field) -> Result<f64> {
        z.zip_map(&self.values, |a, b| a * b)?.integrate()
    }
}

/// `φ_{ε,x₀}(x) = η((x − x₀)/ε)³`: equal to 1 on `[x₀ − ε, x₀ + ε]` and 0
/// outside `[x₀ − 2ε, x₀ + 2ε]`. Since `|φ'| = 3η²|η'|/ε`, the bound
/// `|φ'| ≤ C_φ φ^a` holds for every `a ≤ 2/3` with `C_φ ∝ 1/ε`.
pub fn make_cutoff(grid: Grid1D, eps: f64, x0: f64, a: f64) -> Result<CutoffFunction> {
    let length = grid.length();
    if !(eps > 0.0 && eps < length) {
        return Err(invalid(format!(
            "cutoff radius must lie in (0, {length}), got {eps}"
        )));
    }
    if !x0.is_finite() {
        return Err(invalid("cutoff centre must be finite"));
    }
    if !((1.0 / 3.0..2.0 / 3.0).contains(&a)) {
        return Err(invalid(format!(
            "vanishing exponent must lie in [1/3, 2/3), got {a}"
        )));
    }
    let values = Field::from_fn(grid, |x| plateau_eta((x - x0) / eps).powi(3));
    let derivative = Field::from_fn(grid, |x| {
        let s = (x - x0) / eps;
        let eta = plateau_eta(s);
        3.0 * eta * eta * plateau_eta_derivative(s) / eps
    });
    let support = ((x0 - 2.0 * eps).max(0.0), (x0 + 2.0 * eps).min(length));
    CutoffFunction::from_parts(x0, eps, support, values, derivative, a, 0)
}

/// `∫ z φ_{ε,x₀}` for a cutoff built by [`make_cutoff`].
pub fn localized_mass(z: &Field, phi: &CutoffFunction) -> Result<f64> {
    phi.localized_mass(z)
}

/// `max_{x₀} ∫ z φ_{ε,x₀}` over node centres, as a discrete correlation
/// with the sampled bump.
pub fn max_localized_mass(z: &Field, eps: f64) -> Result<f64> {
    let grid = *z.grid();
    if !(eps > 0.0 && eps < grid.length()) {
        return Err(invalid(format!(
            "cutoff radius must lie in (0, L), got {eps}"
        )));
    }
    z.ensure_finite()?;
    let n = grid.len();
    let h = grid.spacing();
    let reach = ((2.0 * eps / h).ceil() as usize).min(n - 1);
    let kernel: Vec<f64> = (0..=reach)
        .map(|j| plateau_eta(j as f64 * h / eps).powi(3))
        .collect();
    let weighted: Vec<f64> = (0..n).map(|k| grid.weight(k) * z.values()[k]).collect();
    let best = (0..n)
        .into_par_iter()
        .map(|c| {
            let lo = c.saturating_sub(reach);
            let hi = (c + reach).min(n - 1);
            (lo..=hi)
                .map(|k| weighted[k] * kernel[k.abs_diff(c)])
                .sum::<f64>()
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(best)
}
