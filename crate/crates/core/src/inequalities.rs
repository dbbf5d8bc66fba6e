//! Interpolation inequalities checked on seeded test-function ensembles,
//! the normalized-bump partition of unity, and the super-cubic margin `ξ`.
//!
//! The inequality constants are existential, so each check reports the
//! smallest constant that makes the inequality hold for one sample. A
//! constant is calibrated as the supremum over a training ensemble and
//! validated on a disjoint held-out ensemble.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{Field, Grid1D, WindowIntegrator};
use crate::morrey::{
    make_cutoff, morrey_norm, plateau_eta, plateau_eta_derivative, CutoffFunction, MorreyParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    /// Random cosine series `Σ a_k cos(kπx/L)`, compatible with Neumann data.
    Fourier,
    /// Sums of plateau bumps of random centre, width and height.
    Bumps,
    /// A Fourier sample, a bump sample, or their average, chosen per sample.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub modes: usize,
    pub bumps: usize,
    /// Coefficient magnitudes are drawn from `[amplitude_min, amplitude_max]`.
    pub amplitude_min: f64,
    pub amplitude_max: f64,
    pub seed: u64,
    pub samples: usize,
    /// Allow sign changes; otherwise every field is nonnegative.
    pub signed: bool,
    /// Smallest bump plateau half-width; `None` means four grid spacings.
    pub min_width: Option<f64>,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            kind: EnsembleKind::Mixed,
            modes: 8,
            bumps: 4,
            amplitude_min: 0.0,
            amplitude_max: 1.0,
            seed: 0,
            samples: 1000,
            signed: false,
            min_width: None,
        }
    }
}

impl EnsembleSpec {
    fn validate(&self, grid: &Grid1D) -> Result<()> {
        if self.samples == 0 {
            return Err(invalid("ensemble needs at least one sample"));
        }
        if !(self.amplitude_min.is_finite()
            && self.amplitude_max.is_finite()
            && 0.0 <= self.amplitude_min
            && self.amplitude_min <= self.amplitude_max)
        {
            return Err(invalid(
                "ensemble amplitudes need 0 <= amplitude_min <= amplitude_max, both finite",
            ));
        }
        if let Some(w) = self.min_width {
            if !(w > 0.0 && w <= grid.length() / 4.0) {
                return Err(invalid(format!("min_width must lie in (0, L/4], got {w}")));
            }
        }
        Ok(())
    }
}

/// Seeded test functions; sample `i` depends only on the seed and `i`.
pub fn generate_ensemble(grid: Grid1D, spec: &EnsembleSpec) -> Result<Vec<Field>> {
    spec.validate(&grid)?;
    Ok((0..spec.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            match spec.kind {
                EnsembleKind::Fourier => fourier(grid, spec, &mut rng),
                EnsembleKind::Bumps => bumps(grid, spec, &mut rng),
                EnsembleKind::Mixed => match rng.gen_range(0..3) {
                    0 => fourier(grid, spec, &mut rng),
                    1 => bumps(grid, spec, &mut rng),
                    _ => {
                        let a = fourier(grid, spec, &mut rng);
                        let b = bumps(grid, spec, &mut rng);
                        a.zip_map(&b, |x, y| 0.5 * (x + y)).expect("same grid")
                    }
                },
            }
        })
        .collect())
}

fn magnitude(spec: &EnsembleSpec, rng: &mut ChaCha8Rng) -> f64 {
    if spec.amplitude_max > spec.amplitude_min {
        rng.gen_range(spec.amplitude_min..=spec.amplitude_max)
    } else {
        spec.amplitude_min
    }
}

fn sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.gen::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn fourier(grid: Grid1D, spec: &EnsembleSpec, rng: &mut ChaCha8Rng) -> Field {
    let coeffs: Vec<f64> = (1..=spec.modes)
        .map(|k| sign(rng) * magnitude(spec, rng) / k as f64)
        .collect();
    // Nonnegative samples are lifted by the worst case of the series.
    let shift = if spec.signed {
        0.0
    } else {
        coeffs.iter().map(|a| a.abs()).sum()
    };
    let w = std::f64::consts::PI / grid.length();
    Field::from_fn(grid, |x| {
        let v = shift
            + coeffs
                .iter()
                .enumerate()
                .map(|(k, a)| a * ((k + 1) as f64 * w * x).cos())
                .sum::<f64>();
        // The lift makes unsigned samples nonnegative up to round-off.
        if spec.signed {
            v
        } else {
            v.max(0.0)
        }
    })
}

/// Bump sums with atoms at the extremal configurations: the count is
/// uniform in `1..=bumps`, widths lie on a dyadic ladder starting at the
/// minimum width, and a quarter of the centres sit on a wall. Supports are
/// kept disjoint, so a sample never needs a larger constant than its worst
/// single bump; overlapping stacks would form a continuum of shapes whose
/// supremum random sampling cannot resolve.
fn bumps(grid: Grid1D, spec: &EnsembleSpec, rng: &mut ChaCha8Rng) -> Field {
    let length = grid.length();
    let w_max = length / 4.0;
    let w_min = spec.min_width.unwrap_or(4.0 * grid.spacing()).min(w_max);
    let levels = (w_max / w_min).log2().floor() as i32 + 1;
    let mut values = vec![0.0; grid.len()];
    let mut placed: Vec<(f64, f64)> = Vec::new();
    let count = if spec.bumps == 0 {
        0
    } else {
        rng.gen_range(1..=spec.bumps)
    };
    for _ in 0..count {
        let width = w_min * 2f64.powi(rng.gen_range(0..levels));
        let center = if rng.gen_bool(0.25) {
            if rng.gen::<bool>() {
                0.0
            } else {
                length
            }
        } else {
            rng.gen_range(0.0..=length)
        };
        // Narrow bumps may be tall, up to the mass-preserving scaling.
        let concentration = rng.gen::<f64>();
        let height = magnitude(spec, rng) * (w_max / width).powf(concentration);
        let s = if spec.signed { sign(rng) } else { 1.0 };
        let support = (center - 2.0 * width, center + 2.0 * width);
        if placed.iter().any(|&(a, b)| support.0 < b && a < support.1) {
            continue;
        }
        placed.push(support);
        for (v, x) in values.iter_mut().zip(grid.nodes()) {
            *v += s * height * plateau_eta((x - center) / width).powi(3);
        }
    }
    Field::new(grid, values).expect("length matches grid")
}

/// `∫_{Ω₀} |u|` and `(∫_{Ω₀} u²)^{1/2}` over the support of `φ`.
///
/// Nodes more than one spacing outside the support are zeroed first, so
/// the prefix sums start at the window and a tiny local mass is not lost
/// to cancellation against the mass elsewhere.
fn local_norms(u: &Field, phi: &CutoffFunction) -> (f64, f64) {
    let (a, b) = phi.support();
    let grid = u.grid();
    let h = grid.spacing();
    let inside = |k: usize| {
        let x = grid.x(k);
        x >= a - h && x <= b + h
    };
    let density = |f: fn(f64) -> f64| {
        u.values()
            .iter()
            .enumerate()
            .map(move |(k, &v)| if inside(k) { f(v) } else { 0.0 })
    };
    let l1 = WindowIntegrator::with_density(grid, density(f64::abs)).between(a, b);
    let sq = WindowIntegrator::with_density(grid, density(|v| v * v)).between(a, b);
    (l1, sq.sqrt())
}

fn weighted_integral(phi: &CutoffFunction, density: impl Fn(usize) -> f64) -> Result<f64> {
    let grid = *phi.grid();
    let values: Vec<f64> = phi
        .values()
        .values()
        .iter()
        .enumerate()
        .map(|(k, p)| p * p * density(k))
        .collect();
    Field::new(grid, values)?.integrate()
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

/// Smallest `C` with
/// `∫ φ²u⁴ ≤ C ‖u‖²_{L¹(Ω₀)} (∫ φ²u_x² + C_φ³ ‖u‖²_{L¹(Ω₀)})`,
/// where `Ω₀` is the support of `φ`. Zero when both sides vanish.
pub fn check_key1(u: &Field, phi: &CutoffFunction) -> Result<f64> {
    u.ensure_same_grid(phi.values())?;
    let ux = u.derivative();
    let lhs = weighted_integral(phi, |k| u.values()[k].powi(4))?;
    let grad = weighted_integral(phi, |k| ux.values()[k].powi(2))?;
    let (l1, _) = local_norms(u, phi);
    let rhs = l1 * l1 * (grad + phi.c_phi().powi(3) * l1 * l1);
    Ok(ratio(lhs, rhs))
}

/// Smallest `C` with
/// `∫ φ²|u|^{4+δ} ≤ C (‖u‖_{L¹}^{2−δ} ‖u‖_{L²}^{2δ} ∫ φ²u_x² + C_φ^{3+δ} ‖u‖_{L¹}^{4+δ})`,
/// norms taken over the support of `φ`.
pub fn check_key2(u: &Field, phi: &CutoffFunction, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    u.ensure_same_grid(phi.values())?;
    let ux = u.derivative();
    let lhs = weighted_integral(phi, |k| u.values()[k].abs().powf(4.0 + delta))?;
    let grad = weighted_integral(phi, |k| ux.values()[k].powi(2))?;
    let (l1, l2) = local_norms(u, phi);
    let rhs = l1.powf(2.0 - delta) * l2.powf(2.0 * delta) * grad
        + phi.c_phi().powf(3.0 + delta) * l1.powf(4.0 + delta);
    Ok(ratio(lhs, rhs))
}

/// Vanishing exponent `(1 + δ)/(3 + δ)` of the cutoffs used with [`check_key2`].
pub fn key2_exponent(delta: f64) -> f64 {
    (1.0 + delta) / (3.0 + delta)
}

/// Cutoffs `φ_j` with `Σ_j φ_j² = 1` on `[0, L]`.
///
/// Centres sit at `x_j = jε` for `j = 0..=⌈L/ε − 1/2⌉`. The raw bumps
/// `w_j = η(2(x − x_j)/ε)³` have plateau half-width `ε/2` and support
/// `(x_j − ε, x_j + ε)`, so neighbouring plateaus cover the domain and
/// `Σ w_k² ≥ 1`. Each `φ_j = w_j / (Σ_k w_k²)^{1/2}` is checked against
/// `|φ_j'| ≤ C_j φ_j^{1/3}` at every node.
pub fn partition_of_unity(grid: Grid1D, eps: f64) -> Result<Vec<CutoffFunction>> {
    let length = grid.length();
    if !(eps > 0.0 && eps < length / 2.0) {
        return Err(invalid(format!(
            "partition spacing must lie in (0, L/2), got {eps}"
        )));
    }
    // Fewest centres whose plateaus reach the right wall.
    let count = (length / eps - 0.5).ceil().max(0.0) as usize + 1;
    let centers: Vec<f64> = (0..count).map(|j| j as f64 * eps).collect();
    let raw: Vec<(Vec<f64>, Vec<f64>)> = centers
        .iter()
        .map(|&c| {
            grid.nodes()
                .map(|x| {
                    let s = 2.0 * (x - c) / eps;
                    let eta = plateau_eta(s);
                    (
                        eta.powi(3),
                        3.0 * eta * eta * plateau_eta_derivative(s) * 2.0 / eps,
                    )
                })
                .unzip()
        })
        .collect();
    let n = grid.len();
    let mut norm = vec![0.0; n];
    let mut norm_slope = vec![0.0; n];
    for (w, dw) in &raw {
        for k in 0..n {
            norm[k] += w[k] * w[k];
            norm_slope[k] += 2.0 * w[k] * dw[k];
        }
    }
    raw.into_iter()
        .zip(&centers)
        .enumerate()
        .map(|(j, ((w, dw), &c))| {
            let values: Vec<f64> = (0..n).map(|k| w[k] / norm[k].sqrt()).collect();
            let slope: Vec<f64> = (0..n)
                .map(|k| {
                    let s = norm[k];
                    dw[k] / s.sqrt() - 0.5 * w[k] * norm_slope[k] / (s * s.sqrt())
                })
                .collect();
            CutoffFunction::from_parts(
                c,
                0.5 * eps,
                ((c - eps).max(0.0), (c + eps).min(length)),
                Field::new(grid, values)?,
                Field::new(grid, slope)?,
                1.0 / 3.0,
                j,
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpResidual {
    pub lhs: f64,
    pub morrey: f64,
    pub grad: f64,
    pub l1: f64,
    /// `∫u⁴ − ε_w ‖u‖²_{M^{1,δ}} ‖u_x‖² − C ‖u‖₁⁴`.
    pub residual: f64,
    pub pass: bool,
}

/// `∫ u⁴ ≤ ε_w ‖u‖²_{M^{1,δ}} ‖u_x‖²_{L²} + C ‖u‖⁴_{L¹}`.
pub fn check_interp_morrey(
    u: &Field,
    delta: f64,
    eps_weight: f64,
    c_cal: f64,
) -> Result<InterpResidual> {
    let parts = interp_parts(u, delta, eps_weight)?;
    let residual =
        parts.lhs - eps_weight * parts.morrey.powi(2) * parts.grad - c_cal * parts.l1.powi(4);
    Ok(InterpResidual {
        residual,
        pass: residual <= 0.0,
        ..parts
    })
}

fn interp_parts(u: &Field, delta: f64, eps_weight: f64) -> Result<InterpResidual> {
    if !(eps_weight > 0.0 && eps_weight.is_finite()) {
        return Err(invalid(format!(
            "eps_weight must be positive, got {eps_weight}"
        )));
    }
    Ok(InterpResidual {
        lhs: u.map(|v| v.powi(4)).integrate()?,
        morrey: morrey_norm(u, &MorreyParams::new(delta))?,
        grad: u.derivative().map(|v| v * v).integrate()?,
        l1: u.lp_norm(1.0)?,
        residual: 0.0,
        pass: true,
    })
}

/// Which inequality to calibrate, with its fixed parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "inequality", rename_all = "snake_case")]
pub enum InequalityId {
    /// Local quartic bound with cutoffs of radius `cutoff_radius` at `centers`.
    Key1 {
        cutoff_radius: f64,
        centers: Vec<f64>,
    },
    /// Local `4 + δ` bound; cutoffs use the exponent `(1 + δ)/(3 + δ)`.
    Key2 {
        delta: f64,
        cutoff_radius: f64,
        centers: Vec<f64>,
    },
    /// Global quartic bound through the Morrey norm.
    InterpMorrey { delta: f64, eps_weight: f64 },
}

impl InequalityId {
    pub fn name(&self) -> &'static str {
        match self {
            InequalityId::Key1 { .. } => "key1",
            InequalityId::Key2 { .. } => "key2",
            InequalityId::InterpMorrey { .. } => "interp_morrey",
        }
    }

    pub fn delta(&self) -> Option<f64> {
        match self {
            InequalityId::Key1 { .. } => None,
            InequalityId::Key2 { delta, .. } | InequalityId::InterpMorrey { delta, .. } => {
                Some(*delta)
            }
        }
    }

    /// Key inequalities with cutoffs at `L/4, L/2, 3L/4` of radius `L/8`.
    pub fn key1_default(grid: &Grid1D) -> Self {
        let l = grid.length();
        InequalityId::Key1 {
            cutoff_radius: l / 8.0,
            centers: vec![0.25 * l, 0.5 * l, 0.75 * l],
        }
    }

    pub fn key2_default(grid: &Grid1D, delta: f64) -> Self {
        let l = grid.length();
        InequalityId::Key2 {
            delta,
            cutoff_radius: l / 8.0,
            centers: vec![0.25 * l, 0.5 * l, 0.75 * l],
        }
    }
}

/// Evaluates samples against a prepared inequality.
struct Checker {
    id: InequalityId,
    cutoffs: Vec<CutoffFunction>,
}

impl Checker {
    fn new(grid: Grid1D, id: &InequalityId) -> Result<Self> {
        let cutoffs = match id {
            InequalityId::Key1 {
                cutoff_radius,
                centers,
            } => centers
                .iter()
                .map(|&c| make_cutoff(grid, *cutoff_radius, c, 1.0 / 3.0))
                .collect::<Result<Vec<_>>>()?,
            InequalityId::Key2 {
                delta,
                cutoff_radius,
                centers,
            } => {
                if !(*delta > 0.0 && *delta < 1.0) {
                    return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
                }
                centers
                    .iter()
                    .map(|&c| make_cutoff(grid, *cutoff_radius, c, key2_exponent(*delta)))
                    .collect::<Result<Vec<_>>>()?
            }
            InequalityId::InterpMorrey { delta, eps_weight } => {
                if !(*delta > 0.0 && *delta < 1.0) {
                    return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
                }
                if !(*eps_weight > 0.0 && eps_weight.is_finite()) {
                    return Err(invalid("eps_weight must be positive"));
                }
                Vec::new()
            }
        };
        if cutoffs.is_empty() && !matches!(id, InequalityId::InterpMorrey { .. }) {
            return Err(invalid("key inequalities need at least one cutoff centre"));
        }
        Ok(Self {
            id: id.clone(),
            cutoffs,
        })
    }

    /// Smallest constant that makes the inequality hold for `u`.
    fn minimal_constant(&self, u: &Field) -> Result<f64> {
        match &self.id {
            InequalityId::Key1 { .. } => self
                .cutoffs
                .iter()
                .map(|phi| check_key1(u, phi))
                .try_fold(0.0_f64, |m, r| r.map(|r| m.max(r))),
            InequalityId::Key2 { delta, .. } => self
                .cutoffs
                .iter()
                .map(|phi| check_key2(u, phi, *delta))
                .try_fold(0.0_f64, |m, r| r.map(|r| m.max(r))),
            InequalityId::InterpMorrey { delta, eps_weight } => {
                let p = interp_parts(u, *delta, *eps_weight)?;
                let excess = p.lhs - eps_weight * p.morrey.powi(2) * p.grad;
                Ok(if excess <= 0.0 {
                    0.0
                } else {
                    ratio(excess, p.l1.powi(4))
                })
            }
        }
    }
}

/// Supremum over the ensemble of the per-sample minimal constant.
pub fn calibrate_constant(ensemble: &[Field], id: &InequalityId) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(invalid("calibration needs a nonempty ensemble"));
    }
    let checker = Checker::new(*ensemble[0].grid(), id)?;
    ensemble
        .par_iter()
        .map(|u| checker.minimal_constant(u))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub inequality: String,
    pub checked: usize,
    /// Largest per-sample minimal constant.
    pub max_ratio: f64,
    /// Constant the samples were tested against.
    pub constant: f64,
    pub violations: usize,
    /// Sample index attaining `max_ratio`.
    pub witness: Option<usize>,
}

impl InequalityReport {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}

/// Counts samples that need a constant larger than `constant`.
pub fn validate_constant(
    ensemble: &[Field],
    id: &InequalityId,
    constant: f64,
) -> Result<InequalityReport> {
    if ensemble.is_empty() {
        return Err(invalid("validation needs a nonempty ensemble"));
    }
    let checker = Checker::new(*ensemble[0].grid(), id)?;
    let needed = ensemble
        .par_iter()
        .map(|u| checker.minimal_constant(u))
        .collect::<Result<Vec<_>>>()?;
    let (witness, max_ratio) = needed.iter().enumerate().fold(
        (None, 0.0_f64),
        |(w, m), (i, &v)| if v > m { (Some(i), v) } else { (w, m) },
    );
    let violations = needed
        .iter()
        .filter(|&&v| v > constant * (1.0 + 1e-12))
        .count();
    Ok(InequalityReport {
        inequality: id.name().to_string(),
        checked: ensemble.len(),
        max_ratio,
        constant,
        violations,
        witness,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiBound {
    /// Supremum of admissible `ξ`; the admissible set is `[0, ξ_max)`.
    pub xi_max: f64,
    /// The bound is not attained.
    pub strict: bool,
}

/// Largest `ξ ≥ 0` with `δ(2 − ξ) > ξ(3 + ξ)`: the positive root of
/// `ξ² + (3 + δ)ξ − 2δ = 0`.
pub fn xi_admissible(delta: f64) -> XiBound {
    if !(delta > 0.0) {
        return XiBound {
            xi_max: 0.0,
            strict: true,
        };
    }
    let b = 3.0 + delta;
    // Rationalized root, free of cancellation for small δ.
    XiBound {
        xi_max: 4.0 * delta / (b + (b * b + 8.0 * delta).sqrt()),
        strict: true,
    }
}
