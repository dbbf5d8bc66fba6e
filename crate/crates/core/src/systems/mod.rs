//! Reaction–diffusion systems `∂_t u_i − d_i ∂_xx u_i = f_i(x, t, u)`,
//! built-in presets, and sampling checks for the structural assumptions
//! (quasi-positivity, mass dissipation / control, intermediate sums).

mod checks;
mod config;
mod kinetics;

use std::sync::Arc;

pub use checks::{
    check_isc, check_mass_dissipation, check_quasi_positivity, IscReport, MassReport,
    QuasiPositivityReport, SamplerConfig, Witness,
};
pub use config::{PresetConfig, SystemConfig, TableConfig};
pub use kinetics::{
    ConservativeClosure, ExponentialRescaling, FnKinetics, Kinetics, Monomial, PolynomialKinetics,
};

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, Grid1D};

#[derive(Debug, Clone)]
pub struct ReactionSystem {
    name: String,
    diffusion: Vec<f64>,
    kinetics: Arc<dyn Kinetics>,
    isc_matrix: Vec<Vec<f64>>,
    isc_order: f64,
    growth_order: f64,
    mass_weights: Vec<f64>,
    k0: f64,
    k1: f64,
}

impl ReactionSystem {
    /// Defaults: identity intermediate-sum matrix with `r = 1`, growth
    /// order 1, unit mass weights, `k0 = k1 = 0`.
    pub fn new(
        name: impl Into<String>,
        diffusion: Vec<f64>,
        kinetics: Arc<dyn Kinetics>,
    ) -> Result<Self> {
        let m = diffusion.len();
        if m == 0 {
            return Err(invalid("a system needs at least one species"));
        }
        if kinetics.species() != m {
            return Err(invalid(format!(
                "kinetics has {} species but {m} diffusion coefficients were given",
                kinetics.species()
            )));
        }
        if let Some(i) = diffusion.iter().position(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(invalid(format!(
                "diffusion coefficient d_{} must be positive",
                i + 1
            )));
        }
        let identity = (0..m)
            .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Ok(Self {
            name: name.into(),
            diffusion,
            kinetics,
            isc_matrix: identity,
            isc_order: 1.0,
            growth_order: 1.0,
            mass_weights: vec![1.0; m],
            k0: 0.0,
            k1: 0.0,
        })
    }

    pub fn with_isc(mut self, matrix: Vec<Vec<f64>>, order: f64) -> Result<Self> {
        let m = self.species();
        if matrix.len() != m || matrix.iter().any(|row| row.len() != m) {
            return Err(invalid(format!("ISC matrix must be {m}x{m}")));
        }
        for (i, row) in matrix.iter().enumerate() {
            for (j, &a) in row.iter().enumerate() {
                if j > i && a != 0.0 {
                    return Err(invalid(format!(
                        "ISC matrix must be lower triangular; a[{i}][{j}] = {a}"
                    )));
                }
                if !(a.is_finite() && a >= 0.0) {
                    return Err(invalid(format!(
                        "ISC matrix entry a[{i}][{j}] must be nonnegative"
                    )));
                }
            }
            if row[i] <= 0.0 {
                return Err(invalid(format!(
                    "ISC diagonal a[{i}][{i}] must be positive"
                )));
            }
        }
        if !(order.is_finite() && order >= 1.0) {
            return Err(invalid(format!("ISC order r must be >= 1, got {order}")));
        }
        self.isc_matrix = matrix;
        self.isc_order = order;
        Ok(self)
    }

    pub fn with_growth_order(mut self, ell: f64) -> Result<Self> {
        if !(ell.is_finite() && ell > 0.0) {
            return Err(invalid(format!("growth order must be positive, got {ell}")));
        }
        self.growth_order = ell;
        Ok(self)
    }

    pub fn with_mass_control(mut self, weights: Vec<f64>, k0: f64, k1: f64) -> Result<Self> {
        if weights.len() != self.species() {
            return Err(invalid("mass weights must have one entry per species"));
        }
        if weights.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(invalid("mass weights must be positive"));
        }
        if !(k0.is_finite() && k0 >= 0.0) || !k1.is_finite() {
            return Err(invalid("mass-control constants need k0 >= 0 and finite k1"));
        }
        self.mass_weights = weights;
        self.k0 = k0;
        self.k1 = k1;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn species(&self) -> usize {
        self.diffusion.len()
    }

    pub fn diffusion(&self) -> &[f64] {
        &self.diffusion
    }

    pub fn kinetics(&self) -> &Arc<dyn Kinetics> {
        &self.kinetics
    }

    pub fn isc_matrix(&self) -> &[Vec<f64>] {
        &self.isc_matrix
    }

    pub fn isc_order(&self) -> f64 {
        self.isc_order
    }

    pub fn growth_order(&self) -> f64 {
        self.growth_order
    }

    pub fn mass_weights(&self) -> &[f64] {
        &self.mass_weights
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    /// Pointwise rates with negative inputs clamped to zero.
    pub fn rates(&self, x: f64, t: f64, u: &[f64], out: &mut [f64]) {
        if u.iter().any(|v| *v < 0.0) {
            let clamped: Vec<f64> = u.iter().map(|v| v.max(0.0)).collect();
            self.kinetics.eval(x, t, &clamped, out);
        } else {
            self.kinetics.eval(x, t, u, out);
        }
    }
}

/// Built-in systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    /// `f ≡ 0`.
    Heat { species: usize },
    /// `f_1 = u_2³ − u_1³`, `f_2 = −f_1`.
    CubicExchange,
    /// `f_1 = −u_1 u_2²`, `f_2 = u_1 u_2² − u_2`.
    CubicAutocatalysis,
    /// Cubic exchange plus a unit source on species 1.
    MassControl,
    /// `f_1 = u_2^r − u_1^r`, `f_2 = −f_1`.
    PowerExchange { order: u32 },
    /// Single species, `f = u²`. Violates mass dissipation and blows up.
    QuadraticBlowup,
    /// Single species, `f ≡ −1`. Violates quasi-positivity.
    Adversarial,
}

impl Preset {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "heat" => Preset::Heat { species: 1 },
            "cubic_exchange" => Preset::CubicExchange,
            "cubic_autocatalysis" => Preset::CubicAutocatalysis,
            "mass_control" => Preset::MassControl,
            "power_exchange" => Preset::PowerExchange { order: 3 },
            "quadratic_blowup" => Preset::QuadraticBlowup,
            "adversarial" => Preset::Adversarial,
            _ => return None,
        })
    }

    pub const NAMES: [&'static str; 7] = [
        "heat",
        "cubic_exchange",
        "cubic_autocatalysis",
        "mass_control",
        "power_exchange",
        "quadratic_blowup",
        "adversarial",
    ];

    pub fn build(self) -> ReactionSystem {
        self.try_build().expect("preset parameters are valid")
    }

    fn try_build(self) -> Result<ReactionSystem> {
        let mono = Monomial::new;
        match self {
            Preset::Heat { species } => {
                let poly = PolynomialKinetics::new(vec![Vec::new(); species.max(1)])?;
                ReactionSystem::new("heat", vec![1.0; species.max(1)], Arc::new(poly))
            }
            Preset::CubicExchange | Preset::MassControl | Preset::PowerExchange { .. } => {
                let (name, order) = match self {
                    Preset::CubicExchange => ("cubic_exchange", 3),
                    Preset::MassControl => ("mass_control", 3),
                    Preset::PowerExchange { order } => ("power_exchange", order.max(1)),
                    _ => unreachable!(),
                };
                let mut first = vec![mono(1.0, vec![0, order]), mono(-1.0, vec![order, 0])];
                if self == Preset::MassControl {
                    first.push(mono(1.0, vec![0, 0]));
                }
                let second = vec![mono(1.0, vec![order, 0]), mono(-1.0, vec![0, order])];
                let poly = PolynomialKinetics::new(vec![first, second])?;
                let sys = ReactionSystem::new(name, vec![1.0, 0.1], Arc::new(poly))?
                    .with_isc(vec![vec![1.0, 0.0], vec![1.0, 1.0]], order as f64)?
                    .with_growth_order(order as f64)?;
                if self == Preset::MassControl {
                    sys.with_mass_control(vec![1.0, 1.0], 1.0, 0.0)
                } else {
                    Ok(sys)
                }
            }
            Preset::CubicAutocatalysis => {
                let poly = PolynomialKinetics::new(vec![
                    vec![mono(-1.0, vec![1, 2])],
                    vec![mono(1.0, vec![1, 2]), mono(-1.0, vec![0, 1])],
                ])?;
                ReactionSystem::new("cubic_autocatalysis", vec![1.0, 0.1], Arc::new(poly))?
                    .with_isc(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 3.0)?
                    .with_growth_order(3.0)
            }
            Preset::QuadraticBlowup => {
                let poly = PolynomialKinetics::new(vec![vec![mono(1.0, vec![2])]])?;
                ReactionSystem::new("quadratic_blowup", vec![1.0], Arc::new(poly))?
                    .with_isc(vec![vec![1.0]], 2.0)?
                    .with_growth_order(2.0)
            }
            Preset::Adversarial => {
                let poly = PolynomialKinetics::new(vec![vec![mono(-1.0, vec![0])]])?;
                ReactionSystem::new("adversarial", vec![1.0], Arc::new(poly))
            }
        }
    }
}

/// The `m` species at one instant, all on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    time: f64,
    species: Vec<Field>,
}

impl StateVector {
    pub fn new(time: f64, species: Vec<Field>) -> Result<Self> {
        if species.is_empty() {
            return Err(invalid("a state needs at least one species"));
        }
        let grid = *species[0].grid();
        if species.iter().any(|f| *f.grid() != grid) {
            return Err(invalid("all species must share one grid"));
        }
        if !time.is_finite() {
            return Err(invalid("state time must be finite"));
        }
        Ok(Self { time, species })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn grid(&self) -> &Grid1D {
        self.species[0].grid()
    }

    pub fn species_count(&self) -> usize {
        self.species.len()
    }

    pub fn species(&self) -> &[Field] {
        &self.species
    }

    pub fn field(&self, i: usize) -> &Field {
        &self.species[i]
    }

    pub fn into_species(self) -> Vec<Field> {
        self.species
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// Values of every species at node `k`.
    pub fn at_node(&self, k: usize, out: &mut [f64]) {
        for (o, f) in out.iter_mut().zip(&self.species) {
            *o = f.values()[k];
        }
    }

    /// `z = Σ_i u_i`.
    pub fn total(&self) -> Field {
        self.weighted_sum(&vec![1.0; self.species.len()])
    }

    /// `Σ_i c_i u_i`.
    pub fn weighted_sum(&self, weights: &[f64]) -> Field {
        let grid = *self.grid();
        let mut values = vec![0.0; grid.len()];
        for (f, c) in self.species.iter().zip(weights) {
            for (acc, v) in values.iter_mut().zip(f.values()) {
                *acc += c * v;
            }
        }
        Field::new(grid, values).expect("length matches grid")
    }

    /// Largest `‖u_i‖_∞`, with `∞` for non-finite entries.
    pub fn max_linf(&self) -> f64 {
        self.species
            .iter()
            .flat_map(|f| f.values())
            .fold(0.0, |m, v| {
                if v.is_finite() {
                    m.max(v.abs())
                } else {
                    f64::INFINITY
                }
            })
    }

    /// Mass `∫ Σ u_i` by the trapezoid rule, summed species by species.
    pub fn total_mass(&self) -> Result<f64> {
        self.species.iter().map(Field::integrate).sum()
    }

    pub fn extended_with_zero_species(&self) -> StateVector {
        let mut species = self.species.clone();
        species.push(Field::zeros(*self.grid()));
        StateVector {
            time: self.time,
            species,
        }
    }
}

/// Pointwise `f_i(x_k, t, u(x_k))` for every species. Negative state entries
/// are clamped to zero before evaluation.
pub fn evaluate_reactions(sys: &ReactionSystem, state: &StateVector) -> Result<Vec<Field>> {
    let m = sys.species();
    if state.species_count() != m {
        return Err(invalid(format!(
            "state has {} species, system has {m}",
            state.species_count()
        )));
    }
    let grid = *state.grid();
    let mut out: Vec<Vec<f64>> = vec![vec![0.0; grid.len()]; m];
    let mut u = vec![0.0; m];
    let mut f = vec![0.0; m];
    for k in 0..grid.len() {
        state.at_node(k, &mut u);
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                node: k,
                species: Some(i),
            });
        }
        sys.rates(grid.x(k), state.time(), &u, &mut f);
        for i in 0..m {
            if !f[i].is_finite() {
                return Err(Error::ReactionOverflow {
                    node: k,
                    species: i,
                    value: f[i],
                });
            }
            out[i][k] = f[i];
        }
    }
    Ok(out
        .into_iter()
        .map(|v| Field::new(grid, v).expect("length matches grid"))
        .collect())
}

/// Adds species `m+1` with unit diffusion and rate `−Σ_{j≤m} f_j`, giving a
/// system whose rates sum to zero identically. The intermediate-sum matrix
/// gains a row of ones, so the new row's sum is `0`.
pub fn augment_conservative(sys: &ReactionSystem) -> ReactionSystem {
    let m = sys.species();
    let mut diffusion = sys.diffusion.clone();
    diffusion.push(1.0);
    let mut isc: Vec<Vec<f64>> = sys
        .isc_matrix
        .iter()
        .map(|row| {
            let mut r = row.clone();
            r.push(0.0);
            r
        })
        .collect();
    isc.push(vec![1.0; m + 1]);
    let mut weights = sys.mass_weights.clone();
    weights.push(1.0);
    ReactionSystem {
        name: format!("{}+closure", sys.name),
        diffusion,
        kinetics: Arc::new(ConservativeClosure::new(Arc::clone(&sys.kinetics))),
        isc_matrix: isc,
        isc_order: sys.isc_order,
        growth_order: sys.growth_order,
        mass_weights: weights,
        k0: sys.k0,
        k1: sys.k1,
    }
}

/// System satisfied by `y = e^{−k1 t} u` when `u` solves `sys`, with
/// `k1` taken from the mass-control constants.
pub fn rescaled_system(sys: &ReactionSystem) -> ReactionSystem {
    let k1 = sys.k1;
    ReactionSystem {
        name: format!("{}-rescaled", sys.name),
        kinetics: Arc::new(ExponentialRescaling::new(Arc::clone(&sys.kinetics), k1)),
        ..sys.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RescaleDirection {
    /// `u ↦ e^{−k1 t} u`.
    Forward,
    /// `y ↦ e^{k1 t} y`.
    Inverse,
}

pub fn rescale_exponential(
    state: &StateVector,
    k1: f64,
    direction: RescaleDirection,
) -> Result<StateVector> {
    let exponent = k1 * state.time();
    if exponent.abs() > 700.0 {
        return Err(Error::ExponentialRange(exponent.abs()));
    }
    let factor = match direction {
        RescaleDirection::Forward => (-exponent).exp(),
        RescaleDirection::Inverse => exponent.exp(),
    };
    Ok(StateVector {
        time: state.time,
        species: state.species.iter().map(|f| f.scaled(factor)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn const_state(grid: Grid1D, t: f64, values: &[f64]) -> StateVector {
        StateVector::new(
            t,
            values.iter().map(|&c| Field::constant(grid, c)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn heat_rates_vanish() {
        let g = Grid1D::new(1.0, 11).unwrap();
        let sys = Preset::Heat { species: 1 }.build();
        let s = StateVector::new(0.3, vec![Field::from_fn(g, |x| 1.0 + x * x)]).unwrap();
        let f = evaluate_reactions(&sys, &s).unwrap();
        assert!(f[0].values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cubic_exchange_rates() {
        let g = Grid1D::new(1.0, 5).unwrap();
        let sys = Preset::CubicExchange.build();
        let f = evaluate_reactions(&sys, &const_state(g, 0.0, &[1.0, 1.0])).unwrap();
        assert!(f.iter().all(|fi| fi.values().iter().all(|&v| v == 0.0)));
        let f = evaluate_reactions(&sys, &const_state(g, 0.0, &[0.0, 2.0])).unwrap();
        assert_eq!(f[0].values()[2], 8.0);
        assert_eq!(f[1].values()[2], -8.0);
    }

    #[test]
    fn negative_entries_are_clamped() {
        let g = Grid1D::new(1.0, 5).unwrap();
        let sys = Preset::CubicExchange.build();
        let f = evaluate_reactions(&sys, &const_state(g, 0.0, &[-1e-12, 2.0])).unwrap();
        assert_eq!(f[0].values()[0], 8.0);
    }

    #[test]
    fn overflow_reports_node_and_species() {
        let g = Grid1D::new(1.0, 5).unwrap();
        let sys = Preset::QuadraticBlowup.build();
        let mut v = vec![1.0; 5];
        v[3] = 1e200;
        let s = StateVector::new(0.0, vec![Field::new(g, v).unwrap()]).unwrap();
        match evaluate_reactions(&sys, &s) {
            Err(Error::ReactionOverflow { node, species, .. }) => {
                assert_eq!((node, species), (3, 0));
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn isc_matrix_validation() {
        let sys = Preset::CubicExchange.build();
        assert!(sys
            .clone()
            .with_isc(vec![vec![1.0, 1.0], vec![0.0, 1.0]], 3.0)
            .is_err());
        assert!(sys
            .clone()
            .with_isc(vec![vec![0.0, 0.0], vec![1.0, 1.0]], 3.0)
            .is_err());
        assert!(sys
            .clone()
            .with_isc(vec![vec![1.0, 0.0], vec![-1.0, 1.0]], 3.0)
            .is_err());
        assert!(sys
            .with_isc(vec![vec![1.0, 0.0], vec![1.0, 1.0]], 0.5)
            .is_err());
    }

    #[test]
    fn system_validation() {
        let poly = Arc::new(PolynomialKinetics::new(vec![vec![]]).unwrap());
        assert!(ReactionSystem::new("x", vec![0.0], poly.clone()).is_err());
        assert!(ReactionSystem::new("x", vec![1.0, 1.0], poly.clone()).is_err());
        let sys = ReactionSystem::new("x", vec![1.0], poly).unwrap();
        assert_eq!(sys.isc_matrix(), &[vec![1.0]]);
        assert!(sys.clone().with_mass_control(vec![0.0], 0.0, 0.0).is_err());
        assert!(sys.with_mass_control(vec![1.0], -1.0, 0.0).is_err());
    }

    #[test]
    fn augmentation_of_autocatalysis() {
        let g = Grid1D::new(1.0, 7).unwrap();
        let aug = augment_conservative(&Preset::CubicAutocatalysis.build());
        assert_eq!(aug.species(), 3);
        assert_eq!(aug.diffusion(), &[1.0, 0.1, 1.0]);
        assert_eq!(aug.isc_matrix()[2], vec![1.0, 1.0, 1.0]);
        let s = const_state(g, 0.0, &[0.7, 1.9, 0.0]);
        let f = evaluate_reactions(&aug, &s).unwrap();
        assert_relative_eq!(f[2].values()[0], 1.9, max_relative = 1e-15);
        for k in 0..g.len() {
            let sum = f[0].values()[k] + f[1].values()[k] + f[2].values()[k];
            assert_eq!(sum, 0.0);
        }
    }

    #[test]
    fn augmentation_of_conservative_system_is_inert() {
        let g = Grid1D::new(1.0, 7).unwrap();
        let aug = augment_conservative(&Preset::CubicExchange.build());
        let f = evaluate_reactions(&aug, &const_state(g, 0.0, &[0.3, 2.2, 0.0])).unwrap();
        assert!(f[2].values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn rescaling_examples() {
        let g = Grid1D::new(1.0, 5).unwrap();
        let s = const_state(g, 0.7, &[2.0, 3.0]);
        assert_eq!(
            rescale_exponential(&s, 0.0, RescaleDirection::Forward).unwrap(),
            s
        );
        let s0 = const_state(g, 0.0, &[2.0]);
        assert_eq!(
            rescale_exponential(&s0, 5.0, RescaleDirection::Inverse).unwrap(),
            s0
        );
        let s = const_state(g, 2f64.ln(), &[2.0]);
        let y = rescale_exponential(&s, 1.0, RescaleDirection::Forward).unwrap();
        for v in y.field(0).values() {
            assert_relative_eq!(*v, 1.0, max_relative = 1e-15);
        }
        let far = const_state(g, 800.0, &[1.0]);
        assert_eq!(
            rescale_exponential(&far, 1.0, RescaleDirection::Forward),
            Err(Error::ExponentialRange(800.0))
        );
    }

    #[test]
    fn rescaled_rates_follow_chain_rule() {
        let sys = Preset::MassControl
            .build()
            .with_mass_control(vec![1.0, 1.0], 1.0, 0.4)
            .unwrap();
        let y = rescaled_system(&sys);
        let t = 0.9;
        let yv = [0.5, 1.5];
        let grow = (0.4f64 * t).exp();
        let mut g = [0.0; 2];
        let mut f = [0.0; 2];
        y.rates(0.0, t, &yv, &mut g);
        sys.rates(0.0, t, &[yv[0] * grow, yv[1] * grow], &mut f);
        for i in 0..2 {
            assert_relative_eq!(g[i], f[i] / grow - 0.4 * yv[i], max_relative = 1e-14);
        }
    }

    proptest! {
        #[test]
        fn rescale_round_trip(vals in prop::collection::vec(0.0f64..1e3, 3..20), k1 in -5.0f64..5.0, t in 0.0f64..50.0) {
            let g = Grid1D::new(2.0, vals.len()).unwrap();
            let s = StateVector::new(t, vec![Field::new(g, vals).unwrap()]).unwrap();
            let y = rescale_exponential(&s, k1, RescaleDirection::Forward).unwrap();
            let back = rescale_exponential(&y, k1, RescaleDirection::Inverse).unwrap();
            for (a, b) in back.field(0).values().iter().zip(s.field(0).values()) {
                prop_assert!((a - b).abs() <= 1e-14 * b.abs());
            }
        }
    }
}
