//! Pointwise reaction terms `f(x, t, u)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Reaction nonlinearity for `m` species, evaluated pointwise.
///
/// Callers pass nonnegative `u`; implementations never see negative inputs.
pub trait Kinetics: Send + Sync + fmt::Debug {
    fn species(&self) -> usize;

    fn eval(&self, x: f64, t: f64, u: &[f64], out: &mut [f64]);

    /// Row-major `m × m` Jacobian `∂f_i/∂u_j`. The default uses one-sided
    /// differences, which stay inside the nonnegative orthant.
    fn jacobian(&self, x: f64, t: f64, u: &[f64], out: &mut [f64]) {
        let m = self.species();
        let mut base = vec![0.0; m];
        let mut bumped = vec![0.0; m];
        let mut v = u.to_vec();
        self.eval(x, t, u, &mut base);
        for j in 0..m {
            let step = 1e-7 * (1.0 + u[j].abs());
            v[j] = u[j] + step;
            self.eval(x, t, &v, &mut bumped);
            v[j] = u[j];
            for i in 0..m {
                out[i * m + j] = (bumped[i] - base[i]) / step;
            }
        }
    }

    /// Polynomial term tables, when the kinetics has that form.
    fn polynomial(&self) -> Option<&PolynomialKinetics> {
        None
    }
}

/// `coeff · Π u_j^{exp_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    #[serde(rename = "c")]
    pub coeff: f64,
    #[serde(rename = "exp")]
    pub exponents: Vec<u32>,
}

impl Monomial {
    pub fn new(coeff: f64, exponents: Vec<u32>) -> Self {
        Self { coeff, exponents }
    }

    #[inline]
    fn eval(&self, u: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(u)
            .fold(self.coeff, |acc, (&e, &v)| {
                if e == 0 {
                    acc
                } else {
                    acc * v.powi(e as i32)
                }
            })
    }

    #[inline]
    fn partial(&self, u: &[f64], j: usize) -> f64 {
        let e = self.exponents[j];
        if e == 0 {
            return 0.0;
        }
        let mut acc = self.coeff * e as f64;
        for (k, (&ek, &v)) in self.exponents.iter().zip(u).enumerate() {
            let power = if k == j { ek - 1 } else { ek };
            if power > 0 {
                acc *= v.powi(power as i32);
            }
        }
        acc
    }

    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }
}

/// One polynomial per species, given as term tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialKinetics {
    terms: Vec<Vec<Monomial>>,
}

impl PolynomialKinetics {
    /// Every monomial must have one exponent per species.
    pub fn new(terms: Vec<Vec<Monomial>>) -> crate::Result<Self> {
        let m = terms.len();
        if m == 0 {
            return Err(crate::error::invalid(
                "polynomial kinetics needs at least one species",
            ));
        }
        for (i, row) in terms.iter().enumerate() {
            for term in row {
                if term.exponents.len() != m {
                    return Err(crate::error::invalid(format!(
                        "species {} has a term with {} exponents, expected {m}",
                        i + 1,
                        term.exponents.len()
                    )));
                }
                if !term.coeff.is_finite() {
                    return Err(crate::error::invalid(format!(
                        "species {} has a non-finite coefficient",
                        i + 1
                    )));
                }
            }
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[Vec<Monomial>] {
        &self.terms
    }

    pub fn max_degree(&self) -> u32 {
        self.terms
            .iter()
            .flatten()
            .map(Monomial::degree)
            .max()
            .unwrap_or(0)
    }
}

impl Kinetics for PolynomialKinetics {
    fn species(&self) -> usize {
        self.terms.len()
    }

    fn eval(&self, _x: f64, _t: f64, u: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(&self.terms) {
            *o = row.iter().map(|term| term.eval(u)).sum();
        }
    }

    fn jacobian(&self, _x: f64, _t: f64, u: &[f64], out: &mut [f64]) {
        let m = self.terms.len();
        for (i, row) in self.terms.iter().enumerate() {
            for j in 0..m {
                out[i * m + j] = row.iter().map(|term| term.partial(u, j)).sum();
            }
        }
    }

    fn polynomial(&self) -> Option<&PolynomialKinetics> {
        Some(self)
    }
}

/// Appends a species whose rate is minus the sum of the wrapped rates, so
/// the total rate vanishes identically. The wrapped rates ignore the new
/// species.
///
/// The closing rate is the negation of the very same left-to-right sum used
/// when the rates are totalled, so cancellation is exact in floating point.
#[derive(Debug, Clone)]
pub struct ConservativeClosure {
    inner: Arc<dyn Kinetics>,
}

impl ConservativeClosure {
    pub fn new(inner: Arc<dyn Kinetics>) -> Self {
        Self { inner }
    }
}

impl Kinetics for ConservativeClosure {
    fn species(&self) -> usize {
        self.inner.species() + 1
    }

    fn eval(&self, x: f64, t: f64, u: &[f64], out: &mut [f64]) {
        let m = self.inner.species();
        self.inner.eval(x, t, &u[..m], &mut out[..m]);
        let mut total = 0.0;
        for v in &out[..m] {
            total += *v;
        }
        out[m] = -total;
    }

    fn jacobian(&self, x: f64, t: f64, u: &[f64], out: &mut [f64]) {
        let m = self.inner.species();
        let full = m + 1;
        let mut inner = vec![0.0; m * m];
        self.inner.jacobian(x, t, &u[..m], &mut inner);
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            for j in 0..m {
                out[i * full + j] = inner[i * m + j];
                out[m * full + j] -= inner[i * m + j];
            }
        }
    }
}

/// Rates of `y = e^{-k t} u`: `g_i(x,t,y) = e^{-k t} f_i(x,t,e^{k t} y) - k y_i`.
#[derive(Debug, Clone)]
pub struct ExponentialRescaling {
    inner: Arc<dyn Kinetics>,
    rate: f64,
}

impl ExponentialRescaling {
    pub fn new(inner: Arc<dyn Kinetics>, rate: f64) -> Self {
        Self { inner, rate }
    }
}

impl Kinetics for ExponentialRescaling {
    fn species(&self) -> usize {
        self.inner.species()
    }

    fn eval(&self, x: f64, t: f64, y: &[f64], out: &mut [f64]) {
        let grow = (self.rate * t).exp();
        let u: Vec<f64> = y.iter().map(|v| v * grow).collect();
        self.inner.eval(x, t, &u, out);
        for (o, v) in out.iter_mut().zip(y) {
            *o = *o / grow - self.rate * v;
        }
    }

    fn jacobian(&self, x: f64, t: f64, y: &[f64], out: &mut [f64]) {
        // Chain rule: e^{-kt} J_f(e^{kt} y) e^{kt} - k I = J_f(u) - k I.
        let m = self.species();
        let grow = (self.rate * t).exp();
        let u: Vec<f64> = y.iter().map(|v| v * grow).collect();
        self.inner.jacobian(x, t, &u, out);
        for i in 0..m {
            out[i * m + i] -= self.rate;
        }
    }
}

type RateFn = dyn Fn(f64, f64, &[f64], &mut [f64]) + Send + Sync;

/// Kinetics from a closure, for forced problems whose rates depend on
/// position and time (e.g. manufactured solutions).
#[derive(Clone)]
pub struct FnKinetics {
    species: usize,
    rate: Arc<RateFn>,
}

impl FnKinetics {
    pub fn new(
        species: usize,
        rate: impl Fn(f64, f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            species,
            rate: Arc::new(rate),
        }
    }
}

impl fmt::Debug for FnKinetics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnKinetics")
            .field("species", &self.species)
            .finish_non_exhaustive()
    }
}

impl Kinetics for FnKinetics {
    fn species(&self) -> usize {
        self.species
    }

    fn eval(&self, x: f64, t: f64, u: &[f64], out: &mut [f64]) {
        (self.rate)(x, t, u, out)
    }
}
