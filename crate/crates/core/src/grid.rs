//! Uniform node-centred mesh on `(0, L)` and scalar fields sampled on it.
//!
//! Nodes sit at `x_k = k h` for `k = 0..n`, endpoints included. All
//! integrals use the composite trapezoid rule, whose weights are the
//! lengths of the dual cells `[x_k - h/2, x_k + h/2] ∩ [0, L]`. Norms and
//! windowed integrals reuse the same weights so that discrete identities
//! hold exactly at the discrete level.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    length: f64,
    nodes: usize,
}

impl Grid1D {
    pub fn new(length: f64, nodes: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(invalid(format!(
                "grid length must be positive, got {length}"
            )));
        }
        if nodes < 3 {
            return Err(invalid(format!("grid needs at least 3 nodes, got {nodes}")));
        }
        Ok(Self { length, nodes })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.length / (self.nodes - 1) as f64
    }

    #[inline]
    pub fn x(&self, k: usize) -> f64 {
        // Last node pinned to L so that h (n - 1) = L holds bitwise at the end.
        if k + 1 == self.nodes {
            self.length
        } else {
            k as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.nodes).map(move |k| self.x(k))
    }

    /// Trapezoid weight of node `k` (dual-cell length).
    #[inline]
    pub fn weight(&self, k: usize) -> f64 {
        let h = self.spacing();
        if k == 0 || k + 1 == self.nodes {
            0.5 * h
        } else {
            h
        }
    }

    /// Trapezoid sum of raw nodal values. No finiteness check.
    pub(crate) fn quadrature(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.nodes);
        let n = values.len();
        let interior: f64 = values[1..n - 1].iter().sum();
        self.spacing() * (interior + 0.5 * (values[0] + values[n - 1]))
    }
}

/// A scalar function sampled at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "field has {} values but the grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        Self { grid, values }
    }

    pub fn constant(grid: Grid1D, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// First non-finite node, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }

    pub fn is_finite(&self) -> bool {
        self.first_non_finite().is_none()
    }

    pub(crate) fn ensure_finite(&self) -> Result<()> {
        match self.first_non_finite() {
            Some(node) => Err(Error::NonFinite {
                node,
                species: None,
            }),
            None => Ok(()),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.ensure_same_grid(other)?;
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub(crate) fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(invalid("fields live on different grids"));
        }
        Ok(())
    }

    /// Composite trapezoid approximation of the integral over `(0, L)`.
    pub fn integrate(&self) -> Result<f64> {
        self.ensure_finite()?;
        Ok(self.grid.quadrature(&self.values))
    }

    /// Second-order finite differences: centred in the interior, one-sided
    /// three-point stencils at the two endpoints.
    pub fn derivative(&self) -> Field {
        let h = self.grid.spacing();
        let v = &self.values;
        let n = v.len();
        let mut out = vec![0.0; n];
        // Written in differences so that constants map to exactly zero.
        out[0] = (4.0 * (v[1] - v[0]) - (v[2] - v[0])) / (2.0 * h);
        for k in 1..n - 1 {
            out[k] = (v[k + 1] - v[k - 1]) / (2.0 * h);
        }
        out[n - 1] = (4.0 * (v[n - 1] - v[n - 2]) - (v[n - 1] - v[n - 3])) / (2.0 * h);
        Field {
            grid: self.grid,
            values: out,
        }
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(invalid(format!("L^p norm requires p >= 1, got {p}")));
        }
        self.ensure_finite()?;
        if p == 1.0 {
            let abs: Vec<f64> = self.values.iter().map(|v| v.abs()).collect();
            return Ok(self.grid.quadrature(&abs));
        }
        let powered: Vec<f64> = self.values.iter().map(|v| v.abs().powf(p)).collect();
        Ok(self.grid.quadrature(&powered).powf(1.0 / p))
    }

    pub fn linf_norm(&self) -> Result<f64> {
        self.ensure_finite()?;
        Ok(self.values.iter().fold(0.0, |m, v| m.max(v.abs())))
    }

    /// `x,value` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,value")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", fmt_f64(self.grid.x(k)), fmt_f64(*v))?;
        }
        Ok(())
    }
}

/// 17 significant digits in scientific notation; round-trips every `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Integral of `|f|` over arbitrary sub-intervals, treating the field as
/// piecewise constant on dual cells. Over the whole domain it reproduces the
/// trapezoid rule exactly.
///
/// Positions are measured in half-spacings: half-cell segment `s` covers
/// `[s h/2, (s+1) h/2]` and belongs to node `(s + 1) / 2`.
#[derive(Debug, Clone)]
pub struct WindowIntegrator {
    half: f64,
    segments: usize,
    prefix: Vec<f64>,
}

impl WindowIntegrator {
    pub fn new(f: &Field) -> Self {
        Self::with_density(f.grid(), f.values().iter().map(|v| v.abs()))
    }

    pub(crate) fn with_density(grid: &Grid1D, density: impl Iterator<Item = f64>) -> Self {
        let half = 0.5 * grid.spacing();
        let segments = 2 * (grid.len() - 1);
        let density: Vec<f64> = density.collect();
        let mut prefix = Vec::with_capacity(segments + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for s in 0..segments {
            acc += density[s.div_ceil(2)] * half;
            prefix.push(acc);
        }
        Self {
            half,
            segments,
            prefix,
        }
    }

    pub fn total(&self) -> f64 {
        self.prefix[self.segments]
    }

    /// Integral over half-spacing positions `[lo, hi]`, clipped to the domain.
    pub fn between_positions(&self, lo: isize, hi: isize) -> f64 {
        let max = self.segments as isize;
        let lo = lo.clamp(0, max) as usize;
        let hi = hi.clamp(0, max) as usize;
        if hi <= lo {
            return 0.0;
        }
        self.prefix[hi] - self.prefix[lo]
    }

    /// Integral over `[a, b] ∩ [0, L]` for real endpoints.
    pub fn between(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.cumulative(b) - self.cumulative(a)
    }

    fn cumulative(&self, x: f64) -> f64 {
        let pos = x / self.half;
        if pos <= 0.0 {
            return 0.0;
        }
        if pos >= self.segments as f64 {
            return self.total();
        }
        let s = pos.floor() as usize;
        let frac = pos - s as f64;
        let seg = self.prefix[s + 1] - self.prefix[s];
        self.prefix[s] + frac * seg
    }
}
