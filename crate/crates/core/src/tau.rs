//! Periodic calculus on the fast variable τ ∈ [0, 2π).
//!
//! Fields are sampled on the nodes τ_l = 2πl/N and carried in physical
//! space; [`TauGrid`] moves them to and from Fourier coefficients
//! ĉ_k = (1/N) Σ_l f(τ_l) e^{−ikτ_l}.
//!
//! Sign convention: a multiplier g(Υ), Υ = σ ∂_τ, acts on mode k through
//! g(−ikσ). With this choice φ₀ at scale σ is the backward shift
//! f(τ) ↦ f(τ − σ), which is the exact flow of ∂_t + (1/ε)∂_τ = 0 over a
//! time step h = εσ.
//!
//! The Nyquist mode k = N/2 is stored once. Every symbol is averaged over
//! ±N/2 on that mode, which keeps real fields real.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{CpdError, Result};
use crate::phi::{factorial, phi};

/// Default number of τ nodes.
pub const DEFAULT_N_TAU: usize = 64;

/// A real vector field of τ sampled on the grid, stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TauField {
    n_tau: usize,
    dim: usize,
    values: Vec<f64>,
}

impl TauField {
    pub fn zeros(n_tau: usize, dim: usize) -> Self {
        TauField {
            n_tau,
            dim,
            values: vec![0.0; n_tau * dim],
        }
    }

    /// Field equal to `c` at every node.
    pub fn constant(n_tau: usize, c: &[f64]) -> Self {
        let mut f = TauField::zeros(n_tau, c.len());
        for (comp, &v) in c.iter().enumerate() {
            f.component_mut(comp).fill(v);
        }
        f
    }

    /// Samples `g(τ_l, out)` at every node.
    pub fn from_fn(n_tau: usize, dim: usize, mut g: impl FnMut(f64, &mut [f64])) -> Self {
        let mut f = TauField::zeros(n_tau, dim);
        let mut buf = vec![0.0; dim];
        for l in 0..n_tau {
            g(node(n_tau, l), &mut buf);
            f.set_node(l, &buf);
        }
        f
    }

    /// Builds a field from component-major samples.
    pub fn from_values(n_tau: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_tau * dim {
            return Err(CpdError::DimensionMismatch {
                expected: n_tau * dim,
                got: values.len(),
            });
        }
        Ok(TauField {
            n_tau,
            dim,
            values,
        })
    }

    pub fn n_tau(&self) -> usize {
        self.n_tau
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.values[c * self.n_tau..(c + 1) * self.n_tau]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.values[c * self.n_tau..(c + 1) * self.n_tau]
    }

    pub fn node_values(&self, l: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.read_node(l, &mut out);
        out
    }

    pub fn read_node(&self, l: usize, out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.values[c * self.n_tau + l];
        }
    }

    pub fn set_node(&mut self, l: usize, v: &[f64]) {
        for (c, &x) in v.iter().enumerate() {
            self.values[c * self.n_tau + l] = x;
        }
    }

    /// Max-norm over nodes and components.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max-norm restricted to components `range`.
    pub fn sup_norm_of(&self, range: std::ops::Range<usize>) -> f64 {
        range
            .flat_map(|c| self.component(c).iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, a: f64) -> TauField {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &TauField) -> TauField {
        assert_eq!(self.values.len(), other.values.len());
        let mut out = self.clone();
        for (o, x) in out.values.iter_mut().zip(&other.values) {
            *o += a * x;
        }
        out
    }

    /// Adds a constant vector to every node.
    pub fn add_constant(&self, c: &[f64]) -> TauField {
        let mut out = self.clone();
        for (comp, &v) in c.iter().enumerate() {
            out.component_mut(comp).iter_mut().for_each(|x| *x += v);
        }
        out
    }

    /// Components `range` as a new field.
    pub fn slice(&self, range: std::ops::Range<usize>) -> TauField {
        let dim = range.len();
        let values = self.values[range.start * self.n_tau..range.end * self.n_tau].to_vec();
        TauField {
            n_tau: self.n_tau,
            dim,
            values,
        }
    }

    /// Stacks the components of `a` on top of those of `b`.
    pub fn stack(a: &TauField, b: &TauField) -> TauField {
        assert_eq!(a.n_tau, b.n_tau);
        let mut values = a.values.clone();
        values.extend_from_slice(&b.values);
        TauField {
            n_tau: a.n_tau,
            dim: a.dim + b.dim,
            values,
        }
    }

    pub fn max_abs_diff(&self, other: &TauField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Node τ_l = 2πl/N.
pub fn node(n_tau: usize, l: usize) -> f64 {
    2.0 * PI * l as f64 / n_tau as f64
}

/// Fourier coefficients of a [`TauField`], FFT order per component.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    n_tau: usize,
    dim: usize,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(n_tau: usize, dim: usize) -> Self {
        Spectrum {
            n_tau,
            dim,
            coeffs: vec![Complex64::new(0.0, 0.0); n_tau * dim],
        }
    }

    pub fn n_tau(&self) -> usize {
        self.n_tau
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.coeffs[c * self.n_tau..(c + 1) * self.n_tau]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.coeffs[c * self.n_tau..(c + 1) * self.n_tau]
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient of wavenumber `k` in component `c`.
    pub fn mode(&self, c: usize, k: i64) -> Complex64 {
        let n = self.n_tau as i64;
        self.component(c)[k.rem_euclid(n) as usize]
    }

    /// Multiplies mode index `m` of every component by `symbol[m]`.
    pub fn apply_symbol(&mut self, symbol: &[Complex64]) {
        let n = self.n_tau;
        for chunk in self.coeffs.chunks_mut(n) {
            for (x, s) in chunk.iter_mut().zip(symbol) {
                *x *= s;
            }
        }
    }

    /// `self += a·symbol∘other`.
    pub fn add_symbol_times(&mut self, a: f64, symbol: &[Complex64], other: &Spectrum) {
        let n = self.n_tau;
        for (dst, src) in self.coeffs.chunks_mut(n).zip(other.coeffs.chunks(n)) {
            for ((d, s), x) in dst.iter_mut().zip(symbol).zip(src) {
                *d += a * s * x;
            }
        }
    }
}

/// One term α·φ_k(γ·z) of a multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiTerm {
    pub weight: f64,
    pub order: usize,
    pub scale: f64,
}

/// A finite combination Σ α_m φ_{k_m}(γ_m z) used as a τ-Fourier multiplier.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSpec {
    pub terms: Vec<PhiTerm>,
}

impl MultiplierSpec {
    pub fn zero() -> Self {
        MultiplierSpec { terms: Vec::new() }
    }

    /// φ_k(γ z).
    pub fn phi(order: usize, scale: f64) -> Self {
        MultiplierSpec {
            terms: vec![PhiTerm {
                weight: 1.0,
                order,
                scale,
            }],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.weight == 0.0)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.terms
            .iter()
            .map(|t| t.weight * phi(t.order, t.scale * z))
            .sum()
    }

    /// Σ α_m/k_m!, the value at z = 0.
    pub fn at_zero(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.weight / factorial(t.order))
            .sum()
    }

    /// Merges equal (order, scale) terms and drops zero weights.
    pub fn simplified(mut self) -> Self {
        let mut out: Vec<PhiTerm> = Vec::new();
        for t in self.terms.drain(..) {
            match out
                .iter_mut()
                .find(|o| o.order == t.order && o.scale == t.scale)
            {
                Some(o) => o.weight += t.weight,
                None => out.push(t),
            }
        }
        out.retain(|t| t.weight.abs() > 1e-300);
        MultiplierSpec { terms: out }
    }
}

impl Add for MultiplierSpec {
    type Output = MultiplierSpec;
    fn add(mut self, rhs: MultiplierSpec) -> MultiplierSpec {
        self.terms.extend(rhs.terms);
        self.simplified()
    }
}

impl Sub for MultiplierSpec {
    type Output = MultiplierSpec;
    fn sub(self, rhs: MultiplierSpec) -> MultiplierSpec {
        self + (-rhs)
    }
}

impl Neg for MultiplierSpec {
    type Output = MultiplierSpec;
    fn neg(self) -> MultiplierSpec {
        self * -1.0
    }
}

impl Mul<MultiplierSpec> for f64 {
    type Output = MultiplierSpec;
    fn mul(self, rhs: MultiplierSpec) -> MultiplierSpec {
        rhs * self
    }
}

impl Mul<f64> for MultiplierSpec {
    type Output = MultiplierSpec;
    fn mul(mut self, a: f64) -> MultiplierSpec {
        self.terms.iter_mut().for_each(|t| t.weight *= a);
        self
    }
}

impl fmt::Display for MultiplierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            let sign = if t.weight < 0.0 { "-" } else if i > 0 { "+" } else { "" };
            if i > 0 {
                write!(f, " {sign} ")?;
            } else {
                write!(f, "{sign}")?;
            }
            let w = t.weight.abs();
            if w != 1.0 {
                write!(f, "{w}*")?;
            }
            if t.scale == 1.0 {
                write!(f, "phi{}(z)", t.order)?;
            } else {
                write!(f, "phi{}({}z)", t.order, t.scale)?;
            }
        }
        Ok(())
    }
}

/// FFT plans and wavenumbers for one grid size.
#[derive(Clone)]
pub struct TauGrid {
    n_tau: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TauGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TauGrid").field("n_tau", &self.n_tau).finish()
    }
}

impl TauGrid {
    pub fn new(n_tau: usize) -> Result<Self> {
        if n_tau == 0 || n_tau % 2 != 0 {
            return Err(CpdError::BadGrid(n_tau));
        }
        let mut planner = FftPlanner::new();
        Ok(TauGrid {
            n_tau,
            forward: planner.plan_fft_forward(n_tau),
            inverse: planner.plan_fft_inverse(n_tau),
        })
    }

    pub fn n_tau(&self) -> usize {
        self.n_tau
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_tau).map(|l| node(self.n_tau, l)).collect()
    }

    /// Signed wavenumber of FFT index `m`; the Nyquist index maps to +N/2.
    pub fn wavenumber(&self, m: usize) -> i64 {
        let n = self.n_tau;
        if m <= n / 2 {
            m as i64
        } else {
            m as i64 - n as i64
        }
    }

    fn check(&self, n: usize) {
        assert_eq!(n, self.n_tau, "field grid does not match TauGrid");
    }

    pub fn forward(&self, f: &TauField) -> Spectrum {
        self.check(f.n_tau);
        let n = self.n_tau;
        let mut coeffs: Vec<Complex64> =
            f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for chunk in coeffs.chunks_mut(n) {
            self.forward.process(chunk);
        }
        let inv = 1.0 / n as f64;
        coeffs.iter_mut().for_each(|c| *c *= inv);
        Spectrum {
            n_tau: n,
            dim: f.dim,
            coeffs,
        }
    }

    /// Synthesizes node values; imaginary round-off is discarded.
    pub fn inverse(&self, s: &Spectrum) -> TauField {
        self.check(s.n_tau);
        let n = self.n_tau;
        let mut buf = s.coeffs.clone();
        for chunk in buf.chunks_mut(n) {
            self.inverse.process(chunk);
        }
        TauField {
            n_tau: n,
            dim: s.dim,
            values: buf.into_iter().map(|c| c.re).collect(),
        }
    }

    /// Symbol table g(−ikσ) over FFT indices, Nyquist averaged over ±N/2.
    pub fn symbol(&self, g: &MultiplierSpec, scale: f64) -> Vec<Complex64> {
        self.symbol_with(|z| g.eval(z), scale)
    }

    pub fn symbol_with(&self, g: impl Fn(Complex64) -> Complex64, scale: f64) -> Vec<Complex64> {
        let n = self.n_tau;
        (0..n)
            .map(|m| {
                let k = self.wavenumber(m) as f64;
                if m == n / 2 {
                    0.5 * (g(Complex64::new(0.0, -k * scale)) + g(Complex64::new(0.0, k * scale)))
                } else {
                    g(Complex64::new(0.0, -k * scale))
                }
            })
            .collect()
    }

    /// Π: the mean over τ of each component.
    pub fn average(&self, f: &TauField) -> Vec<f64> {
        self.check(f.n_tau);
        (0..f.dim)
            .map(|c| f.component(c).iter().sum::<f64>() / self.n_tau as f64)
            .collect()
    }

    /// (I − Π)f.
    pub fn remove_mean(&self, f: &TauField) -> TauField {
        let mean = self.average(f);
        let neg: Vec<f64> = mean.iter().map(|m| -m).collect();
        f.add_constant(&neg)
    }

    /// L⁻¹: the mean-free antiderivative, mode k ↦ ĉ_k/(ik), mode 0 ↦ 0.
    ///
    /// Rejects input whose mean exceeds 1e−12 relative to its size.
    pub fn linv(&self, f: &TauField) -> Result<TauField> {
        let mean = self.average(f);
        let worst = mean.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if worst > 1e-12 * f.sup_norm().max(1.0) {
            return Err(CpdError::NonZeroMean { mean: worst });
        }
        let mut s = self.forward(f);
        let symbol = self.linv_symbol();
        s.apply_symbol(&symbol);
        Ok(self.inverse(&s))
    }

    fn linv_symbol(&self) -> Vec<Complex64> {
        let n = self.n_tau;
        (0..n)
            .map(|m| {
                let k = self.wavenumber(m);
                if k == 0 || m == n / 2 {
                    // 1/(ik) averaged over ±N/2 vanishes.
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, -1.0 / k as f64)
                }
            })
            .collect()
    }

    /// Spectral ∂_τ; the Nyquist mode is annihilated.
    pub fn derivative(&self, f: &TauField) -> TauField {
        let n = self.n_tau;
        let symbol: Vec<Complex64> = (0..n)
            .map(|m| {
                if m == n / 2 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, self.wavenumber(m) as f64)
                }
            })
            .collect();
        let mut s = self.forward(f);
        s.apply_symbol(&symbol);
        self.inverse(&s)
    }

    /// g(σ∂_τ)f with the backward-shift sign convention.
    pub fn apply_multiplier(&self, g: &MultiplierSpec, scale: f64, f: &TauField) -> TauField {
        let mut s = self.forward(f);
        s.apply_symbol(&self.symbol(g, scale));
        self.inverse(&s)
    }

    /// Trigonometric interpolant Σ_k ĉ_k e^{ikτ*}; the Nyquist mode
    /// contributes ĉ_{N/2} cos(Nτ*/2).
    pub fn evaluate_at(&self, f: &TauField, tau_star: f64) -> Vec<f64> {
        let s = self.forward(f);
        self.evaluate_spectrum(&s, tau_star)
    }

    pub fn evaluate_spectrum(&self, s: &Spectrum, tau_star: f64) -> Vec<f64> {
        let n = self.n_tau;
        let tau = tau_star.rem_euclid(2.0 * PI);
        let phases: Vec<Complex64> = (0..n)
            .map(|m| {
                let k = self.wavenumber(m) as f64;
                if m == n / 2 {
                    Complex64::new((k * tau).cos(), 0.0)
                } else {
                    Complex64::from_polar(1.0, k * tau)
                }
            })
            .collect();
        (0..s.dim)
            .map(|c| {
                s.component(c)
                    .iter()
                    .zip(&phases)
                    .map(|(a, p)| a * p)
                    .sum::<Complex64>()
                    .re
            })
            .collect()
    }
}
