//! Catalog of potentials, local nonlinearities and Hartree kernels.

mod hypotheses;
mod interval;
mod kernel;
mod nonlinearity;
mod potential;

use num_complex::Complex64;
use num_rational::Rational64;

pub use hypotheses::{check_hypotheses, Condition, HypothesisReport, Route, RouteCheck};
pub use interval::{Bound, Interval};
pub use kernel::{inverse_power_constant, kernel_radial_derivative, Kernel, KernelProfile};
pub use nonlinearity::Nonlinearity;
pub use potential::Potential;

use crate::error::{NlsError, Result};
use crate::exec;
use crate::grid::Grid;

/// Optional constants that some routes quantify over.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HypothesisConstants {
    pub l: Option<Rational64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub c: Option<f64>,
}

/// A `(V, f, W)` triple in `N` dimensions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelSpec {
    pub dims: usize,
    pub potential: Potential,
    pub local: Nonlinearity,
    pub kernel: Kernel,
    pub constants: HypothesisConstants,
}

impl ModelSpec {
    pub fn new(dims: usize, potential: Potential, local: Nonlinearity, kernel: Kernel) -> Result<Self> {
        let m = ModelSpec { dims, potential, local, kernel, constants: HypothesisConstants::default() };
        m.validate()?;
        Ok(m)
    }

    pub fn with_constants(mut self, constants: HypothesisConstants) -> Self {
        self.constants = constants;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dims) {
            return Err(NlsError::InvalidModel(format!("dims must be 1, 2 or 3, got {}", self.dims)));
        }
        self.potential.validate()?;
        self.local.validate()?;
        self.kernel.validate(self.dims)
    }

    pub fn hypotheses(&self) -> HypothesisReport {
        check_hypotheses(self)
    }
}

/// Closest rational with denominator at most `max_den`, if within `1e-12` of `x`.
pub fn rational_from_f64(x: f64, max_den: i64) -> Result<Rational64> {
    if !x.is_finite() {
        return Err(NlsError::Undecidable(format!("exponent {x} is not finite")));
    }
    // continued-fraction convergents
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut v = x;
    for _ in 0..64 {
        let a = v.floor();
        if a.abs() > 1e15 {
            break;
        }
        let a = a as i64;
        let h2 = a.checked_mul(h1).and_then(|t| t.checked_add(h0));
        let k2 = a.checked_mul(k1).and_then(|t| t.checked_add(k0));
        let (Some(h2), Some(k2)) = (h2, k2) else { break };
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (h1 as f64 / k1 as f64 - x).abs() <= 1e-12 * x.abs().max(1.0) {
            return Ok(Rational64::new(h1, k1));
        }
        let frac = v - a as f64;
        if frac.abs() < 1e-15 {
            break;
        }
        v = 1.0 / frac;
    }
    if k1 > 0 && (h1 as f64 / k1 as f64 - x).abs() <= 1e-12 * x.abs().max(1.0) {
        return Ok(Rational64::new(h1, k1));
    }
    Err(NlsError::Undecidable(format!("exponent {x} has no rational form with denominator <= {max_den}")))
}

/// `V` and `x . grad V` sampled on the grid.
pub fn eval_potential(model: &ModelSpec, grid: &Grid) -> (Vec<f64>, Vec<f64>) {
    let r2 = grid.r_squared();
    let mut v = vec![0.0; grid.len()];
    let mut xv = vec![0.0; grid.len()];
    exec::for_each_mut(&mut v, |i, o| *o = model.potential.value(r2[i]));
    exec::for_each_mut(&mut xv, |i, o| *o = model.potential.radial_derivative(r2[i]));
    (v, xv)
}

/// Fourier multipliers of `W` and `x . grad W` on one grid, at one dilation.
#[derive(Clone, Debug)]
pub struct HartreeOperator {
    grid: Grid,
    zero: bool,
    kernel: Vec<f64>,
    radial: Vec<f64>,
}

impl HartreeOperator {
    pub fn new(kernel: &Kernel, grid: &Grid) -> Self {
        Self::dilated(kernel, grid, 1.0)
    }

    /// Multipliers of `W(z / lambda)` and `(x . grad W)(z / lambda)`.
    pub fn dilated(kernel: &Kernel, grid: &Grid, lambda: f64) -> Self {
        if kernel.is_zero() {
            return HartreeOperator { grid: grid.clone(), zero: true, kernel: vec![], radial: vec![] };
        }
        let base = KernelProfile::Base(*kernel).multiplier(grid, lambda);
        let radial = kernel_radial_derivative(kernel).multiplier(grid, lambda);
        HartreeOperator { grid: grid.clone(), zero: false, kernel: base, radial }
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn kernel_multiplier(&self) -> &[f64] {
        &self.kernel
    }

    pub fn radial_multiplier(&self) -> &[f64] {
        &self.radial
    }

    /// `W * rho` on the grid.
    pub fn convolve(&self, rho: &[f64]) -> Vec<f64> {
        if self.zero {
            return vec![0.0; rho.len()];
        }
        apply_multiplier(&self.grid, &self.kernel, rho)
    }

    /// `(x . grad W) * rho` on the grid.
    pub fn convolve_radial(&self, rho: &[f64]) -> Vec<f64> {
        if self.zero {
            return vec![0.0; rho.len()];
        }
        apply_multiplier(&self.grid, &self.radial, rho)
    }

    /// `(int (W * rho) rho, int ((x . grad W) * rho) rho)` from the density spectrum.
    pub fn pair_integrals(&self, rho: &[f64]) -> (f64, f64) {
        if self.zero {
            return (0.0, 0.0);
        }
        let c = density_spectrum(&self.grid, rho);
        self.pair_integrals_from_spectrum(&c)
    }

    /// Pair integrals from Fourier-series coefficients of the density.
    pub fn pair_integrals_from_spectrum(&self, coeffs: &[Complex64]) -> (f64, f64) {
        if self.zero {
            return (0.0, 0.0);
        }
        let (w, r) = (&self.kernel, &self.radial);
        let [a, b] = exec::sum_many::<2, _>(coeffs.len(), |i, acc| {
            let q = coeffs[i].norm_sqr();
            acc[0] += w[i] * q;
            acc[1] += r[i] * q;
        });
        let vol = self.grid.volume();
        (a * vol, b * vol)
    }
}

/// Fourier-series coefficients of a real density.
pub fn density_spectrum(grid: &Grid, rho: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = rho.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid.fft_forward(&mut buf);
    let s = 1.0 / grid.len() as f64;
    exec::for_each_mut(&mut buf, |_, v| *v *= s);
    buf
}

fn apply_multiplier(grid: &Grid, mult: &[f64], rho: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex64> = rho.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid.fft_forward(&mut buf);
    exec::for_each_mut(&mut buf, |i, v| *v *= mult[i]);
    grid.fft_inverse(&mut buf);
    buf.iter().map(|c| c.re).collect()
}

/// `W * rho` for the model's kernel.
pub fn hartree_convolve(model: &ModelSpec, grid: &Grid, rho: &[f64]) -> Result<Vec<f64>> {
    if rho.len() != grid.len() {
        return Err(NlsError::SizeMismatch { expected: grid.len(), found: rho.len() });
    }
    if let Some(i) = rho.iter().position(|&v| !(v >= -1e-12)) {
        return Err(NlsError::CorruptField(format!("density negative or NaN at cell {i}")));
    }
    Ok(HartreeOperator::new(&model.kernel, grid).convolve(rho))
}
