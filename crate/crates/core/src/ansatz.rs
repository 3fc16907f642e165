//! Closed-form initial data.

use num_complex::Complex64;

use crate::grid::{ComplexField, Grid};

/// `amp * exp(-|x|^2 / (2 width^2)) * exp(-i sigma |x|^2 / 2)`.
///
/// A positive `sigma` focuses the field: `J'(0) = -4 sigma J(0)`.
pub fn gaussian(grid: &Grid, amp: f64, width: f64, sigma: f64) -> ComplexField {
    ComplexField::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Complex64::from_polar(amp * (-0.5 * r2 / (width * width)).exp(), -0.5 * sigma * r2)
    })
}

/// Gaussian of unit L2 mass with the given width.
pub fn unit_mass_gaussian(grid: &Grid, width: f64) -> ComplexField {
    let nd = grid.dims() as f64;
    let amp = (std::f64::consts::PI * width * width).powf(-nd / 4.0);
    gaussian(grid, amp, width, 0.0)
}

/// Multiply by `exp(-i sigma |x|^2 / 2)`.
pub fn with_quadratic_phase(u: &ComplexField, sigma: f64) -> ComplexField {
    let grid = u.grid();
    let r2 = grid.r_squared();
    let values = u.values().iter().zip(r2).map(|(v, &q)| v * Complex64::from_polar(1.0, -0.5 * sigma * q)).collect();
    ComplexField::new(grid.clone(), values).expect("same grid")
}

/// Positive solution of `-w'' + 2 omega w = w^{2p+1}` on the line:
/// `(2 omega (p+1))^{1/(2p)} sech^{1/p}(p sqrt(2 omega) x)`.
pub fn power_soliton(omega: f64, p: f64, x: f64) -> f64 {
    let amp = (2.0 * omega * (p + 1.0)).powf(0.5 / p);
    let z = p * (2.0 * omega).sqrt() * x;
    // sech computed from exp(-|z|) to stay finite far out
    let e = (-z.abs()).exp();
    amp * (2.0 * e / (1.0 + e * e)).powf(1.0 / p)
}

pub fn power_soliton_field(grid: &Grid, omega: f64, p: f64) -> ComplexField {
    ComplexField::from_real_fn(grid, |x| power_soliton(omega, p, x[0]))
}
