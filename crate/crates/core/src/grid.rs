//! Periodic tensor grids, complex fields and the spectral machinery on them.
//!
//! The box is `[-L/2, L/2)^N` sampled at `M` nodes per axis (nodes include the
//! origin). Fields are stored row-major with the last axis contiguous.
//! Integrals are `h^N`-weighted sums; spectral coefficients are Fourier-series
//! coefficients `c_k = DFT(u)_k / M^N`, so Parseval reads
//! `sum |u_j|^2 h^N = L^N sum |c_k|^2`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{NlsError, Result};
use crate::exec;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

struct GridInner {
    dims: usize,
    extent: f64,
    points: usize,
    spacing: f64,
    coords: Vec<f64>,
    wavenumbers: Vec<f64>,
    k2: Vec<f64>,
    r2: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid. Cloning is cheap; FFT plans are shared.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dims", &self.dims())
            .field("extent", &self.extent())
            .field("points", &self.points())
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.dims() == other.dims()
                && self.points() == other.points()
                && self.extent().to_bits() == other.extent().to_bits())
    }
}

/// Build a grid with `points` nodes per axis on a box of side `extent`.
pub fn make_grid(dims: usize, extent: f64, points: usize) -> Result<Grid> {
    Grid::new(dims, extent, points)
}

impl Grid {
    pub fn new(dims: usize, extent: f64, points: usize) -> Result<Self> {
        if !(1..=3).contains(&dims) {
            return Err(NlsError::InvalidGrid(format!("dims must be 1, 2 or 3, got {dims}")));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(NlsError::InvalidGrid(format!("points per axis must be a power of two >= 8, got {points}")));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(NlsError::InvalidGrid(format!("extent must be positive, got {extent}")));
        }
        let spacing = extent / points as f64;
        let coords: Vec<f64> = (0..points).map(|j| -extent / 2.0 + j as f64 * spacing).collect();
        let dk = 2.0 * std::f64::consts::PI / extent;
        let half = points / 2;
        let wavenumbers: Vec<f64> =
            (0..points).map(|m| if m < half { m as f64 * dk } else { (m as f64 - points as f64) * dk }).collect();
        let len = points.pow(dims as u32);
        let mut k2 = vec![0.0; len];
        let mut r2 = vec![0.0; len];
        for i in 0..len {
            let mut rem = i;
            let mut kk = 0.0;
            let mut xx = 0.0;
            for _ in 0..dims {
                let a = rem % points;
                rem /= points;
                kk += wavenumbers[a] * wavenumbers[a];
                xx += coords[a] * coords[a];
            }
            k2[i] = kk;
            r2[i] = xx;
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(points);
        let inverse = planner.plan_fft_inverse(points);
        Ok(Self {
            inner: Arc::new(GridInner { dims, extent, points, spacing, coords, wavenumbers, k2, r2, forward, inverse }),
        })
    }

    pub fn dims(&self) -> usize {
        self.inner.dims
    }

    pub fn extent(&self) -> f64 {
        self.inner.extent
    }

    pub fn points(&self) -> usize {
        self.inner.points
    }

    pub fn spacing(&self) -> f64 {
        self.inner.spacing
    }

    /// Total number of cells, `M^N`.
    pub fn len(&self) -> usize {
        self.inner.k2.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight per cell, `h^N`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dims() as i32)
    }

    /// Box volume `L^N`.
    pub fn volume(&self) -> f64 {
        self.extent().powi(self.dims() as i32)
    }

    /// Node coordinates along one axis.
    pub fn coords(&self) -> &[f64] {
        &self.inner.coords
    }

    /// Per-axis wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.inner.wavenumbers
    }

    /// `|k|^2` for every spectral index.
    pub fn k_squared(&self) -> &[f64] {
        &self.inner.k2
    }

    /// `|x|^2` for every cell.
    pub fn r_squared(&self) -> &[f64] {
        &self.inner.r2
    }

    /// Per-axis indices of a flat index, axis 0 first.
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let m = self.points();
        let n = self.dims();
        let mut out = [0usize; 3];
        let mut rem = flat;
        for a in (0..n).rev() {
            out[a] = rem % m;
            rem /= m;
        }
        out
    }

    /// Cell-center position of a flat index; unused axes are zero.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; 3];
        for a in 0..self.dims() {
            x[a] = self.inner.coords[idx[a]];
        }
        x
    }

    /// Wavevector of a flat spectral index; unused axes are zero.
    pub fn wavevector(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let mut k = [0.0; 3];
        for a in 0..self.dims() {
            k[a] = self.inner.wavenumbers[idx[a]];
        }
        k
    }

    /// Unnormalized forward DFT, in place.
    pub fn fft_forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, true);
    }

    /// Inverse DFT including the `1/M^N` factor, in place.
    pub fn fft_inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, false);
        let s = 1.0 / self.len() as f64;
        exec::for_each_mut(buf, |_, v| *v *= s);
    }

    fn transform(&self, buf: &mut [Complex64], forward: bool) {
        assert_eq!(buf.len(), self.len(), "transform buffer does not match grid");
        let fft = if forward { &self.inner.forward } else { &self.inner.inverse };
        let m = self.points();
        let n = self.dims();
        // contiguous last axis
        fft_lines(fft, buf, m);
        if n == 1 {
            return;
        }
        let mut tmp = vec![ZERO; buf.len()];
        for axis in 0..n - 1 {
            let stride = m.pow((n - 1 - axis) as u32);
            {
                let src: &[Complex64] = buf;
                exec::for_each_chunk_mut(&mut tmp, m, |line, out| {
                    let outer = line / stride;
                    let inner = line % stride;
                    let base = outer * m * stride + inner;
                    for (j, o) in out.iter_mut().enumerate() {
                        *o = src[base + j * stride];
                    }
                });
            }
            fft_lines(fft, &mut tmp, m);
            let src: &[Complex64] = &tmp;
            exec::for_each_chunk_mut(buf, stride, |c, out| {
                let outer = c / m;
                let j = c % m;
                for (inner, o) in out.iter_mut().enumerate() {
                    *o = src[(outer * stride + inner) * m + j];
                }
            });
        }
    }
}

fn fft_lines(fft: &Arc<dyn Fft<f64>>, buf: &mut [Complex64], m: usize) {
    let batch = (exec::CHUNK / m).max(1) * m;
    exec::for_each_chunk_mut(buf, batch, |_, chunk| {
        let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
        fft.process_with_scratch(chunk, &mut scratch);
    });
}

/// Complex amplitude sampled on a grid.
#[derive(Clone, Debug)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(NlsError::SizeMismatch { expected: grid.len(), found: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: grid.clone(), values: vec![ZERO; grid.len()] }
    }

    /// Sample `f(x)` at every node; `x` has `dims` entries.
    pub fn from_fn<F>(grid: &Grid, f: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64 + Sync + Send,
    {
        let n = grid.dims();
        let mut values = vec![ZERO; grid.len()];
        exec::for_each_mut(&mut values, |i, v| {
            let x = grid.position(i);
            *v = f(&x[..n]);
        });
        Self { grid: grid.clone(), values }
    }

    /// Real field from a real-valued function.
    pub fn from_real_fn<F>(grid: &Grid, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Error on any NaN/Inf entry.
    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            None => Ok(()),
            Some(i) => Err(NlsError::CorruptField(format!("non-finite value at cell {i}"))),
        }
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// `sum |u|^2 h^N`.
    pub fn norm_sq(&self) -> f64 {
        let v = &self.values;
        exec::sum(v.len(), |i| v[i].norm_sqr()) * self.grid.cell_volume()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        exec::for_each_mut(&mut out.values, |_, v| *v *= s);
        out
    }

    /// Multiply by `exp(i theta)`.
    pub fn phase_rotated(&self, theta: f64) -> Self {
        let mut out = self.clone();
        let z = Complex64::from_polar(1.0, theta);
        exec::for_each_mut(&mut out.values, |_, v| *v *= z);
        out
    }

    /// `sum |a - b|^2 h^N`.
    pub fn distance_sq(&self, other: &Self) -> Result<f64> {
        if self.grid != other.grid {
            return Err(NlsError::GridMismatch);
        }
        let (a, b) = (&self.values, &other.values);
        Ok(exec::sum(a.len(), |i| (a[i] - b[i]).norm_sqr()) * self.grid.cell_volume())
    }

    /// Drop the imaginary part.
    pub fn real_projected(&self) -> Self {
        let mut out = self.clone();
        exec::for_each_mut(&mut out.values, |_, v| v.im = 0.0);
        out
    }

    pub fn to_spectral(&self) -> Spectrum {
        to_spectral(self)
    }
}

/// Fourier-series coefficients of a field.
#[derive(Clone, Debug)]
pub struct Spectrum {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `L^N sum |c_k|^2`, equal to the physical `norm_sq` by Parseval.
    pub fn norm_sq(&self) -> f64 {
        let c = &self.coeffs;
        exec::sum(c.len(), |i| c[i].norm_sqr()) * self.grid.volume()
    }

    pub fn from_spectral(&self) -> ComplexField {
        from_spectral(self)
    }
}

/// Forward transform to Fourier-series coefficients.
pub fn to_spectral(u: &ComplexField) -> Spectrum {
    let grid = u.grid.clone();
    let mut c = u.values.clone();
    grid.fft_forward(&mut c);
    let s = 1.0 / grid.len() as f64;
    exec::for_each_mut(&mut c, |_, v| *v *= s);
    Spectrum { grid, coeffs: c }
}

/// Build a spectrum from raw coefficients.
pub fn spectrum_from_coeffs(grid: &Grid, coeffs: Vec<Complex64>) -> Result<Spectrum> {
    if coeffs.len() != grid.len() {
        return Err(NlsError::SizeMismatch { expected: grid.len(), found: coeffs.len() });
    }
    Ok(Spectrum { grid: grid.clone(), coeffs })
}

/// Inverse of [`to_spectral`].
pub fn from_spectral(s: &Spectrum) -> ComplexField {
    let grid = s.grid.clone();
    let mut v = s.coeffs.clone();
    grid.fft_forward_unscaled_inverse(&mut v);
    ComplexField { grid, values: v }
}

impl Grid {
    fn fft_forward_unscaled_inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, false);
    }
}

/// `||grad u||^2 = L^N sum |k|^2 |c_k|^2`, Nyquist mode included.
pub fn spectral_gradient_norm_sq(u: &ComplexField) -> f64 {
    let s = to_spectral(u);
    let k2 = u.grid.k_squared();
    let c = &s.coeffs;
    exec::sum(c.len(), |i| k2[i] * c[i].norm_sqr()) * u.grid.volume()
}

/// Laplacian by the multiplier `-|k|^2`.
pub fn spectral_laplacian(u: &ComplexField) -> ComplexField {
    let grid = u.grid.clone();
    let mut v = u.values.clone();
    grid.fft_forward(&mut v);
    let k2 = grid.k_squared();
    exec::for_each_mut(&mut v, |i, c| *c *= -k2[i]);
    grid.fft_inverse(&mut v);
    ComplexField { grid, values: v }
}

/// Partial derivative along `axis`. The Nyquist mode is zeroed for this odd-order derivative.
pub fn spectral_partial(u: &ComplexField, axis: usize) -> ComplexField {
    let grid = u.grid.clone();
    assert!(axis < grid.dims());
    let mut v = u.values.clone();
    grid.fft_forward(&mut v);
    let m = grid.points();
    let half = m / 2;
    let kx = grid.wavenumbers();
    exec::for_each_mut(&mut v, |i, c| {
        let a = grid.multi_index(i)[axis];
        if a == half {
            *c = ZERO;
        } else {
            *c *= Complex64::new(0.0, kx[a]);
        }
    });
    grid.fft_inverse(&mut v);
    ComplexField { grid, values: v }
}

/// `x . grad u` computed spectrally.
pub fn radial_derivative(u: &ComplexField) -> ComplexField {
    let grid = u.grid.clone();
    let mut out = vec![ZERO; grid.len()];
    for axis in 0..grid.dims() {
        let d = spectral_partial(u, axis);
        let dv = d.values();
        exec::for_each_mut(&mut out, |i, o| {
            let x = grid.position(i)[axis];
            *o += dv[i] * x;
        });
    }
    ComplexField { grid, values: out }
}

/// Virial moments of a field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    /// `J = int |x|^2 |u|^2`.
    pub j: f64,
    /// `J' = 4 Im int (x . grad u) conj(u)`.
    pub j_prime: f64,
}

/// `J` and `J'` with the centered coordinate array.
pub fn moment_weighted_norms(u: &ComplexField) -> Moments {
    let grid = &u.grid;
    let r2 = grid.r_squared();
    let v = &u.values;
    let j = exec::sum(v.len(), |i| r2[i] * v[i].norm_sqr()) * grid.cell_volume();
    let xd = radial_derivative(u);
    let d = xd.values();
    let im = exec::sum(v.len(), |i| (d[i] * v[i].conj()).im) * grid.cell_volume();
    Moments { j, j_prime: 4.0 * im }
}

/// Evaluate a field at `lambda * x` by spectral interpolation along each axis.
///
/// Sample points falling outside the box are set to zero rather than wrapped.
pub fn resample_dilated(u: &ComplexField, lambda: f64) -> ComplexField {
    let grid = u.grid.clone();
    let m = grid.points();
    let n = grid.dims();
    let half = m / 2;
    let l = grid.extent();
    let x0 = grid.coords()[0];
    let kx = grid.wavenumbers().to_vec();
    // interpolation matrix T[j][q]: value at lambda*x_j from Fourier coefficient q
    let mut table = vec![ZERO; m * m];
    exec::for_each_chunk_mut(&mut table, m, |j, row| {
        let y = lambda * grid.coords()[j];
        if y < -l / 2.0 - 1e-12 || y > l / 2.0 - 1e-12 {
            return;
        }
        let t = y - x0;
        for (q, r) in row.iter_mut().enumerate() {
            *r = if q == half { Complex64::new((kx[q] * t).cos(), 0.0) } else { Complex64::from_polar(1.0, kx[q] * t) };
        }
    });
    let mut data = u.values.clone();
    let mut tmp = vec![ZERO; data.len()];
    for axis in 0..n {
        // coefficients along this axis
        let stride = m.pow((n - 1 - axis) as u32);
        {
            let src: &[Complex64] = &data;
            exec::for_each_chunk_mut(&mut tmp, m, |line, out| {
                let outer = line / stride;
                let inner = line % stride;
                let base = outer * m * stride + inner;
                for (j, o) in out.iter_mut().enumerate() {
                    *o = src[base + j * stride];
                }
            });
        }
        {
            let fft = &grid.inner.forward;
            fft_lines(fft, &mut tmp, m);
        }
        let inv_m = 1.0 / m as f64;
        let table_ref = &table;
        exec::for_each_chunk_mut(&mut tmp, m, |_, line| {
            let coeffs: Vec<Complex64> = line.iter().map(|c| c * inv_m).collect();
            for (j, o) in line.iter_mut().enumerate() {
                let row = &table_ref[j * m..(j + 1) * m];
                let mut acc = ZERO;
                for q in 0..m {
                    acc += row[q] * coeffs[q];
                }
                *o = acc;
            }
        });
        let src: &[Complex64] = &tmp;
        exec::for_each_chunk_mut(&mut data, stride, |c, out| {
            let outer = c / m;
            let j = c % m;
            for (inner, o) in out.iter_mut().enumerate() {
                *o = src[(outer * stride + inner) * m + j];
            }
        });
    }
    ComplexField { grid, values: data }
}

/// L2-preserving dilation `lambda^{N/2} u(lambda x)` by spectral resampling.
pub fn l2_dilation(u: &ComplexField, lambda: f64) -> ComplexField {
    let n = u.grid.dims() as i32;
    resample_dilated(u, lambda).scaled(lambda.powf(n as f64 / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn grid_examples() {
        let g = make_grid(1, 2.0 * PI, 8).unwrap();
        assert_relative_eq!(g.spacing(), PI / 4.0, epsilon = 1e-15);
        let k: Vec<f64> = g.wavenumbers().to_vec();
        let expect = [0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0];
        for (a, b) in k.iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
        let g2 = make_grid(2, 10.0, 64).unwrap();
        assert_eq!(g2.len(), 4096);
        assert_eq!(g2.spacing(), 0.15625);
        assert_eq!(make_grid(3, 16.0, 32).unwrap().len(), 32768);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(make_grid(1, 1.0, 12).is_err());
        assert!(make_grid(1, 1.0, 4).is_err());
        assert!(make_grid(1, 0.0, 16).is_err());
        assert!(make_grid(1, -2.0, 16).is_err());
        assert!(make_grid(4, 1.0, 16).is_err());
    }

    #[test]
    fn spacing_times_points_is_extent() {
        for &(l, m) in &[(40.0, 1024), (3.7, 64), (1e-3, 8)] {
            let g = make_grid(1, l, m).unwrap();
            assert_eq!(g.spacing() * m as f64, l);
        }
    }

    #[test]
    fn wavenumbers_antisymmetric_below_nyquist() {
        let g = make_grid(1, 7.0, 32).unwrap();
        let k = g.wavenumbers();
        for m in 1..16 {
            assert_relative_eq!(k[m], -k[32 - m], epsilon = 1e-13);
        }
    }

    #[test]
    fn constant_field_has_only_zero_mode() {
        let g = make_grid(2, 5.0, 16).unwrap();
        let u = ComplexField::from_fn(&g, |_| Complex64::new(1.5, -0.5));
        let s = to_spectral(&u);
        assert!((s.coeffs()[0] - Complex64::new(1.5, -0.5)).norm() < 1e-14);
        assert!(s.coeffs()[1..].iter().all(|c| c.norm() < 1e-14));
    }

    #[test]
    fn plane_wave_single_coefficient() {
        let g = make_grid(1, 2.0 * PI, 32).unwrap();
        let u = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, 3.0 * x[0]));
        let s = to_spectral(&u);
        for (i, c) in s.coeffs().iter().enumerate() {
            if i == 3 {
                assert!((c.norm() - 1.0).abs() < 1e-13);
            } else {
                assert!(c.norm() < 1e-13);
            }
        }
    }

    #[test]
    fn plane_wave_gradient_norm() {
        let l = 6.0;
        let g = make_grid(1, l, 64).unwrap();
        let k0 = 2.0 * PI * 5.0 / l;
        let a = 0.7;
        let u = ComplexField::from_fn(&g, |x| Complex64::from_polar(a, k0 * x[0]));
        assert_relative_eq!(spectral_gradient_norm_sq(&u), k0 * k0 * a * a * l, max_relative = 1e-12);
        let c = ComplexField::from_fn(&g, |_| Complex64::new(2.0, 1.0));
        assert!(spectral_gradient_norm_sq(&c).abs() < 1e-24);
    }

    #[test]
    fn nyquist_plane_wave_gradient_norm_is_exact() {
        let l = 4.0;
        let g = make_grid(1, l, 16).unwrap();
        let k = g.wavenumbers()[8];
        let u = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, k * x[0]));
        assert_relative_eq!(spectral_gradient_norm_sq(&u), k * k * l, max_relative = 1e-12);
    }

    #[test]
    fn partial_and_laplacian_of_plane_waves() {
        let l = 5.0;
        let g = make_grid(2, l, 32).unwrap();
        let (kx, ky) = (2.0 * PI * 3.0 / l, -2.0 * PI * 7.0 / l);
        let u = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, kx * x[0] + ky * x[1]));
        let dx = spectral_partial(&u, 0);
        let dy = spectral_partial(&u, 1);
        let lap = spectral_laplacian(&u);
        for i in 0..g.len() {
            let v = u.values()[i];
            assert!((dx.values()[i] - Complex64::new(0.0, kx) * v).norm() < 1e-12 * kx.abs());
            assert!((dy.values()[i] - Complex64::new(0.0, ky) * v).norm() < 1e-12 * ky.abs());
            assert!((lap.values()[i] + (kx * kx + ky * ky) * v).norm() < 1e-12 * (kx * kx + ky * ky));
        }
    }

    #[test]
    fn gaussian_gradient_norm_matches_closed_form() {
        let g = make_grid(1, 40.0, 512).unwrap();
        let a = 1.3;
        let u = ComplexField::from_real_fn(&g, |x| a * (-x[0] * x[0] / 2.0).exp());
        // int (a x e^{-x^2/2})^2 dx = a^2 sqrt(pi)/2
        assert_relative_eq!(spectral_gradient_norm_sq(&u), a * a * PI.sqrt() / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn moments_of_gaussian() {
        let g = make_grid(1, 30.0, 256).unwrap();
        let u = ComplexField::from_real_fn(&g, |x| (-x[0] * x[0] / 2.0).exp());
        let m = moment_weighted_norms(&u);
        assert_relative_eq!(m.j, PI.sqrt() / 2.0, max_relative = 1e-12);
        assert!(m.j_prime.abs() < 1e-14);
    }

    #[test]
    fn chirped_gaussian_j_prime() {
        let g = make_grid(2, 24.0, 128).unwrap();
        let sigma = 0.3;
        let u = ComplexField::from_fn(&g, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            Complex64::from_polar((-r2 / 2.0).exp(), sigma * r2 / 2.0)
        });
        // J' = 4 sigma int |x|^2 g^2 = 4 sigma J
        let m = moment_weighted_norms(&u);
        assert_relative_eq!(m.j_prime, 4.0 * sigma * m.j, max_relative = 1e-10);
        // int |x|^2 e^{-|x|^2} over R^2 = pi
        assert_relative_eq!(m.j, PI, max_relative = 1e-12);
    }

    #[test]
    fn dilation_resampling_matches_analytic() {
        let g = make_grid(2, 20.0, 64).unwrap();
        let f = |x: &[f64], s: f64| (-(x[0] * x[0] + 0.5 * x[1] * x[1]) * s * s / 2.0).exp();
        let u = ComplexField::from_real_fn(&g, |x| f(x, 1.0));
        for &lam in &[0.7, 1.0, 1.6] {
            let d = resample_dilated(&u, lam);
            let exact = ComplexField::from_real_fn(&g, |x| f(x, lam));
            assert!(d.distance_sq(&exact).unwrap().sqrt() < 1e-10, "lambda {lam}");
        }
    }

    #[test]
    fn three_dimensional_round_trip() {
        let g = make_grid(3, 8.0, 16).unwrap();
        let u = ComplexField::from_fn(&g, |x| Complex64::new(x[0] * x[1] + x[2], (x[0] - x[2]).sin()));
        let back = from_spectral(&to_spectral(&u));
        assert!(back.distance_sq(&u).unwrap().sqrt() <= 1e-13 * u.norm_sq().sqrt());
    }
}
