use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use num_rational::Rational64;
use statrs::function::gamma::gamma;

use super::nonlinearity::ratio_f64;
use crate::error::{NlsError, Result};
use crate::exec;
use crate::grid::Grid;

/// Even convolution kernel `W` of the Hartree term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kernel {
    Zero,
    /// `a |x|^{-K}` with `0 < K < min(4, N)`.
    InversePower {
        a: f64,
        k: Rational64,
    },
    /// `a exp(-pi |x|^2)`.
    Gaussian {
        a: f64,
    },
    /// `a |x|^2 / (1 + |x|^2)`.
    Saturating {
        a: f64,
    },
    /// `a |x|^{-inner}` for `|x| <= 1`, `a C |x|^{-K}` for `|x| >= 2`, joined smoothly.
    ///
    /// On `1 <= |x| <= 2` the logarithmic slope `d ln W / d ln r` moves from `-inner`
    /// to `-K` along the quintic smoothstep in `log2 r`, so it stays inside
    /// `[-K, -inner]` and the join is `C^2`.
    Bridged {
        a: f64,
        inner: Rational64,
        k: Rational64,
    },
}

impl Kernel {
    pub fn validate(&self, dims: usize) -> Result<()> {
        let bad = |msg: String| Err(NlsError::InvalidModel(msg));
        let limit = Rational64::from_integer(dims.min(4) as i64);
        let zero = Rational64::from_integer(0);
        match *self {
            Kernel::Zero => Ok(()),
            Kernel::Gaussian { a } | Kernel::Saturating { a } => {
                if a.is_finite() {
                    Ok(())
                } else {
                    bad("kernel coefficient must be finite".into())
                }
            }
            Kernel::InversePower { a, k } => {
                if !a.is_finite() {
                    return bad("kernel coefficient must be finite".into());
                }
                if k <= zero || k >= limit {
                    return bad(format!("inverse-power exponent needs 0 < K < min(4, N) = {limit}, got {k}"));
                }
                Ok(())
            }
            Kernel::Bridged { a, inner, k } => {
                if !a.is_finite() {
                    return bad("kernel coefficient must be finite".into());
                }
                if inner <= zero || inner >= limit || k <= inner {
                    return bad(format!(
                        "bridged kernel needs 0 < inner < min(4, N) and K > inner, got inner={inner}, K={k}"
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Kernel::Zero => true,
            Kernel::InversePower { a, .. }
            | Kernel::Gaussian { a }
            | Kernel::Saturating { a }
            | Kernel::Bridged { a, .. } => a == 0.0,
        }
    }

    /// `W` at radius `r` (infinite at the origin for singular kinds).
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            Kernel::Zero => 0.0,
            Kernel::InversePower { a, k } => a * r.powf(-ratio_f64(k)),
            Kernel::Gaussian { a } => a * (-PI * r * r).exp(),
            Kernel::Saturating { a } => a * r * r / (1.0 + r * r),
            Kernel::Bridged { a, inner, k } => a * bridge_profile(r, ratio_f64(inner), ratio_f64(k)).0,
        }
    }

    /// `x . grad W` at radius `r`.
    pub fn radial_derivative(&self, r: f64) -> f64 {
        match *self {
            Kernel::Zero => 0.0,
            Kernel::InversePower { a, k } => {
                let k = ratio_f64(k);
                -k * a * r.powf(-k)
            }
            Kernel::Gaussian { a } => -2.0 * PI * a * r * r * (-PI * r * r).exp(),
            Kernel::Saturating { a } => {
                let d = 1.0 + r * r;
                2.0 * a * r * r / (d * d)
            }
            Kernel::Bridged { a, inner, k } => {
                let (w, slope) = bridge_profile(r, ratio_f64(inner), ratio_f64(k));
                a * w * slope
            }
        }
    }
}

fn smoothstep(t: f64) -> f64 {
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

fn smoothstep_integral(t: f64) -> f64 {
    t * t * t * t * (2.5 + t * (-3.0 + t))
}

/// Unit-coefficient bridged profile and its logarithmic slope at radius `r`.
fn bridge_profile(r: f64, inner: f64, k: f64) -> (f64, f64) {
    if r <= 1.0 {
        (r.powf(-inner), -inner)
    } else if r >= 2.0 {
        let c = (0.5 * (k - inner) * LN_2).exp();
        (c * r.powf(-k), -k)
    } else {
        let t = r.ln();
        let tau = t / LN_2;
        let g = -inner * t - (k - inner) * LN_2 * smoothstep_integral(tau);
        (g.exp(), -inner - (k - inner) * smoothstep(tau))
    }
}

/// A convolvable radial profile: the kernel itself or its radial derivative `x . grad W`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelProfile {
    Base(Kernel),
    Radial(Kernel),
}

/// The closed form of `x . grad W` as a convolvable profile.
pub fn kernel_radial_derivative(kernel: &Kernel) -> KernelProfile {
    match *kernel {
        Kernel::InversePower { a, k } => KernelProfile::Base(Kernel::InversePower { a: -ratio_f64(k) * a, k }),
        Kernel::Zero => KernelProfile::Base(Kernel::Zero),
        other => KernelProfile::Radial(other),
    }
}

fn unit_ball_volume(dims: usize) -> f64 {
    match dims {
        1 => 2.0,
        2 => PI,
        _ => 4.0 * PI / 3.0,
    }
}

/// Fourier transform constant of `|x|^{-K}` in `N` dimensions: `c |k|^{K-N}`.
pub fn inverse_power_constant(dims: usize, k: f64) -> f64 {
    let n = dims as f64;
    2f64.powf(n - k) * PI.powf(n / 2.0) * gamma((n - k) / 2.0) / gamma(k / 2.0)
}

impl KernelProfile {
    pub fn kernel(&self) -> &Kernel {
        match self {
            KernelProfile::Base(k) | KernelProfile::Radial(k) => k,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.kernel().is_zero()
    }

    /// Profile value at radius `r`.
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            KernelProfile::Base(k) => k.value(r),
            KernelProfile::Radial(k) => k.radial_derivative(r),
        }
    }

    /// Fourier multiplier (FFT order) of `z -> profile(|z| / lambda)` on the grid's periodic box.
    pub fn multiplier(&self, grid: &Grid, lambda: f64) -> Vec<f64> {
        let n = grid.len();
        let dims = grid.dims();
        let nd = dims as f64;
        let k2 = grid.k_squared();
        let radial = matches!(self, KernelProfile::Radial(_));
        match *self.kernel() {
            Kernel::Zero => vec![0.0; n],
            Kernel::Gaussian { a } => {
                let l2 = lambda * lambda;
                let scale = a * lambda.powi(dims as i32);
                let mut out = vec![0.0; n];
                exec::for_each_mut(&mut out, |i, m| {
                    let q = l2 * k2[i];
                    let g = scale * (-q / (4.0 * PI)).exp();
                    *m = if radial { g * (q / (2.0 * PI) - nd) } else { g };
                });
                out
            }
            Kernel::InversePower { a, k } if !radial => {
                let kk = ratio_f64(k);
                let c = a * inverse_power_constant(dims, kk) * lambda.powf(kk);
                let zero = a * lambda.powf(kk) * inverse_power_box_sum(grid, kk);
                let mut out = vec![0.0; n];
                exec::for_each_mut(&mut out, |i, m| {
                    *m = if i == 0 { zero } else { c * k2[i].powf(0.5 * (kk - nd)) };
                });
                out
            }
            _ => self.sampled_multiplier(grid, lambda),
        }
    }

    fn sampled_multiplier(&self, grid: &Grid, lambda: f64) -> Vec<f64> {
        let n = grid.len();
        let dims = grid.dims();
        let h = grid.spacing();
        let m = grid.points() as i64;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        exec::for_each_mut(&mut buf, |i, v| {
            let idx = grid.multi_index(i);
            let mut r2 = 0.0;
            for &a in idx.iter().take(dims) {
                let mut j = a as i64;
                if j >= m / 2 {
                    j -= m;
                }
                let d = j as f64 * h;
                r2 += d * d;
            }
            v.re = self.eval(r2.sqrt() / lambda);
        });
        buf[0].re = self.origin_cell_value(grid, lambda);
        grid.fft_forward(&mut buf);
        let cell = grid.cell_volume();
        buf.iter().map(|c| c.re * cell).collect()
    }

    /// Equal-volume-ball average of the profile over the origin cell.
    fn origin_cell_value(&self, grid: &Grid, lambda: f64) -> f64 {
        let dims = grid.dims();
        let nd = dims as f64;
        let radius = (grid.cell_volume() / unit_ball_volume(dims)).powf(1.0 / nd);
        match *self.kernel() {
            Kernel::InversePower { a, k } => {
                let k = ratio_f64(k);
                let avg = nd / (nd - k) * a * (radius / lambda).powf(-k);
                if matches!(self, KernelProfile::Radial(_)) {
                    -k * avg
                } else {
                    avg
                }
            }
            Kernel::Bridged { a, inner, .. } => {
                let s = ratio_f64(inner);
                let avg = nd / (nd - s) * a * (radius / lambda).powf(-s);
                if matches!(self, KernelProfile::Radial(_)) {
                    -s * avg
                } else {
                    avg
                }
            }
            _ => self.eval(0.0),
        }
    }
}

/// `h^N` times the sum of `|d|^{-K}` over box displacements, with the origin cell regularized.
fn inverse_power_box_sum(grid: &Grid, k: f64) -> f64 {
    let dims = grid.dims();
    let nd = dims as f64;
    let h = grid.spacing();
    let m = grid.points() as i64;
    let n = grid.len();
    let radius = (grid.cell_volume() / unit_ball_volume(dims)).powf(1.0 / nd);
    let total = exec::sum(n, |i| {
        if i == 0 {
            return nd / (nd - k) * radius.powf(-k);
        }
        let idx = grid.multi_index(i);
        let mut r2 = 0.0;
        for &a in idx.iter().take(dims) {
            let mut j = a as i64;
            if j >= m / 2 {
                j -= m;
            }
            let d = j as f64 * h;
            r2 += d * d;
        }
        r2.powf(-0.5 * k)
    });
    total * grid.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn radial_derivative_examples() {
        let w = Kernel::InversePower { a: 1.5, k: r(1, 2) };
        match kernel_radial_derivative(&w) {
            KernelProfile::Base(Kernel::InversePower { a, k }) => {
                assert_eq!(a, -0.75);
                assert_eq!(k, r(1, 2));
            }
            other => panic!("{other:?}"),
        }
        let g = Kernel::Gaussian { a: 1.0 };
        let p = kernel_radial_derivative(&g);
        let x: f64 = 0.8;
        assert!((p.eval(x) + 2.0 * PI * x * x * (-PI * x * x).exp()).abs() < 1e-15);
        assert!(kernel_radial_derivative(&Kernel::Zero).is_zero());
    }

    #[test]
    fn euler_identity_for_homogeneous_kernel() {
        let k = r(7, 4);
        let w = Kernel::InversePower { a: 1.0, k };
        for &x in &[0.1, 0.7, 2.0, 13.0] {
            let lhs = w.radial_derivative(x);
            let rhs = -1.75 * w.value(x);
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs());
        }
    }

    #[test]
    fn bridged_profile_is_continuous_and_slope_bounded() {
        let w = Kernel::Bridged { a: 1.0, inner: r(5, 2), k: r(11, 4) };
        for &x in &[1.0, 2.0] {
            let (lo, hi) = (w.value(x - 1e-9), w.value(x + 1e-9));
            assert!((lo - hi).abs() < 1e-7 * lo);
        }
        for i in 0..400 {
            let x = 0.5 + i as f64 * 0.005;
            let slope = w.radial_derivative(x) / w.value(x);
            assert!((-2.75 - 1e-12..=-2.5 + 1e-12).contains(&slope), "x={x} slope={slope}");
            // slope equals r d ln W / dr
            let h = 1e-6;
            let fd = x * (w.value(x + h).ln() - w.value(x - h).ln()) / (2.0 * h);
            assert!((fd - slope).abs() < 1e-6);
        }
    }

    #[test]
    fn inverse_power_constant_coulomb() {
        assert!((inverse_power_constant(3, 1.0) - 4.0 * PI).abs() < 1e-12);
        // |x|^{-2} in 3D transforms to 2 pi^2 / |k|
        assert!((inverse_power_constant(3, 2.0) - 2.0 * PI * PI).abs() < 1e-12);
    }

    // Direct periodic sum (W * rho)(x_i) = h^N sum_j W(minimal image x_i - x_j) rho_j.
    fn direct_convolution(grid: &Grid, profile: &KernelProfile, rho: &[f64]) -> Vec<f64> {
        let n = grid.len();
        let dims = grid.dims();
        let l = grid.extent();
        (0..n)
            .map(|i| {
                let xi = grid.position(i);
                let mut acc = 0.0;
                for (j, &rj) in rho.iter().enumerate() {
                    let xj = grid.position(j);
                    let mut r2 = 0.0;
                    for a in 0..dims {
                        let mut d = xi[a] - xj[a];
                        d -= l * (d / l).round();
                        r2 += d * d;
                    }
                    acc += profile.eval(r2.sqrt()) * rj;
                }
                acc * grid.cell_volume()
            })
            .collect()
    }

    fn spectral_convolution(grid: &Grid, mult: &[f64], rho: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = rho.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        grid.fft_forward(&mut buf);
        for (b, m) in buf.iter_mut().zip(mult) {
            *b *= *m;
        }
        grid.fft_inverse(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    #[test]
    fn sampled_profiles_match_direct_sum() {
        for dims in [1usize, 2] {
            let grid = make_grid(dims, 3.0, 8).unwrap();
            let rho: Vec<f64> = (0..grid.len()).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
            for profile in [
                KernelProfile::Base(Kernel::Saturating { a: 0.7 }),
                KernelProfile::Radial(Kernel::Saturating { a: 0.7 }),
            ] {
                let mult = profile.multiplier(&grid, 1.0);
                let fast = spectral_convolution(&grid, &mult, &rho);
                let slow = direct_convolution(&grid, &profile, &rho);
                for (a, b) in fast.iter().zip(&slow) {
                    assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn gaussian_multiplier_matches_direct_sum_on_large_box() {
        // Kernel width << box so periodic images are negligible; grid fine enough
        // that the continuum transform matches the sampled one.
        let grid = make_grid(1, 8.0, 64).unwrap();
        let profile = KernelProfile::Base(Kernel::Gaussian { a: 1.0 });
        let rho: Vec<f64> = (0..grid.len())
            .map(|i| {
                let x = grid.coords()[i];
                (-x * x).exp()
            })
            .collect();
        let fast = spectral_convolution(&grid, &profile.multiplier(&grid, 1.0), &rho);
        let slow = direct_convolution(&grid, &profile, &rho);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-3), "{a} vs {b}");
        }
        let radial = KernelProfile::Radial(Kernel::Gaussian { a: 1.0 });
        let fast = spectral_convolution(&grid, &radial.multiplier(&grid, 1.0), &rho);
        let slow = direct_convolution(&grid, &radial, &rho);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-3), "{a} vs {b}");
        }
    }

    #[test]
    fn gaussian_plane_wave_density() {
        let l = 4.0;
        let grid = make_grid(1, l, 32).unwrap();
        let k0 = 2.0 * PI * 2.0 / l;
        let rho: Vec<f64> = grid.coords().iter().map(|x| 1.0 + (k0 * x).cos()).collect();
        let out =
            spectral_convolution(&grid, &KernelProfile::Base(Kernel::Gaussian { a: 1.0 }).multiplier(&grid, 1.0), &rho);
        let w0 = 1.0;
        let wk = (-k0 * k0 / (4.0 * PI)).exp();
        for (o, x) in out.iter().zip(grid.coords()) {
            assert!((o - (w0 + wk * (k0 * x).cos())).abs() < 1e-13);
        }
    }

    #[test]
    fn inverse_power_against_gamma_oracle() {
        // int |x|^{-K} e^{-x^2} dx = Gamma((1-K)/2) on the line. On the periodic box the
        // spectral kernel near the center is |x|^{-K} + 2 zeta(K) L^{-K} + W0 / L, where the
        // Hurwitz-zeta term sums the periodic images and W0 is the assigned zero mode.
        let kk = 0.5;
        let l = 60.0;
        let grid = make_grid(1, l, 4096).unwrap();
        let w = KernelProfile::Base(Kernel::InversePower { a: 1.0, k: r(1, 2) });
        let mult = w.multiplier(&grid, 1.0);
        let rho: Vec<f64> = grid.coords().iter().map(|x| (-x * x).exp()).collect();
        let out = spectral_convolution(&grid, &mult, &rho);
        let origin = grid.points() / 2;
        let zeta_half = -1.460_354_508_809_586_8;
        let offset = 2.0 * zeta_half * l.powf(-kk) + mult[0] / l;
        let exact = gamma((1.0 - kk) / 2.0) + offset * PI.sqrt();
        assert!((out[origin] - exact).abs() < 2e-4 * exact, "{} vs {exact}", out[origin]);
        // the assigned zero mode is the box integral of |x|^{-K}
        let box_integral = 2.0 * (l / 2.0).powf(1.0 - kk) / (1.0 - kk);
        assert!((mult[0] - box_integral).abs() < 5e-3 * box_integral);
    }

    #[test]
    fn dilated_multiplier_scales() {
        let grid = make_grid(2, 10.0, 16).unwrap();
        let g = KernelProfile::Base(Kernel::Gaussian { a: 2.0 });
        let lam = 1.7;
        let m = g.multiplier(&grid, lam);
        // profile(z / lam) is a Gaussian of variance scaled by lam^2
        for (i, &k2) in grid.k_squared().iter().enumerate() {
            let expect = 2.0 * lam * lam * (-lam * lam * k2 / (4.0 * PI)).exp();
            assert!((m[i] - expect).abs() < 1e-14 * expect.max(1e-300));
        }
        let s = KernelProfile::Base(Kernel::Saturating { a: 1.0 });
        let a = s.multiplier(&grid, 1.0);
        let b = s.multiplier(&grid, 1.0 + 1e-12);
        assert!((a[0] - b[0]).abs() < 1e-8 * a[0].abs());
    }

    #[test]
    fn validation() {
        assert!(Kernel::InversePower { a: 1.0, k: r(1, 1) }.validate(1).is_err());
        assert!(Kernel::InversePower { a: 1.0, k: r(2, 1) }.validate(3).is_ok());
        assert!(Kernel::Bridged { a: 1.0, inner: r(5, 2), k: r(2, 1) }.validate(3).is_err());
    }
}
