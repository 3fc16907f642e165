//! Conserved quantities and threshold functionals evaluated on grid fields.

use num_complex::Complex64;

use crate::error::{NlsError, Result};
use crate::exec;
use crate::grid::{moment_weighted_norms, spectral_gradient_norm_sq, spectral_laplacian, ComplexField, Grid};
use crate::model::{density_spectrum, eval_potential, HartreeOperator, ModelSpec};

/// A model bound to a grid, with `V`, `x . grad V` and the Hartree multipliers precomputed.
#[derive(Clone, Debug)]
pub struct Problem {
    model: ModelSpec,
    grid: Grid,
    v: Vec<f64>,
    xv: Vec<f64>,
    hartree: HartreeOperator,
}

impl Problem {
    pub fn new(model: ModelSpec, grid: Grid) -> Result<Self> {
        model.validate()?;
        if model.dims != grid.dims() {
            return Err(NlsError::InvalidModel(format!(
                "model is {}-dimensional but the grid is {}-dimensional",
                model.dims,
                grid.dims()
            )));
        }
        let (v, xv) = eval_potential(&model, &grid);
        let hartree = HartreeOperator::new(&model.kernel, &grid);
        Ok(Problem { model, grid, v, xv, hartree })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn potential(&self) -> &[f64] {
        &self.v
    }

    pub fn hartree(&self) -> &HartreeOperator {
        &self.hartree
    }

    fn check(&self, u: &ComplexField) -> Result<()> {
        if u.grid() != &self.grid {
            return Err(NlsError::GridMismatch);
        }
        u.check_finite()
    }

    /// Raw integrals from which every functional is assembled.
    pub fn components(&self, u: &ComplexField) -> Result<Components> {
        self.check(u)?;
        let rho = u.density();
        let nl = &self.model.local;
        let (v, xv) = (&self.v, &self.xv);
        let [mass, pot, xpot, f_int, sf_int] = exec::sum_many::<5, _>(rho.len(), |i, acc| {
            let s = rho[i];
            acc[0] += s;
            acc[1] += v[i] * s;
            acc[2] += xv[i] * s;
            acc[3] += nl.antiderivative(s);
            acc[4] += s * nl.f(s);
        });
        let cell = self.grid.cell_volume();
        let (pair, pair_radial) = self.hartree.pair_integrals(&rho);
        let m = moment_weighted_norms(u);
        Ok(Components {
            mass: mass * cell,
            kinetic: spectral_gradient_norm_sq(u),
            potential: pot * cell,
            x_potential: xpot * cell,
            f_integral: f_int * cell,
            sf_integral: sf_int * cell,
            pair,
            pair_radial,
            j: m.j,
            j_prime: m.j_prime,
        })
    }

    pub fn diagnostics(&self, u: &ComplexField, omega: f64, t: f64) -> Result<DiagnosticsRecord> {
        Ok(DiagnosticsRecord::assemble(&self.components(u)?, self.model.dims, omega, t))
    }

    /// L2 gradients (first variations) of `I_omega`, `S_omega` and `Q` at `u`.
    pub fn gradients(&self, u: &ComplexField, omega: f64) -> Result<Gradients> {
        self.check(u)?;
        let rho = u.density();
        let lap = spectral_laplacian(u);
        let wr = self.hartree.convolve(&rho);
        let xwr = self.hartree.convolve_radial(&rho);
        let nl = &self.model.local;
        let nd = self.model.dims as f64;
        let n = u.len();
        let (uv, lv) = (u.values(), lap.values());
        let mut g_i = vec![Complex64::new(0.0, 0.0); n];
        let mut g_s = g_i.clone();
        let mut g_q = g_i.clone();
        let mut g_q1 = g_i.clone();
        exec::for_each_mut(&mut g_i, |i, g| {
            let s = rho[i];
            *g = uv[i] * (2.0 * omega + self.v[i] - nl.f(s) - wr[i]) - lv[i];
        });
        exec::for_each_mut(&mut g_s, |i, g| {
            let s = rho[i];
            let c = 4.0 * omega + 2.0 * self.v[i] - 2.0 * nl.f(s) - 2.0 * nl.s_fprime(s) - 4.0 * wr[i];
            *g = uv[i] * c - 2.0 * lv[i];
        });
        exec::for_each_mut(&mut g_q, |i, g| {
            let s = rho[i];
            let c = -2.0 * self.xv[i] - 2.0 * nd * nl.s_fprime(s) + 2.0 * xwr[i];
            *g = uv[i] * c - 4.0 * lv[i];
        });
        exec::for_each_mut(&mut g_q1, |i, g| {
            *g = uv[i] * (-2.0 * nd * nl.s_fprime(rho[i])) - 4.0 * lv[i];
        });
        let wrap = |values| ComplexField::new(self.grid.clone(), values);
        Ok(Gradients { i_omega: wrap(g_i)?, s_omega: wrap(g_s)?, q: wrap(g_q)?, q1: wrap(g_q1)? })
    }

    /// Functionals of `amp * lambda^{N/2} u(lambda x)` for a fixed base field `u`.
    pub fn scaled_family(&self, u: &ComplexField) -> Result<ScaledFamily<'_>> {
        let base = self.components(u)?;
        let rho = u.density();
        let spectrum = density_spectrum(&self.grid, &rho);
        Ok(ScaledFamily { problem: self, rho, spectrum, base })
    }
}

/// First variations in the real L2 pairing `Re int conj(g) phi`.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub i_omega: ComplexField,
    pub s_omega: ComplexField,
    pub q: ComplexField,
    pub q1: ComplexField,
}

/// Raw integrals of one field.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Components {
    pub mass: f64,
    pub kinetic: f64,
    pub potential: f64,
    /// `int (x . grad V) |u|^2`.
    pub x_potential: f64,
    pub f_integral: f64,
    /// `int |u|^2 f(|u|^2)`.
    pub sf_integral: f64,
    /// `int (W * |u|^2) |u|^2`.
    pub pair: f64,
    /// `int ((x . grad W) * |u|^2) |u|^2`.
    pub pair_radial: f64,
    pub j: f64,
    pub j_prime: f64,
}

impl Components {
    pub fn energy(&self) -> f64 {
        0.5 * (self.kinetic + self.potential) - 0.5 * self.f_integral - 0.25 * self.pair
    }

    pub fn q(&self, dims: usize) -> f64 {
        2.0 * self.kinetic - self.x_potential
            + dims as f64 * (self.f_integral - self.sf_integral)
            + 0.5 * self.pair_radial
    }

    pub fn q1(&self, dims: usize) -> f64 {
        2.0 * self.kinetic + dims as f64 * (self.f_integral - self.sf_integral)
    }

    pub fn s_omega(&self, omega: f64) -> f64 {
        2.0 * omega * self.mass + self.kinetic + self.potential - self.sf_integral - self.pair
    }

    pub fn i_omega(&self, omega: f64) -> f64 {
        omega * self.mass + self.energy()
    }
}

/// Functionals along the two-parameter family `amp * lambda^{N/2} u(lambda x)`.
///
/// Everything is evaluated from the samples of `u` by the change of variables `y = lambda x`,
/// so no resampling error enters: the family is treated as living on all of `R^N`.
pub struct ScaledFamily<'a> {
    problem: &'a Problem,
    rho: Vec<f64>,
    spectrum: Vec<Complex64>,
    base: Components,
}

impl ScaledFamily<'_> {
    pub fn base(&self) -> &Components {
        &self.base
    }

    pub fn eval(&self, amp: f64, lambda: f64) -> Components {
        let p = self.problem;
        let a2 = amp * amp;
        let nd = p.model.dims as f64;
        let b = &self.base;
        let cell = p.grid.cell_volume();
        let scale = a2 * lambda.powf(nd);
        let nl = &p.model.local;
        let rho = &self.rho;
        let dilated = lambda != 1.0;
        let r2 = p.grid.r_squared();
        let pot_model = &p.model.potential;
        let [pot, xpot, f_int, sf_int] = exec::sum_many::<4, _>(rho.len(), |i, acc| {
            let s = rho[i];
            let (v, xv) = if dilated {
                let q = r2[i] / (lambda * lambda);
                (pot_model.value(q), pot_model.radial_derivative(q))
            } else {
                (p.v[i], p.xv[i])
            };
            acc[0] += v * s;
            acc[1] += xv * s;
            let t = scale * s;
            acc[2] += nl.antiderivative(t);
            acc[3] += t * nl.f(t);
        });
        let inv = lambda.powf(-nd);
        let (pair, pair_radial) = if p.hartree.is_zero() {
            (0.0, 0.0)
        } else if dilated {
            HartreeOperator::dilated(&p.model.kernel, &p.grid, lambda).pair_integrals_from_spectrum(&self.spectrum)
        } else {
            (b.pair, b.pair_radial)
        };
        let a4 = a2 * a2;
        Components {
            mass: a2 * b.mass,
            kinetic: a2 * lambda * lambda * b.kinetic,
            potential: a2 * pot * cell,
            x_potential: a2 * xpot * cell,
            f_integral: inv * f_int * cell,
            sf_integral: inv * sf_int * cell,
            pair: a4 * pair,
            pair_radial: a4 * pair_radial,
            j: a2 * b.j / (lambda * lambda),
            j_prime: a2 * b.j_prime,
        }
    }
}

/// Every scalar functional at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass_sq: f64,
    pub kinetic: f64,
    pub potential_term: f64,
    pub f_integral: f64,
    pub hartree_g: f64,
    pub energy: f64,
    pub sigma_norm_sq: f64,
    pub q: f64,
    pub q1: f64,
    pub s_omega: f64,
    pub i_omega: f64,
    pub j: f64,
    pub j_prime: f64,
    pub omega: f64,
}

pub const CSV_HEADER: &str =
    "t,mass_sq,kinetic,potential_term,F_integral,hartree_G,energy,sigma_norm_sq,Q,Q1,S_omega,I_omega,J,J_prime";

/// Full-precision float formatting used by every CSV writer (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl DiagnosticsRecord {
    pub fn assemble(c: &Components, dims: usize, omega: f64, t: f64) -> Self {
        let energy = c.energy();
        DiagnosticsRecord {
            t,
            mass_sq: c.mass,
            kinetic: c.kinetic,
            potential_term: c.potential,
            f_integral: c.f_integral,
            hartree_g: 0.25 * c.pair,
            energy,
            sigma_norm_sq: c.mass + c.kinetic + c.potential,
            q: c.q(dims),
            q1: c.q1(dims),
            s_omega: c.s_omega(omega),
            i_omega: omega * c.mass + energy,
            j: c.j,
            j_prime: c.j_prime,
            omega,
        }
    }

    pub fn values(&self) -> [f64; 14] {
        [
            self.t,
            self.mass_sq,
            self.kinetic,
            self.potential_term,
            self.f_integral,
            self.hartree_g,
            self.energy,
            self.sigma_norm_sq,
            self.q,
            self.q1,
            self.s_omega,
            self.i_omega,
            self.j,
            self.j_prime,
        ]
    }

    pub fn csv_row(&self) -> String {
        self.values().iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",")
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|x| x.is_finite()) && self.omega.is_finite()
    }

    /// Largest relative defect of the recomposition identities for `E`, the Sigma norm and `I_omega`.
    pub fn identity_defect(&self) -> f64 {
        let rel = |a: f64, b: f64, scale: f64| (a - b).abs() / scale.max(f64::MIN_POSITIVE);
        let e_scale = self.kinetic.abs() + self.potential_term.abs() + self.f_integral.abs() + self.hartree_g.abs();
        let e = 0.5 * (self.kinetic + self.potential_term) - 0.5 * self.f_integral - self.hartree_g;
        let s = self.mass_sq + self.kinetic + self.potential_term;
        let i = self.omega * self.mass_sq + self.energy;
        rel(self.energy, e, e_scale).max(rel(self.sigma_norm_sq, s, s.abs())).max(rel(
            self.i_omega,
            i,
            (self.omega * self.mass_sq).abs() + e_scale,
        ))
    }
}

pub fn diagnostics(u: &ComplexField, model: &ModelSpec, omega: f64, t: f64) -> Result<DiagnosticsRecord> {
    Problem::new(*model, u.grid().clone())?.diagnostics(u, omega, t)
}

/// `J''(t) = 4 Q(u)`.
pub fn virial_rhs(u: &ComplexField, model: &ModelSpec) -> Result<f64> {
    Ok(4.0 * diagnostics(u, model, 0.0, 0.0)?.q)
}

/// `||u||^2 / ((2/N) ||grad u|| ||x u||)`, at most one for every field.
pub fn uncertainty_check(u: &ComplexField) -> Result<f64> {
    u.check_finite()?;
    let mass = u.norm_sq();
    if mass == 0.0 {
        return Err(NlsError::ZeroField("uncertainty ratio of the zero field".into()));
    }
    let kin = spectral_gradient_norm_sq(u);
    let j = moment_weighted_norms(u).j;
    let nd = u.grid().dims() as f64;
    Ok(mass / ((2.0 / nd) * (kin * j).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{l2_dilation, make_grid};
    use crate::model::{Kernel, Nonlinearity, Potential};
    use num_rational::Rational64;
    use std::f64::consts::PI;

    fn power(b: f64, n: i64, d: i64) -> Nonlinearity {
        Nonlinearity::Power { b, p: Rational64::new(n, d) }
    }

    fn gaussian(g: &Grid, amp: f64) -> ComplexField {
        ComplexField::from_real_fn(g, |x| amp * (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp())
    }

    #[test]
    fn tiny_field_gives_vanishing_functionals() {
        let m =
            ModelSpec::new(1, Potential::Harmonic { a: 1.0 }, power(1.0, 2, 1), Kernel::Gaussian { a: 1.0 }).unwrap();
        let g = make_grid(1, 20.0, 128).unwrap();
        let d = diagnostics(&gaussian(&g, 1e-30), &m, 1.0, 0.0).unwrap();
        assert!(d.values().iter().all(|v| v.abs() < 1e-58));
    }

    #[test]
    fn constant_field_closed_forms() {
        let (a, p, l) = (0.7f64, 2.0, 8.0);
        let m = ModelSpec::new(1, Potential::Zero, power(1.0, 2, 1), Kernel::Zero).unwrap();
        let g = make_grid(1, l, 32).unwrap();
        let u = ComplexField::from_real_fn(&g, |_| a);
        let d = diagnostics(&u, &m, 1.0, 0.0).unwrap();
        let e = -l * a.powf(2.0 * p + 2.0) / (2.0 * (p + 1.0));
        let q = -l * p * a.powf(2.0 * p + 2.0) / (p + 1.0);
        assert!((d.energy - e).abs() < 1e-14);
        assert!((d.q - q).abs() < 1e-14);
        assert!((virial_rhs(&u, &m).unwrap() - 4.0 * d.q).abs() == 0.0);
    }

    #[test]
    fn oscillator_ground_state_values() {
        let m = ModelSpec::new(1, Potential::Harmonic { a: 1.0 }, Nonlinearity::Zero, Kernel::Zero).unwrap();
        let g = make_grid(1, 30.0, 256).unwrap();
        let u = gaussian(&g, PI.powf(-0.25));
        let d = diagnostics(&u, &m, 1.0, 0.0).unwrap();
        assert!((d.mass_sq - 1.0).abs() < 1e-12);
        assert!((d.kinetic - 0.5).abs() < 1e-12);
        assert!((d.potential_term - 0.5).abs() < 1e-12);
        assert!((d.energy - 0.5).abs() < 1e-12);
        assert!(d.j_prime.abs() < 1e-15);
        assert!(d.identity_defect() < 1e-12);
    }

    #[test]
    fn mass_critical_virial_is_sixteen_energy() {
        let m = ModelSpec::new(1, Potential::Zero, power(1.3, 2, 1), Kernel::Zero).unwrap();
        let g = make_grid(1, 30.0, 512).unwrap();
        let u = ComplexField::from_fn(&g, |x| {
            Complex64::from_polar(1.1 * (-(x[0] - 0.4).powi(2)).exp() + 0.3 * (-(x[0] + 2.0).powi(2)).exp(), 0.7 * x[0])
        });
        let d = diagnostics(&u, &m, 1.0, 0.0).unwrap();
        let vr = virial_rhs(&u, &m).unwrap();
        assert!((vr - 16.0 * d.energy).abs() < 1e-12 * vr.abs().max(1.0));
        assert!((d.q - d.q1).abs() <= 1e-12 * d.q.abs());
    }

    #[test]
    fn uncertainty_ratio_examples() {
        let g = make_grid(1, 40.0, 512).unwrap();
        let r = uncertainty_check(&gaussian(&g, 1.0)).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let mod5 = ComplexField::from_fn(&g, |x| Complex64::from_polar((-0.5 * x[0] * x[0]).exp(), 5.0 * x[0]));
        // the modulation adds 25 ||g||^2 to the kinetic term: ratio = 1 / sqrt(1 + 2 * 25)
        assert!((uncertainty_check(&mod5).unwrap() - 51f64.sqrt().recip()).abs() < 1e-10);
        let two = ComplexField::from_real_fn(&g, |x| (-(x[0] - 3.0).powi(2)).exp() + (-(x[0] + 3.0).powi(2)).exp());
        assert!(uncertainty_check(&two).unwrap() < 1.0);
        assert!(uncertainty_check(&ComplexField::zeros(&g)).is_err());
    }

    #[test]
    fn scaled_family_matches_materialized_dilation() {
        let m =
            ModelSpec::new(1, Potential::Saturating { a: 1.0 }, power(1.0, 3, 2), Kernel::Gaussian { a: 0.8 }).unwrap();
        let g = make_grid(1, 40.0, 1024).unwrap();
        let pr = Problem::new(m, g.clone()).unwrap();
        let u = gaussian(&g, 1.2);
        let fam = pr.scaled_family(&u).unwrap();
        for &(amp, lam) in &[(1.0, 1.0), (0.8, 1.3), (1.4, 0.7)] {
            let c = fam.eval(amp, lam);
            let direct = pr.components(&l2_dilation(&u, lam).scaled(amp)).unwrap();
            for (x, y) in [
                (c.mass, direct.mass),
                (c.kinetic, direct.kinetic),
                (c.potential, direct.potential),
                (c.x_potential, direct.x_potential),
                (c.f_integral, direct.f_integral),
                (c.sf_integral, direct.sf_integral),
                (c.pair, direct.pair),
                (c.pair_radial, direct.pair_radial),
                (c.j, direct.j),
            ] {
                assert!((x - y).abs() < 1e-9 * (1.0 + y.abs()), "amp={amp} lam={lam}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn scaling_laws() {
        let m = ModelSpec::new(1, Potential::Zero, power(1.0, 2, 1), Kernel::Zero).unwrap();
        let g = make_grid(1, 40.0, 1024).unwrap();
        let pr = Problem::new(m, g.clone()).unwrap();
        let u = gaussian(&g, 1.0);
        let base = pr.components(&u).unwrap();
        for &lam in &[0.7, 1.5] {
            let c = pr.components(&l2_dilation(&u, lam)).unwrap();
            assert!((c.mass - base.mass).abs() < 1e-10 * base.mass);
            assert!((c.kinetic - lam * lam * base.kinetic).abs() < 1e-8 * c.kinetic);
            assert!((c.f_integral - lam.powi(2) * base.f_integral).abs() < 1e-8 * c.f_integral);
        }
    }

    #[test]
    fn gauge_invariance() {
        let m =
            ModelSpec::new(2, Potential::Harmonic { a: 0.5 }, power(1.0, 1, 1), Kernel::Gaussian { a: 1.0 }).unwrap();
        let g = make_grid(2, 12.0, 32).unwrap();
        let u = ComplexField::from_fn(&g, |x| Complex64::from_polar((-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp(), x[0]));
        let d0 = diagnostics(&u, &m, 0.7, 0.0).unwrap();
        for &th in &[PI / 3.0, 1.0] {
            let d = diagnostics(&u.phase_rotated(th), &m, 0.7, 0.0).unwrap();
            for (a, b) in d.values().iter().zip(d0.values()) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn gradients_match_directional_derivatives() {
        let m = ModelSpec::new(
            1,
            Potential::Harmonic { a: 1.0 },
            Nonlinearity::TwoPower { mu: 1.0, p1: Rational64::new(1, 1), nu: 0.5, p2: Rational64::new(5, 2) },
            Kernel::Gaussian { a: 0.6 },
        )
        .unwrap();
        let g = make_grid(1, 20.0, 256).unwrap();
        let pr = Problem::new(m, g.clone()).unwrap();
        let omega = 0.8;
        let u = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.1 * (-x[0] * x[0]).exp(), 0.3 * x[0]));
        let phi = ComplexField::from_fn(&g, |x| {
            Complex64::new((-(x[0] - 0.5).powi(2)).exp(), 0.4 * (-x[0] * x[0] / 3.0).exp())
        });
        let grads = pr.gradients(&u, omega).unwrap();
        let eps = 1e-5;
        let shifted = |s: f64| {
            let vals: Vec<Complex64> = u.values().iter().zip(phi.values()).map(|(a, b)| a + b * s).collect();
            pr.components(&ComplexField::new(g.clone(), vals).unwrap()).unwrap()
        };
        let (cp, cm) = (shifted(eps), shifted(-eps));
        let pair = |gr: &ComplexField| {
            gr.values().iter().zip(phi.values()).map(|(a, b)| (a.conj() * b).re).sum::<f64>() * g.cell_volume()
        };
        let checks = [
            ((cp.i_omega(omega) - cm.i_omega(omega)) / (2.0 * eps), pair(&grads.i_omega)),
            ((cp.s_omega(omega) - cm.s_omega(omega)) / (2.0 * eps), pair(&grads.s_omega)),
            ((cp.q(1) - cm.q(1)) / (2.0 * eps), pair(&grads.q)),
            ((cp.q1(1) - cm.q1(1)) / (2.0 * eps), pair(&grads.q1)),
        ];
        for (fd, exact) in checks {
            assert!((fd - exact).abs() < 1e-6 * (1.0 + exact.abs()), "{fd} vs {exact}");
        }
    }

    #[test]
    fn csv_row_has_fixed_columns() {
        let m = ModelSpec::new(1, Potential::Zero, Nonlinearity::Zero, Kernel::Zero).unwrap();
        let g = make_grid(1, 10.0, 16).unwrap();
        let d = diagnostics(&gaussian(&g, 1.0), &m, 1.0, 0.25).unwrap();
        let row = d.csv_row();
        assert_eq!(row.split(',').count(), CSV_HEADER.split(',').count());
        assert!(row.starts_with("2.5000000000000000e-1,"));
    }
}
