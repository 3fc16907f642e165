//! Structural invariants checked on randomized smooth data.

use nls_core::ansatz::gaussian;
use nls_core::dynamics::step_strang;
use nls_core::exec;
use nls_core::functionals::Problem;
use nls_core::grid::{l2_dilation, make_grid, ComplexField};
use nls_core::model::{Kernel, ModelSpec, Nonlinearity, Potential};
use nls_core::projection::{nehari_amplitude, nehari_scale, project_to_virial_zero, virial_scale, VirialConstraint};
use nls_core::snapshot::{read_snapshot, write_snapshot};
use num_complex::Complex64;
use num_rational::Rational64;
use proptest::prelude::*;

fn two_power_harmonic() -> Problem {
    let f = Nonlinearity::TwoPower { mu: 1.0, p1: Rational64::new(5, 2), nu: 1.0, p2: Rational64::from_integer(3) };
    let model = ModelSpec::new(1, Potential::Harmonic { a: 1.0 }, f, Kernel::Zero).unwrap();
    Problem::new(model, make_grid(1, 20.0, 256).unwrap()).unwrap()
}

fn hartree_2d() -> Problem {
    let f = Nonlinearity::Power { b: 1.0, p: Rational64::new(3, 2) };
    let model = ModelSpec::new(2, Potential::Harmonic { a: 0.5 }, f, Kernel::Gaussian { a: 1.0 }).unwrap();
    Problem::new(model, make_grid(2, 16.0, 32).unwrap()).unwrap()
}

/// Two displaced Gaussians with a linear phase: smooth, generic, not radial.
fn bump(pr: &Problem, amp: f64, width: f64, shift: f64, kick: f64) -> ComplexField {
    let base = gaussian(pr.grid(), amp, width, 0.0);
    let values = base
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x = pr.grid().position(i)[0];
            let second = 0.5 * amp * (-(x - shift).powi(2) / (2.0 * width * width)).exp();
            (v + second) * Complex64::from_polar(1.0, kick * x)
        })
        .collect();
    ComplexField::new(pr.grid().clone(), values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn strang_step_preserves_mass(amp in 0.2f64..1.5, width in 0.5f64..2.0, shift in -2.0f64..2.0, kick in -1.0f64..1.0, dt in 1e-4f64..1e-2) {
        for pr in [two_power_harmonic(), hartree_2d()] {
            let u = bump(&pr, amp, width, shift, kick);
            let v = step_strang(&u, &pr, dt).unwrap();
            let (m0, m1) = (u.norm_sq(), v.norm_sq());
            prop_assert!(((m1 - m0) / m0).abs() < 1e-12, "{} -> {}", m0, m1);
        }
    }

    #[test]
    fn functionals_are_gauge_invariant(amp in 0.2f64..1.5, width in 0.5f64..2.0, shift in -2.0f64..2.0, theta in 0.0f64..std::f64::consts::TAU) {
        let pr = hartree_2d();
        let u = bump(&pr, amp, width, shift, 0.3);
        let rotated = ComplexField::new(
            pr.grid().clone(),
            u.values().iter().map(|v| v * Complex64::from_polar(1.0, theta)).collect(),
        ).unwrap();
        let a = pr.diagnostics(&u, 1.0, 0.0).unwrap().values();
        let b = pr.diagnostics(&rotated, 1.0, 0.0).unwrap().values();
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()), "{} vs {}", x, y);
        }
    }

    #[test]
    fn nehari_functional_is_the_amplitude_derivative(amp in 0.2f64..1.5, width in 0.5f64..2.0, shift in -2.0f64..2.0) {
        // S_omega(u) = d/drho I_omega(rho u) at rho = 1
        let pr = two_power_harmonic();
        let u = bump(&pr, amp, width, shift, 0.2);
        let fam = pr.scaled_family(&u).unwrap();
        let h = 1e-4;
        let fd = (fam.eval(1.0 + h, 1.0).i_omega(1.0) - fam.eval(1.0 - h, 1.0).i_omega(1.0)) / (2.0 * h);
        let s = fam.eval(1.0, 1.0).s_omega(1.0);
        prop_assert!((fd - s).abs() <= 1e-6 * nehari_scale(&fam.eval(1.0, 1.0), 1.0), "{} vs {}", fd, s);
    }

    #[test]
    fn virial_functional_is_the_dilation_derivative(amp in 0.2f64..1.5, width in 0.5f64..2.0, shift in -2.0f64..2.0) {
        // Q(u) = 2 d/dlambda E(lambda^{N/2} u(lambda x)) at lambda = 1
        for pr in [two_power_harmonic(), hartree_2d()] {
            let u = bump(&pr, amp, width, shift, 0.2);
            let fam = pr.scaled_family(&u).unwrap();
            let h = 1e-4;
            let fd = (fam.eval(1.0, 1.0 + h).energy() - fam.eval(1.0, 1.0 - h).energy()) / h;
            let dims = pr.model().dims;
            let c = fam.eval(1.0, 1.0);
            prop_assert!((fd - c.q(dims)).abs() <= 1e-6 * virial_scale(&c), "{} vs {}", fd, c.q(dims));
        }
    }

    #[test]
    fn nehari_projection_lands_on_the_manifold(amp in 0.2f64..3.0, width in 0.5f64..2.0, shift in -2.0f64..2.0) {
        let pr = two_power_harmonic();
        let u = bump(&pr, amp, width, shift, 0.0);
        let fam = pr.scaled_family(&u).unwrap();
        let rho = nehari_amplitude(&fam, 1.0, 1e6).unwrap();
        let c = pr.components(&u.scaled(rho)).unwrap();
        prop_assert!(c.s_omega(1.0).abs() <= 1e-9 * nehari_scale(&c, 1.0));
        prop_assert!(c.i_omega(1.0) > 0.0);
    }

    #[test]
    fn dilation_preserves_mass_and_zeroes_q(amp in 0.6f64..2.0, width in 0.6f64..1.5) {
        // V = 0 and an L2-supercritical power: Q(u_lambda) changes sign exactly once
        let f = Nonlinearity::Power { b: 1.0, p: Rational64::from_integer(3) };
        let model = ModelSpec::new(1, Potential::Zero, f, Kernel::Zero).unwrap();
        let pr = Problem::new(model, make_grid(1, 40.0, 1024).unwrap()).unwrap();
        let u = gaussian(pr.grid(), amp, width, 0.0);
        // keep the dilated profile well inside the box
        let c0 = pr.components(&u).unwrap();
        let root = 8.0 * c0.kinetic / (3.0 * c0.sf_integral);
        prop_assume!((0.3..3.0).contains(&root));
        let (v, _) = project_to_virial_zero(&pr, &u, VirialConstraint::Q).unwrap();
        let c = pr.components(&v).unwrap();
        prop_assert!(((v.norm_sq() - u.norm_sq()) / u.norm_sq()).abs() < 1e-8);
        prop_assert!(c.q(1).abs() <= 1e-6 * virial_scale(&c));
        let w = l2_dilation(&u, 1.0);
        prop_assert!((w.norm_sq() - u.norm_sq()).abs() < 1e-12 * u.norm_sq());
    }

    #[test]
    fn snapshot_round_trip_is_exact(amp in 0.1f64..3.0, width in 0.3f64..3.0, shift in -3.0f64..3.0, kick in -2.0f64..2.0) {
        let pr = hartree_2d();
        let u = bump(&pr, amp, width, shift, kick);
        let mut buf = Vec::new();
        write_snapshot(&u, &mut buf).unwrap();
        let back = read_snapshot(buf.as_slice()).unwrap();
        prop_assert_eq!(back.values(), u.values());
        prop_assert_eq!(back.grid().extent(), u.grid().extent());
    }

    #[test]
    fn sequential_and_parallel_paths_agree_bitwise(amp in 0.2f64..1.5, width in 0.5f64..2.0, shift in -2.0f64..2.0) {
        let pr = hartree_2d();
        let u = bump(&pr, amp, width, shift, 0.4);
        exec::set_parallel(true);
        let a = pr.diagnostics(&step_strang(&u, &pr, 1e-3).unwrap(), 1.0, 0.0).unwrap().values();
        exec::set_parallel(false);
        let b = pr.diagnostics(&step_strang(&u, &pr, 1e-3).unwrap(), 1.0, 0.0).unwrap().values();
        exec::set_parallel(true);
        prop_assert_eq!(a, b);
    }
}
