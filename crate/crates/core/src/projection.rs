//! One-parameter projections onto `S_omega = 0` (amplitude) and `Q = 0` (dilation).

use crate::error::{NlsError, Result};
use crate::functionals::{Components, Problem, ScaledFamily};
use crate::grid::{l2_dilation, ComplexField};

/// Which functional a dilation projection zeroes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VirialConstraint {
    /// The full `Q`.
    Q,
    /// `Q_1 = 2 ||grad u||^2 + N int (F - |u|^2 f)`.
    Q1,
}

impl VirialConstraint {
    pub fn eval(&self, c: &Components, dims: usize) -> f64 {
        match self {
            VirialConstraint::Q => c.q(dims),
            VirialConstraint::Q1 => c.q1(dims),
        }
    }
}

/// Scale on which a projected `Q` counts as zero.
pub fn virial_scale(c: &Components) -> f64 {
    2.0 * c.kinetic.abs() + c.x_potential.abs() + c.f_integral.abs() + c.sf_integral.abs() + c.pair_radial.abs()
}

/// Scale on which a projected `S_omega` counts as zero.
pub fn nehari_scale(c: &Components, omega: f64) -> f64 {
    2.0 * omega * c.mass + c.kinetic + c.potential + c.sf_integral.abs() + c.pair.abs()
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, f_lo: f64, tol_x: f64) -> f64 {
    let sign_lo = f_lo > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= tol_x * mid.abs().max(1e-300) {
            return mid;
        }
        if (f(mid) > 0.0) == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest `rho > 0` with `S_omega(rho u) = 0`, searched on `(0, rho_max]`.
///
/// `S_omega(rho u) > 0` for small `rho` whenever `u != 0`, so the first sign change is
/// the Nehari point of the ray.
pub fn nehari_amplitude(family: &ScaledFamily<'_>, omega: f64, rho_max: f64) -> Option<f64> {
    let s = |rho: f64| family.eval(rho, 1.0).s_omega(omega) / (rho * rho);
    let mut lo = 1e-3;
    let mut s_lo = s(lo);
    if !(s_lo > 0.0) {
        lo = 1e-8;
        s_lo = s(lo);
        if !(s_lo > 0.0) {
            return None;
        }
    }
    let mut hi = lo;
    loop {
        let next = hi * 1.5;
        if next > rho_max {
            return None;
        }
        if s(next) <= 0.0 {
            lo = hi;
            hi = next;
            break;
        }
        hi = next;
    }
    let root = bisect(s, lo, hi, s(lo), 1e-15);
    Some(root)
}

/// Smallest `rho > 0` at which `g(rho u)` changes sign, scanning `rho` upward from `1e-3` by factors of 1.5.
pub fn amplitude_root<G: Fn(&Components) -> f64>(family: &ScaledFamily<'_>, g: G, rho_max: f64) -> Option<f64> {
    let h = |rho: f64| g(&family.eval(rho, 1.0)) / (rho * rho);
    let mut lo = 1e-3;
    let h_lo = h(lo);
    if h_lo == 0.0 || !h_lo.is_finite() {
        return None;
    }
    loop {
        let hi = lo * 1.5;
        if hi > rho_max {
            return None;
        }
        let h_hi = h(hi);
        if (h_hi > 0.0) != (h_lo > 0.0) {
            return Some(bisect(h, lo, hi, h(lo), 1e-15));
        }
        lo = hi;
    }
}

/// Root of `lambda -> constraint(amp * lambda^{N/2} u(lambda x))` on `[1e-3, 1e3]` nearest `lambda = 1`.
pub fn virial_dilation(family: &ScaledFamily<'_>, amp: f64, dims: usize, which: VirialConstraint) -> Option<f64> {
    let q = |lam: f64| which.eval(&family.eval(amp, lam), dims);
    let q1 = q(1.0);
    if q1 == 0.0 || q1.abs() <= 1e-12 * virial_scale(&family.eval(amp, 1.0)) {
        return Some(1.0);
    }
    // scan outward from lambda = 1 in both directions on a log grid
    let steps = 48;
    let ratio = 1e3f64.powf(1.0 / steps as f64);
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for dir in [1.0f64, -1.0] {
        let (mut a, mut qa) = (1.0f64, q1);
        for i in 1..=steps {
            let b = ratio.powf(dir * i as f64);
            let qb = q(b);
            if qb == 0.0 {
                return Some(b);
            }
            if (qa > 0.0) != (qb > 0.0) {
                let dist = i as f64;
                if best.map(|t| dist < t.3).unwrap_or(true) {
                    best = Some((a.min(b), a.max(b), if a < b { qa } else { qb }, dist));
                }
                break;
            }
            a = b;
            qa = qb;
        }
    }
    let (lo, hi, q_lo, _) = best?;
    Some(bisect(q, lo, hi, q_lo, 1e-15))
}

/// Scale `u` onto the Nehari manifold.
pub fn project_to_nehari(problem: &Problem, u: &ComplexField, omega: f64) -> Result<(ComplexField, f64)> {
    let fam = problem.scaled_family(u)?;
    let rho = nehari_amplitude(&fam, omega, 1e6)
        .ok_or_else(|| NlsError::NehariEmpty("S_omega(rho u) keeps one sign along the amplitude ray".into()))?;
    Ok((u.scaled(rho), rho))
}

/// L2-preserving dilation of `u` onto `{Q = 0}` (or `{Q_1 = 0}`).
///
/// The root is found on the analytic family, then the field is materialized by spectral
/// resampling and the root is polished on the materialized field.
pub fn project_to_virial_zero(
    problem: &Problem,
    u: &ComplexField,
    which: VirialConstraint,
) -> Result<(ComplexField, f64)> {
    let dims = problem.model().dims;
    let mut total = 1.0;
    let mut current = u.clone();
    for pass in 0..4 {
        let fam = problem.scaled_family(&current)?;
        let lam = virial_dilation(&fam, 1.0, dims, which).ok_or_else(|| {
            NlsError::NotDilationReachable("the virial functional keeps one sign for lambda in [1e-3, 1e3]".into())
        })?;
        if lam == 1.0 {
            break;
        }
        current = l2_dilation(&current, lam);
        total *= lam;
        let c = problem.components(&current)?;
        if which.eval(&c, dims).abs() <= 1e-10 * virial_scale(&c) || pass == 3 {
            break;
        }
    }
    Ok((current, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::gaussian;
    use crate::grid::make_grid;
    use crate::model::{Kernel, ModelSpec, Nonlinearity, Potential};
    use num_rational::Rational64;

    fn power_problem(b: f64, p: (i64, i64), v: Potential, l: f64, m: usize) -> Problem {
        let model =
            ModelSpec::new(1, v, Nonlinearity::Power { b, p: Rational64::new(p.0, p.1) }, Kernel::Zero).unwrap();
        Problem::new(model, make_grid(1, l, m).unwrap()).unwrap()
    }

    #[test]
    fn dilation_root_matches_two_term_balance() {
        // Q(u_lambda) = 2 lambda^2 K - (N p / (p + 1)) lambda^{N p} B with B = int |u|^{2p+2}
        let pr = power_problem(1.0, (3, 1), Potential::Zero, 40.0, 1024);
        let u = gaussian(pr.grid(), 1.1, 1.0, 0.0);
        let c = pr.components(&u).unwrap();
        let p = 3.0;
        let b = c.sf_integral;
        let k = c.kinetic;
        let closed = (2.0 * k * (p + 1.0) / (p * b)).powf(1.0 / (p - 2.0));
        let fam = pr.scaled_family(&u).unwrap();
        let lam = virial_dilation(&fam, 1.0, 1, VirialConstraint::Q).unwrap();
        assert!((lam - closed).abs() < 1e-10 * closed, "{lam} vs {closed}");
    }

    #[test]
    fn fixed_point_and_unreachable_cases() {
        let pr = power_problem(1.0, (3, 1), Potential::Zero, 40.0, 1024);
        let u = gaussian(pr.grid(), 1.1, 1.0, 0.0);
        let (v, _) = project_to_virial_zero(&pr, &u, VirialConstraint::Q).unwrap();
        let fam = pr.scaled_family(&v).unwrap();
        let lam = virial_dilation(&fam, 1.0, 1, VirialConstraint::Q).unwrap();
        assert!((lam - 1.0).abs() < 1e-8);
        let c = pr.components(&v).unwrap();
        assert!(c.q(1).abs() <= 1e-8 * virial_scale(&c));
        let defocusing = power_problem(-1.0, (3, 1), Potential::Zero, 40.0, 1024);
        assert!(matches!(
            project_to_virial_zero(&defocusing, &u, VirialConstraint::Q),
            Err(NlsError::NotDilationReachable(_))
        ));
    }

    #[test]
    fn nehari_root_sign_pattern() {
        let pr = power_problem(1.0, (5, 2), Potential::Harmonic { a: 1.0 }, 20.0, 512);
        let u = gaussian(pr.grid(), 1.0, 0.8, 0.0);
        let fam = pr.scaled_family(&u).unwrap();
        assert!(fam.eval(1e-3, 1.0).s_omega(1.0) > 0.0);
        let rho = nehari_amplitude(&fam, 1.0, 1e6).unwrap();
        let c = fam.eval(rho, 1.0);
        assert!(c.s_omega(1.0).abs() <= 1e-12 * nehari_scale(&c, 1.0));
        assert!(c.i_omega(1.0) > 0.0);
        let linear = Problem::new(
            ModelSpec::new(1, Potential::Harmonic { a: 1.0 }, Nonlinearity::Zero, Kernel::Zero).unwrap(),
            pr.grid().clone(),
        )
        .unwrap();
        assert!(project_to_nehari(&linear, &u, 1.0).is_err());
    }
}
