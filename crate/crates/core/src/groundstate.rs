//! Stationary states of `2 omega w + V w - Δw = f(|w|^2) w + (W * |w|^2) w`.
//!
//! The solver is a preconditioned damped fixed-point iteration
//! `w <- w - tau A^{-1} R(w)` with `A = 2 omega + V - Δ` and `R` the residual of the
//! stationary equation. Each iterate is rescaled onto the Nehari manifold
//! `S_omega = 0`: the fixed-point map is unstable along the amplitude direction, and
//! the rescaling removes exactly that mode.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ansatz::unit_mass_gaussian;
use crate::error::{NlsError, Result};
use crate::exec;
use crate::functionals::{Components, Problem};
use crate::grid::{spectral_laplacian, ComplexField};
use crate::projection::{nehari_amplitude, virial_scale};

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    /// Target L2 norm of the stationary residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Damping of the fixed-point update.
    pub tau: f64,
    /// Seed for the perturbed restarts after a mass collapse.
    pub seed: u64,
    /// Relative tolerance of the inner conjugate-gradient solve (unused when `V = 0`).
    pub inner_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iter: 10_000, tau: 0.5, seed: 0, inner_tol: 1e-6 }
    }
}

#[derive(Clone, Debug)]
pub struct StationaryState {
    pub field: ComplexField,
    pub omega: f64,
    pub residual_norm: f64,
    pub s_omega_value: f64,
    pub q_value: f64,
    pub pohozaev_residual: f64,
    pub iterations: usize,
    pub components: Components,
}

/// `A z = (2 omega + V) z - Δz` and its approximate inverse.
struct Operator<'a> {
    problem: &'a Problem,
    omega: f64,
    inner_tol: f64,
}

impl Operator<'_> {
    fn apply(&self, z: &[f64]) -> Vec<f64> {
        let grid = self.problem.grid();
        let mut buf: Vec<Complex64> = z.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        grid.fft_forward(&mut buf);
        let k2 = grid.k_squared();
        exec::for_each_mut(&mut buf, |i, c| *c *= k2[i]);
        grid.fft_inverse(&mut buf);
        let v = self.problem.potential();
        let two_omega = 2.0 * self.omega;
        buf.iter().enumerate().map(|(i, c)| c.re + (two_omega + v[i]) * z[i]).collect()
    }

    /// `(2 omega - Δ)^{-1} r`, exact when `V = 0`.
    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let grid = self.problem.grid();
        let mut buf: Vec<Complex64> = r.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        grid.fft_forward(&mut buf);
        let k2 = grid.k_squared();
        let two_omega = 2.0 * self.omega;
        exec::for_each_mut(&mut buf, |i, c| *c /= two_omega + k2[i]);
        grid.fft_inverse(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    fn solve(&self, r: &[f64]) -> Vec<f64> {
        if self.problem.model().potential.is_zero() {
            return self.precondition(r);
        }
        pcg(|z| self.apply(z), |z| self.precondition(z), r, self.inner_tol, 200)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    exec::sum(a.len(), |i| a[i] * b[i])
}

/// Preconditioned conjugate gradients for a symmetric positive definite operator.
fn pcg<A, M>(apply: A, precond: M, b: &[f64], rel_tol: f64, max_iter: usize) -> Vec<f64>
where
    A: Fn(&[f64]) -> Vec<f64>,
    M: Fn(&[f64]) -> Vec<f64>,
{
    let mut x = precond(b);
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return vec![0.0; b.len()];
    }
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        if dot(&r, &r).sqrt() <= rel_tol * b_norm {
            break;
        }
        let ap = apply(&p);
        let alpha = rz / dot(&p, &ap);
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..p.len() {
            p[i] = z[i] + beta * p[i];
        }
    }
    x
}

/// Residual `(2 omega + V - Δ) w - f(w^2) w - (W * w^2) w` of a real field.
fn residual(problem: &Problem, omega: f64, w: &[f64]) -> Vec<f64> {
    let grid = problem.grid();
    let u = ComplexField::new(grid.clone(), w.iter().map(|&x| Complex64::new(x, 0.0)).collect()).expect("grid size");
    let lap = spectral_laplacian(&u);
    let rho: Vec<f64> = w.iter().map(|x| x * x).collect();
    let h = problem.hartree().convolve(&rho);
    let v = problem.potential();
    let nl = &problem.model().local;
    let l = lap.values();
    (0..w.len()).map(|i| (2.0 * omega + v[i] - nl.f(rho[i]) - h[i]) * w[i] - l[i].re).collect()
}

fn to_field(problem: &Problem, w: &[f64]) -> ComplexField {
    ComplexField::new(problem.grid().clone(), w.iter().map(|&x| Complex64::new(x, 0.0)).collect()).expect("grid size")
}

fn l2_norm(problem: &Problem, r: &[f64]) -> f64 {
    (dot(r, r) * problem.grid().cell_volume()).sqrt()
}

/// Signed difference of the two sides of the Pohozaev identity.
///
/// `N omega ||w||^2 + (N-2)/2 ||grad w||^2 + N/2 int V w^2 + 1/2 int (x.grad V) w^2`
/// `- N/2 int F - N/2 int (W * w^2) w^2 - 1/4 int ((x.grad W) * w^2) w^2`.
pub fn pohozaev_residual(c: &Components, dims: usize, omega: f64) -> f64 {
    let n = dims as f64;
    let lhs = n * omega * c.mass + 0.5 * (n - 2.0) * c.kinetic + 0.5 * n * c.potential + 0.5 * c.x_potential;
    let rhs = 0.5 * n * c.f_integral + 0.5 * n * c.pair + 0.25 * c.pair_radial;
    lhs - rhs
}

fn perturbed(problem: &Problem, base: &ComplexField, rng: &mut ChaCha8Rng) -> ComplexField {
    let grid = problem.grid();
    let dims = grid.dims();
    let mut centers = [[0.0f64; 3]; 3];
    let mut weights = [0.0f64; 3];
    for (c, w) in centers.iter_mut().zip(weights.iter_mut()) {
        for d in c.iter_mut().take(dims) {
            *d = rng.gen_range(-0.5..0.5);
        }
        *w = rng.gen_range(-0.3..0.3);
    }
    let vals = base
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x = grid.position(i);
            let bump: f64 = centers
                .iter()
                .zip(weights)
                .map(|(c, w)| {
                    let r2: f64 = (0..dims).map(|d| (x[d] - c[d]).powi(2)).sum();
                    w * (-r2).exp()
                })
                .sum();
            Complex64::new(v.re + bump, 0.0)
        })
        .collect();
    ComplexField::new(grid.clone(), vals).expect("grid size")
}

pub fn solve_stationary(
    problem: &Problem,
    omega: f64,
    init: Option<&ComplexField>,
    opts: &SolveOptions,
) -> Result<StationaryState> {
    if !(omega > 0.0) {
        return Err(NlsError::InvalidOptions("omega must be positive".into()));
    }
    if !(opts.tol > 0.0 && opts.tau > 0.0 && opts.tau <= 1.0) {
        return Err(NlsError::InvalidOptions("need tol > 0 and 0 < tau <= 1".into()));
    }
    let start = match init {
        Some(u) => {
            if u.grid() != problem.grid() {
                return Err(NlsError::GridMismatch);
            }
            u.real_projected()
        }
        None => unit_mass_gaussian(problem.grid(), 1.0),
    };
    if start.norm_sq() < 1e-8 {
        return Err(NlsError::ZeroField("initial guess has (near) zero mass".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut last_err = None;
    for attempt in 0..4 {
        let guess = if attempt == 0 { start.clone() } else { perturbed(problem, &start, &mut rng) };
        match iterate(problem, omega, &guess, opts) {
            Err(e @ NlsError::MassCollapse(_)) => last_err = Some(e),
            other => return other,
        }
    }
    Err(last_err.unwrap())
}

fn iterate(problem: &Problem, omega: f64, guess: &ComplexField, opts: &SolveOptions) -> Result<StationaryState> {
    let op = Operator { problem, omega, inner_tol: opts.inner_tol };
    let dims = problem.model().dims;
    let nehari = |w: &[f64]| -> Result<Vec<f64>> {
        let fam = problem.scaled_family(&to_field(problem, w))?;
        let rho = nehari_amplitude(&fam, omega, 1e6)
            .ok_or_else(|| NlsError::MassCollapse("no Nehari point on the amplitude ray".into()))?;
        Ok(w.iter().map(|x| x * rho).collect())
    };
    let mut w: Vec<f64> = nehari(&guess.values().iter().map(|v| v.re).collect::<Vec<_>>())?;
    let mut history: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let mut res_norm;
    loop {
        let r = residual(problem, omega, &w);
        res_norm = l2_norm(problem, &r);
        if !res_norm.is_finite() {
            return Err(NlsError::Divergence("residual is not finite".into()));
        }
        history.push(res_norm);
        if res_norm <= opts.tol || iterations >= opts.max_iter {
            break;
        }
        if history.len() > 100 {
            let window = &history[history.len() - 101..];
            if window[100] > 10.0 * window[..100].iter().copied().fold(f64::INFINITY, f64::min) {
                return Err(NlsError::Divergence(format!(
                    "residual grew from {:.3e} to {:.3e} within 100 iterations",
                    window[0], window[100]
                )));
            }
        }
        let step = op.solve(&r);
        let next: Vec<f64> = w.iter().zip(&step).map(|(a, b)| a - opts.tau * b).collect();
        w = nehari(&next)?;
        let mass = dot(&w, &w) * problem.grid().cell_volume();
        if mass < 1e-8 {
            return Err(NlsError::MassCollapse(format!("mass fell to {mass:.3e}")));
        }
        iterations += 1;
    }
    let field = to_field(problem, &w);
    let c = problem.components(&field)?;
    Ok(StationaryState {
        field,
        omega,
        residual_norm: res_norm,
        s_omega_value: c.s_omega(omega),
        q_value: c.q(dims),
        pohozaev_residual: pohozaev_residual(&c, dims, omega),
        iterations,
        components: c,
    })
}

/// Outcome of checking the Nehari, virial and Pohozaev identities on a stationary state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityReport {
    pub s_omega: f64,
    pub q: f64,
    pub pohozaev: f64,
    pub eps: f64,
    pub holds: bool,
}

pub fn verify_stationary_identities(state: &StationaryState, problem: &Problem) -> Result<IdentityReport> {
    let c = problem.components(&state.field)?;
    if c.mass < 1e-8 {
        return Err(NlsError::ZeroField("not a stationary state: zero field".into()));
    }
    let dims = problem.model().dims;
    let sigma = (c.mass + c.kinetic + c.potential).sqrt();
    let eps = (10.0 * state.residual_norm * sigma).max(1e-6);
    let s = c.s_omega(state.omega);
    let q = c.q(dims);
    Ok(IdentityReport {
        s_omega: s,
        q,
        pohozaev: pohozaev_residual(&c, dims, state.omega),
        eps,
        holds: s.abs() <= eps && q.abs() <= eps,
    })
}

/// Probe family around a stationary state.
#[derive(Clone, Debug, PartialEq)]
pub enum ProbeMode {
    /// `rho w`.
    Amplitude(Vec<f64>),
    /// `k w(lambda x)`.
    DilationPair(Vec<(f64, f64)>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbePoint {
    pub k: f64,
    pub lambda: f64,
    pub s_omega: f64,
    pub q: f64,
    pub i_omega: f64,
}

pub fn scaling_probe(state: &StationaryState, problem: &Problem, mode: &ProbeMode) -> Result<Vec<ProbePoint>> {
    let fam = problem.scaled_family(&state.field)?;
    let omega = state.omega;
    let dims = problem.model().dims;
    let nd = dims as f64;
    let pairs: Vec<(f64, f64)> = match mode {
        ProbeMode::Amplitude(r) => r.iter().map(|&x| (x, 1.0)).collect(),
        ProbeMode::DilationPair(p) => p.clone(),
    };
    pairs
        .into_iter()
        .map(|(k, lambda)| {
            if !(k > 0.0 && k <= 4.0 && lambda > 0.0 && lambda <= 4.0) {
                return Err(NlsError::InvalidOptions(format!(
                    "probe parameters must lie in (0, 4], got ({k}, {lambda})"
                )));
            }
            // k w(lambda x) = (k lambda^{-N/2}) * lambda^{N/2} w(lambda x)
            let c = fam.eval(k * lambda.powf(-0.5 * nd), lambda);
            Ok(ProbePoint { k, lambda, s_omega: c.s_omega(omega), q: c.q(dims), i_omega: c.i_omega(omega) })
        })
        .collect()
}

/// Search `k in [1, 1.5]`, `lambda in [0.5, 1.5]` for `Q(k w(lambda x)) = 0` with `S_omega < 0`.
///
/// Returns the materialized field and its probe point, or `None` when no sign pattern is found.
pub fn find_cross_point(state: &StationaryState, problem: &Problem) -> Result<Option<(ComplexField, ProbePoint)>> {
    let fam = problem.scaled_family(&state.field)?;
    let dims = problem.model().dims;
    let nd = dims as f64;
    let omega = state.omega;
    let q_at = |k: f64, lam: f64| fam.eval(k * lam.powf(-0.5 * nd), lam).q(dims);
    for i in 1..=50 {
        let k = 1.0 + 0.01 * i as f64;
        let lams: Vec<f64> = (0..=40).map(|j| 0.5 + 0.025 * j as f64).collect();
        let qs: Vec<f64> = lams.iter().map(|&l| q_at(k, l)).collect();
        for j in 0..40 {
            if (qs[j] > 0.0) != (qs[j + 1] > 0.0) {
                let (mut lo, mut hi, q_lo) = (lams[j], lams[j + 1], qs[j]);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if (q_at(k, mid) > 0.0) == (q_lo > 0.0) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let lam = 0.5 * (lo + hi);
                let amp = k * lam.powf(-0.5 * nd);
                let c = fam.eval(amp, lam);
                if c.s_omega(omega) < 0.0 && c.q(dims).abs() <= 1e-9 * virial_scale(&c) {
                    let field = crate::grid::l2_dilation(&state.field, lam).scaled(amp);
                    let point = ProbePoint {
                        k,
                        lambda: lam,
                        s_omega: c.s_omega(omega),
                        q: c.q(dims),
                        i_omega: c.i_omega(omega),
                    };
                    return Ok(Some((field, point)));
                }
            }
        }
    }
    Ok(None)
}
