//! Upper-bound estimates of the threshold levels `d_I`, `d'_I`, `d_N`, `d_M`, `d_II`.
//!
//! Each level is an infimum of `I_omega` over a constraint set. The estimate is the
//! minimum over a finite candidate family, every candidate first moved onto the
//! constraint by a one-parameter scaling and then refined by projected descent.

use std::fmt::{self, Write as _};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ansatz::gaussian;
use crate::error::{NlsError, Result};
use crate::exec;
use crate::functionals::{Components, Problem};
use crate::grid::ComplexField;
use crate::groundstate::{find_cross_point, solve_stationary, SolveOptions, StationaryState};
use crate::projection::{
    amplitude_root, nehari_scale, project_to_nehari, project_to_virial_zero, virial_scale, VirialConstraint,
};

/// Which level is estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThresholdKind {
    /// `inf I_omega` over `{Q = 0}` (`V = 0`).
    DI,
    /// `inf I_omega` over `{Q_1 = 0}`.
    DPrimeI,
    /// `inf I_omega` over the Nehari manifold `{S_omega = 0}`.
    DN,
    /// `inf I_omega` over `{S_omega < 0, Q = 0}`.
    DM,
    /// `min(d_N, d_M)`.
    DII,
}

impl ThresholdKind {
    pub fn key(&self) -> &'static str {
        match self {
            ThresholdKind::DI => "d_I",
            ThresholdKind::DPrimeI => "d_prime_I",
            ThresholdKind::DN => "d_N",
            ThresholdKind::DM => "d_M",
            ThresholdKind::DII => "d_II",
        }
    }

    fn constraint(&self) -> Constraint {
        match self {
            ThresholdKind::DI | ThresholdKind::DM => Constraint::Virial(VirialConstraint::Q),
            ThresholdKind::DPrimeI => Constraint::Virial(VirialConstraint::Q1),
            ThresholdKind::DN | ThresholdKind::DII => Constraint::Nehari,
        }
    }
}

impl fmt::Display for ThresholdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Constraint {
    Nehari,
    Virial(VirialConstraint),
}

impl Constraint {
    fn value(&self, c: &Components, dims: usize, omega: f64) -> f64 {
        match self {
            Constraint::Nehari => c.s_omega(omega),
            Constraint::Virial(v) => v.eval(c, dims),
        }
    }

    fn scale(&self, c: &Components, omega: f64) -> f64 {
        match self {
            Constraint::Nehari => nehari_scale(c, omega),
            Constraint::Virial(_) => virial_scale(c),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    /// Gaussian widths of the built-in lattice.
    pub widths: Vec<f64>,
    /// Gaussian amplitudes of the built-in lattice.
    pub amplitudes: Vec<f64>,
    /// Random smooth perturbations of the best built-in candidate.
    pub perturbations: usize,
    /// Maximum projected-descent steps per refined candidate.
    pub refine_steps: usize,
    /// How many of the best built-in candidates are refined (at least 3).
    pub refine_top: usize,
    pub seed: u64,
    /// Include the computed stationary state in the family.
    pub use_ground_state: bool,
    /// Refuse models outside the hypotheses behind the level.
    pub enforce_hypotheses: bool,
    /// Caller-supplied candidates; each is refined, so adding one never raises the estimate.
    pub extra_candidates: Vec<ComplexField>,
    pub solve: SolveOptions,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            widths: vec![0.5, 0.75, 1.0, 1.5, 2.0],
            amplitudes: vec![0.5, 1.0, 2.0],
            perturbations: 5,
            refine_steps: 200,
            refine_top: 4,
            seed: 0,
            use_ground_state: true,
            enforce_hypotheses: true,
            extra_candidates: Vec::new(),
            solve: SolveOptions::default(),
        }
    }
}

impl SearchOptions {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NlsError::InvalidOptions(m.into()));
        if self.widths.iter().chain(&self.amplitudes).any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("lattice widths and amplitudes must be positive");
        }
        if self.refine_top < 3 {
            return bad("refine_top must be at least 3 so that restart spread is defined");
        }
        Ok(())
    }
}

/// Estimate of one threshold level together with its evidence.
#[derive(Clone, Debug)]
pub struct ThresholdReport {
    pub which: ThresholdKind,
    /// Minimum of `I_omega` over the feasible family: an upper bound of the infimum.
    pub value: f64,
    pub minimizer: ComplexField,
    /// `|constraint(minimizer)|` relative to the constraint's own scale.
    pub constraint_residual: f64,
    pub omega: f64,
    /// Accepted descent steps summed over refined candidates.
    pub iterations: usize,
    /// Refined values of the independent starts, ascending.
    pub restarts: Vec<f64>,
    /// `(max - min) / min` over `restarts`.
    pub spread: f64,
    pub converged: bool,
    pub candidates: usize,
    pub discarded: usize,
    /// Candidates placed on `{Q = 0}` by amplitude because dilation kept the sign of `Q`.
    pub amplitude_projections: usize,
    pub notes: Vec<String>,
}

impl ThresholdReport {
    /// Flat `key = value` text block.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let k = self.which.key();
        let _ = writeln!(s, "{k}.value = {:.16e}", self.value);
        let _ = writeln!(s, "{k}.kind = upper bound over the search family");
        let _ = writeln!(s, "{k}.omega = {:.16e}", self.omega);
        let _ = writeln!(s, "{k}.constraint_residual = {:.6e}", self.constraint_residual);
        let _ = writeln!(s, "{k}.iterations = {}", self.iterations);
        let restarts: Vec<String> = self.restarts.iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(s, "{k}.restarts = {}", restarts.join(","));
        let _ = writeln!(s, "{k}.spread = {:.6e}", self.spread);
        let _ = writeln!(s, "{k}.converged = {}", self.converged);
        let _ = writeln!(s, "{k}.candidates = {}", self.candidates);
        let _ = writeln!(s, "{k}.discarded = {}", self.discarded);
        let _ = writeln!(s, "{k}.amplitude_projections = {}", self.amplitude_projections);
        for n in &self.notes {
            let _ = writeln!(s, "{k}.note = {n}");
        }
        s
    }
}

/// Estimates of `d_N`, `d_M` and their minimum `d_II`.
#[derive(Clone, Debug)]
pub struct SecondThresholds {
    pub d_n: ThresholdReport,
    pub d_m: ThresholdReport,
    pub d_ii: ThresholdReport,
}

/// L2-preserving dilation onto `{Q = 0}`; the `d_I` constraint.
pub fn project_to_q_zero(problem: &Problem, u: &ComplexField) -> Result<ComplexField> {
    project_to_virial_zero(problem, u, VirialConstraint::Q).map(|(v, _)| v)
}

struct Candidate {
    field: ComplexField,
    value: f64,
}

struct Search<'a> {
    problem: &'a Problem,
    omega: f64,
    constraint: Constraint,
    /// Keep only candidates with `S_omega < 0` (the cross-manifold).
    need_negative_s: bool,
    amplitude_projections: usize,
}

impl Search<'_> {
    fn dims(&self) -> usize {
        self.problem.model().dims
    }

    /// Move `u` onto the constraint; `None` when the candidate leaves the family.
    fn project(&mut self, u: &ComplexField) -> Result<Option<(ComplexField, Components)>> {
        let placed = match self.constraint {
            Constraint::Nehari => match project_to_nehari(self.problem, u, self.omega) {
                Ok((v, _)) => v,
                Err(NlsError::NehariEmpty(_)) => return Ok(None),
                Err(e) => return Err(e),
            },
            Constraint::Virial(which) => match project_to_virial_zero(self.problem, u, which) {
                Ok((v, _)) => v,
                Err(NlsError::NotDilationReachable(_)) => {
                    let fam = self.problem.scaled_family(u)?;
                    let dims = self.dims();
                    match amplitude_root(&fam, |c| which.eval(c, dims), 1e6) {
                        Some(rho) => {
                            self.amplitude_projections += 1;
                            u.scaled(rho)
                        }
                        None => return Ok(None),
                    }
                }
                Err(e) => return Err(e),
            },
        };
        let c = self.problem.components(&placed)?;
        if !self.feasible(&c) {
            return Ok(None);
        }
        Ok(Some((placed, c)))
    }

    fn residual(&self, c: &Components) -> f64 {
        let scale = self.constraint.scale(c, self.omega);
        self.constraint.value(c, self.dims(), self.omega).abs() / scale.max(f64::MIN_POSITIVE)
    }

    fn feasible(&self, c: &Components) -> bool {
        c.mass > 0.0
            && self.residual(c) <= 1e-6
            && (!self.need_negative_s || c.s_omega(self.omega) < 0.0)
            && c.i_omega(self.omega).is_finite()
    }

    fn gradient_pair(&self, u: &ComplexField) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let g = self.problem.gradients(u, self.omega)?;
        let h = match self.constraint {
            Constraint::Nehari => g.s_omega,
            Constraint::Virial(VirialConstraint::Q) => g.q,
            Constraint::Virial(VirialConstraint::Q1) => g.q1,
        };
        Ok((g.i_omega.into_values(), h.into_values()))
    }

    /// `(2 omega - Δ)^{-1}`, the principal part of the Hessian of `I_omega`.
    fn precondition(&self, r: &[Complex64]) -> Vec<Complex64> {
        let grid = self.problem.grid();
        let mut buf = r.to_vec();
        grid.fft_forward(&mut buf);
        let k2 = grid.k_squared();
        let shift = (2.0 * self.omega).max(1e-3);
        exec::for_each_mut(&mut buf, |i, c| *c /= shift + k2[i]);
        grid.fft_inverse(&mut buf);
        buf
    }

    fn inner(&self, a: &[Complex64], b: &[Complex64]) -> f64 {
        exec::sum(a.len(), |i| (a[i].conj() * b[i]).re) * self.problem.grid().cell_volume()
    }

    /// Projected descent on the constraint set, re-projecting after every step.
    fn refine(&mut self, start: Candidate, max_steps: usize) -> Result<(Candidate, usize)> {
        let mut cur = start;
        let mut tau = 1.0;
        let mut accepted = 0;
        let mut stalled = 0;
        for _ in 0..max_steps {
            let (g, h) = self.gradient_pair(&cur.field)?;
            let (pg, ph) = (self.precondition(&g), self.precondition(&h));
            let hph = self.inner(&h, &ph);
            let alpha = if hph.abs() > 0.0 { self.inner(&g, &ph) / hph } else { 0.0 };
            let d: Vec<Complex64> = pg.iter().zip(&ph).map(|(a, b)| -(a - b * alpha)).collect();
            let slope = self.inner(&g, &d);
            if !(slope < 0.0) || slope.abs() <= 1e-15 * cur.value.abs().max(1e-300) {
                break;
            }
            let mut moved = false;
            while tau >= 1e-10 {
                let vals: Vec<Complex64> = cur.field.values().iter().zip(&d).map(|(u, di)| u + di * tau).collect();
                let trial = ComplexField::new(cur.field.grid().clone(), vals)?;
                if let Some((field, c)) = self.project(&trial)? {
                    let value = c.i_omega(self.omega);
                    if value <= cur.value + 1e-4 * tau * slope {
                        let gain = (cur.value - value) / cur.value.abs().max(1e-300);
                        cur = Candidate { field, value };
                        moved = true;
                        stalled = if gain < 1e-13 { stalled + 1 } else { 0 };
                        break;
                    }
                }
                tau *= 0.5;
            }
            if !moved {
                break;
            }
            accepted += 1;
            tau = (tau * 2.0).min(1.0);
            if stalled >= 5 {
                break;
            }
        }
        Ok((cur, accepted))
    }
}

fn smooth_perturbation(base: &ComplexField, rng: &mut ChaCha8Rng) -> ComplexField {
    let grid = base.grid();
    let dims = grid.dims();
    // length scale of the base field from its second moment
    let mass = base.norm_sq();
    let r2 = grid.r_squared();
    let second = base.values().iter().zip(r2).map(|(v, q)| v.norm_sqr() * q).sum::<f64>() * grid.cell_volume();
    let radius = (second / mass.max(1e-300)).sqrt().max(grid.spacing());
    let bumps: Vec<([f64; 3], f64, f64)> = (0..3)
        .map(|_| {
            let mut c = [0.0; 3];
            for v in c.iter_mut().take(dims) {
                *v = rng.gen_range(-1.0..1.0) * radius;
            }
            (c, rng.gen_range(-0.3..0.3), rng.gen_range(0.5..1.5) * radius)
        })
        .collect();
    let vals = base
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x = grid.position(i);
            let factor: f64 = 1.0
                + bumps
                    .iter()
                    .map(|(c, w, s)| {
                        let d2: f64 = (0..dims).map(|a| (x[a] - c[a]).powi(2)).sum();
                        w * (-d2 / (s * s)).exp()
                    })
                    .sum::<f64>();
            v * factor
        })
        .collect();
    ComplexField::new(grid.clone(), vals).expect("grid size")
}

fn gate(problem: &Problem, which: ThresholdKind, opts: &SearchOptions) -> Result<()> {
    if !opts.enforce_hypotheses {
        return Ok(());
    }
    let report = problem.model().hypotheses();
    let ok = match which {
        ThresholdKind::DI | ThresholdKind::DPrimeI => report.d_i_gate().is_some(),
        _ => report.d_ii_gate().is_some(),
    };
    if ok {
        return Ok(());
    }
    let route = match which {
        ThresholdKind::DI | ThresholdKind::DPrimeI => &report.threshold_i,
        _ => &report.threshold_ii,
    };
    Err(NlsError::HypothesisViolation(format!("{}: {}", which.key(), route.failure_reasons())))
}

fn ground_state(
    problem: &Problem,
    omega: f64,
    opts: &SearchOptions,
    notes: &mut Vec<String>,
) -> Option<StationaryState> {
    if !opts.use_ground_state {
        return None;
    }
    match solve_stationary(problem, omega, None, &opts.solve) {
        Ok(st) => Some(st),
        Err(e) => {
            notes.push(format!("stationary state unavailable: {e}"));
            None
        }
    }
}

fn estimate(
    problem: &Problem,
    omega: f64,
    which: ThresholdKind,
    opts: &SearchOptions,
    seeds: Vec<ComplexField>,
    mut notes: Vec<String>,
) -> Result<ThresholdReport> {
    let mut search = Search {
        problem,
        omega,
        constraint: which.constraint(),
        need_negative_s: which == ThresholdKind::DM,
        amplitude_projections: 0,
    };
    let grid = problem.grid();
    let mut raw: Vec<ComplexField> = seeds;
    for &w in &opts.widths {
        for &a in &opts.amplitudes {
            raw.push(gaussian(grid, a, w, 0.0));
        }
    }
    let mut candidates = 0;
    let mut discarded = 0;
    let mut builtin: Vec<Candidate> = Vec::new();
    for u in &raw {
        candidates += 1;
        match search.project(u)? {
            Some((field, c)) => builtin.push(Candidate { field, value: c.i_omega(omega) }),
            None => discarded += 1,
        }
    }
    if let Some(best) = builtin.iter().min_by(|a, b| a.value.total_cmp(&b.value)) {
        let base = best.field.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for _ in 0..opts.perturbations {
            candidates += 1;
            match search.project(&smooth_perturbation(&base, &mut rng))? {
                Some((field, c)) => builtin.push(Candidate { field, value: c.i_omega(omega) }),
                None => discarded += 1,
            }
        }
    }
    // stable order: ascending value, ties by construction order
    let mut order: Vec<usize> = (0..builtin.len()).collect();
    order.sort_by(|&a, &b| builtin[a].value.total_cmp(&builtin[b].value));
    let refine_set: Vec<usize> = order.iter().copied().take(opts.refine_top).collect();
    let mut best: Option<Candidate> = None;
    let mut restarts = Vec::new();
    let mut iterations = 0;
    let keep = |c: Candidate, best: &mut Option<Candidate>| {
        if best.as_ref().map(|b| c.value < b.value).unwrap_or(true) {
            *best = Some(c);
        }
    };
    let mut slots: Vec<Option<Candidate>> = builtin.into_iter().map(Some).collect();
    for &i in &refine_set {
        let start = slots[i].take().expect("each candidate refined once");
        let (refined, steps) = search.refine(start, opts.refine_steps)?;
        iterations += steps;
        restarts.push(refined.value);
        keep(refined, &mut best);
    }
    for c in slots.into_iter().flatten() {
        keep(c, &mut best);
    }
    for u in &opts.extra_candidates {
        candidates += 1;
        if u.grid() != grid {
            return Err(NlsError::GridMismatch);
        }
        match search.project(u)? {
            Some((field, c)) => {
                let (refined, steps) =
                    search.refine(Candidate { field, value: c.i_omega(omega) }, opts.refine_steps)?;
                iterations += steps;
                keep(refined, &mut best);
            }
            None => discarded += 1,
        }
    }
    let best = best.ok_or_else(|| {
        let msg = format!("no candidate of {candidates} reached the {} constraint set", which.key());
        match which {
            ThresholdKind::DN => NlsError::NehariEmpty(msg),
            ThresholdKind::DI | ThresholdKind::DPrimeI => NlsError::NotDilationReachable(msg),
            _ => NlsError::EmptyFamily(msg),
        }
    })?;
    restarts.sort_by(f64::total_cmp);
    let spread = match (restarts.first(), restarts.last()) {
        (Some(lo), Some(hi)) if restarts.len() >= 3 => (hi - lo) / lo.abs(),
        _ => f64::INFINITY,
    };
    let converged = spread <= 0.1;
    if restarts.len() < 3 {
        notes.push(format!("only {} feasible starts; restart spread undefined", restarts.len()));
    }
    if search.amplitude_projections > 0 {
        notes.push(
            "dilation left the sign of the constraint unchanged for some candidates; they were placed by amplitude"
                .into(),
        );
    }
    let c = problem.components(&best.field)?;
    if !(best.value > 0.0) {
        notes.push("estimate is not positive".into());
    }
    Ok(ThresholdReport {
        which,
        value: best.value,
        constraint_residual: search.residual(&c),
        minimizer: best.field,
        omega,
        iterations,
        restarts,
        spread,
        converged,
        candidates,
        discarded,
        amplitude_projections: search.amplitude_projections,
        notes,
    })
}

fn check_inputs(problem: &Problem, omega: f64, opts: &SearchOptions) -> Result<()> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(NlsError::InvalidOptions("omega must be positive".into()));
    }
    opts.validate()?;
    problem.model().validate()
}

/// `inf { omega ||u||^2 + E(u) : Q(u) = 0 }` for `V = 0`.
pub fn estimate_d_i(problem: &Problem, omega: f64, opts: &SearchOptions) -> Result<ThresholdReport> {
    check_inputs(problem, omega, opts)?;
    gate(problem, ThresholdKind::DI, opts)?;
    let mut notes = Vec::new();
    if !problem.model().potential.is_zero() {
        notes.push("V is not zero; the level is defined for V = 0".into());
    }
    let seeds = ground_state(problem, omega, opts, &mut notes).map(|s| vec![s.field]).unwrap_or_default();
    estimate(problem, omega, ThresholdKind::DI, opts, seeds, notes)
}

/// `inf { omega ||u||^2 + E(u) : Q_1(u) = 0 }`.
pub fn estimate_d_prime_i(problem: &Problem, omega: f64, opts: &SearchOptions) -> Result<ThresholdReport> {
    check_inputs(problem, omega, opts)?;
    gate(problem, ThresholdKind::DPrimeI, opts)?;
    let mut notes = Vec::new();
    let seeds = ground_state(problem, omega, opts, &mut notes).map(|s| vec![s.field]).unwrap_or_default();
    estimate(problem, omega, ThresholdKind::DPrimeI, opts, seeds, notes)
}

/// `inf I_omega` over the Nehari manifold.
pub fn estimate_d_n(problem: &Problem, omega: f64, opts: &SearchOptions) -> Result<ThresholdReport> {
    check_inputs(problem, omega, opts)?;
    gate(problem, ThresholdKind::DN, opts)?;
    let mut notes = Vec::new();
    let seeds = ground_state(problem, omega, opts, &mut notes).map(|s| vec![s.field]).unwrap_or_default();
    estimate(problem, omega, ThresholdKind::DN, opts, seeds, notes)
}

/// `inf I_omega` over the cross-manifold `{S_omega < 0, Q = 0}`.
pub fn estimate_d_m(problem: &Problem, omega: f64, opts: &SearchOptions) -> Result<ThresholdReport> {
    check_inputs(problem, omega, opts)?;
    gate(problem, ThresholdKind::DM, opts)?;
    let mut notes = Vec::new();
    let mut seeds = Vec::new();
    if let Some(st) = ground_state(problem, omega, opts, &mut notes) {
        match find_cross_point(&st, problem)? {
            Some((field, point)) => {
                notes.push(format!("cross point seeded at k = {:.6}, lambda = {:.6}", point.k, point.lambda));
                seeds.push(field);
            }
            None => notes.push("no cross point found near the stationary state".into()),
        }
        // a slightly inflated copy lies on the S_omega < 0 side once dilated onto Q = 0
        seeds.push(st.field.scaled(1.05));
    }
    estimate(problem, omega, ThresholdKind::DM, opts, seeds, notes)
}

/// Combine `d_N` and `d_M` into `d_II = min(d_N, d_M)`.
pub fn combine_d_ii(d_n: &ThresholdReport, d_m: &ThresholdReport) -> ThresholdReport {
    let src = if d_m.value < d_n.value { d_m } else { d_n };
    let mut out = src.clone();
    out.which = ThresholdKind::DII;
    out.converged = d_n.converged && d_m.converged;
    out.notes.push(format!("min of d_N = {:.16e} and d_M = {:.16e}", d_n.value, d_m.value));
    out
}

pub fn estimate_d_ii(problem: &Problem, omega: f64, opts: &SearchOptions) -> Result<SecondThresholds> {
    let d_n = estimate_d_n(problem, omega, opts)?;
    let d_m = estimate_d_m(problem, omega, opts)?;
    let d_ii = combine_d_ii(&d_n, &d_m);
    Ok(SecondThresholds { d_n, d_m, d_ii })
}
