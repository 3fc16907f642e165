//! Strang-split pseudo-spectral time stepping with step-doubling control and blowup detection.

use std::fmt;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{NlsError, Result};
use crate::exec;
use crate::functionals::{fmt_f64, DiagnosticsRecord, Problem, CSV_HEADER};
use crate::grid::{spectral_gradient_norm_sq, ComplexField};

#[derive(Clone, Debug, PartialEq)]
pub struct EvolveOptions {
    pub dt_init: f64,
    pub dt_min: f64,
    pub t_final: f64,
    pub record_every: f64,
    /// Stop once `||grad u||` exceeds this multiple of its initial value.
    pub blowup_gradient_factor: f64,
    pub blowup_sigma_cap: f64,
    pub adapt: bool,
    /// Relative L2 local error target per step.
    pub adapt_tolerance: f64,
    /// Times at which the field is kept in the log.
    pub snapshot_times: Vec<f64>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            dt_init: 1e-3,
            dt_min: 1e-12,
            t_final: 1.0,
            record_every: 1e-2,
            blowup_gradient_factor: 1e3,
            blowup_sigma_cap: 1e8,
            adapt: true,
            adapt_tolerance: 1e-8,
            snapshot_times: Vec::new(),
        }
    }
}

impl EvolveOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NlsError::InvalidOptions(m.into()));
        let all = [self.dt_init, self.dt_min, self.t_final, self.record_every, self.adapt_tolerance];
        if all.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return bad("time steps, horizon, record spacing and tolerance must be positive and finite");
        }
        if self.dt_min > self.dt_init {
            return bad("dt_min must not exceed dt_init");
        }
        if !(self.blowup_gradient_factor > 1.0 && self.blowup_sigma_cap > 1.0) {
            return bad("blowup factors must exceed 1");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    BlowupDetected,
    StepUnderflow,
    Corrupt,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::BlowupDetected => "blowup_detected",
            Outcome::StepUnderflow => "step_underflow",
            Outcome::Corrupt => "corrupt",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Why a run was judged to diverge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlowupEvidence {
    /// `||grad u(t_end)|| / ||grad u(0)||`.
    pub gradient_growth: f64,
    pub dt_at_stop: f64,
    /// Least-squares `J''` over the resolved part of the run.
    pub j_curvature: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrajectoryLog {
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<(f64, ComplexField)>,
    pub outcome: Outcome,
    pub t_end: f64,
    pub blowup_evidence: Option<BlowupEvidence>,
    pub final_field: ComplexField,
    pub steps: usize,
    pub rejected_steps: usize,
}

impl TrajectoryLog {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(out, "{}", r.csv_row())?;
        }
        Ok(())
    }

    /// Largest relative mass drift over the records.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.records[0].mass_sq;
        self.records.iter().map(|r| ((r.mass_sq - m0) / m0).abs()).fold(0.0, f64::max)
    }

    pub fn energy_drift(&self) -> f64 {
        let e0 = self.records[0].energy;
        let last = self.records.last().unwrap().energy;
        (last - e0).abs()
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "outcome = {}\nt_end = {}\nsteps = {}\nrejected_steps = {}\n",
            self.outcome,
            fmt_f64(self.t_end),
            self.steps,
            self.rejected_steps
        );
        if let Some(e) = &self.blowup_evidence {
            s += &format!("gradient_growth = {}\ndt_at_stop = {}\n", fmt_f64(e.gradient_growth), fmt_f64(e.dt_at_stop));
            if let Some(c) = e.j_curvature {
                s += &format!("j_curvature = {}\n", fmt_f64(c));
            }
        }
        s
    }
}

/// One Strang step `N(dt/2) L(dt) N(dt/2)`, the potential folded into the phase halves.
pub struct SplitStepper<'a> {
    problem: &'a Problem,
    cache: Vec<(u64, Vec<Complex64>)>,
}

impl<'a> SplitStepper<'a> {
    pub fn new(problem: &'a Problem) -> Self {
        SplitStepper { problem, cache: Vec::new() }
    }

    fn propagator(&mut self, dt: f64) -> usize {
        let key = dt.to_bits();
        if let Some(i) = self.cache.iter().position(|(k, _)| *k == key) {
            return i;
        }
        let k2 = self.problem.grid().k_squared();
        let mut p = vec![Complex64::new(0.0, 0.0); k2.len()];
        exec::for_each_mut(&mut p, |i, v| *v = Complex64::from_polar(1.0, -dt * k2[i]));
        if self.cache.len() >= 6 {
            self.cache.remove(0);
        }
        self.cache.push((key, p));
        self.cache.len() - 1
    }

    fn phase_half(&self, u: &mut [Complex64], half: f64) {
        let rho: Vec<f64> = u.iter().map(|v| v.norm_sqr()).collect();
        let hartree = self.problem.hartree();
        let w = if hartree.is_zero() { Vec::new() } else { hartree.convolve(&rho) };
        let v = self.problem.potential();
        let nl = &self.problem.model().local;
        exec::for_each_mut(u, |i, z| {
            let wr = if w.is_empty() { 0.0 } else { w[i] };
            *z *= Complex64::from_polar(1.0, half * (nl.f(rho[i]) + wr - v[i]));
        });
    }

    pub fn step_values(&mut self, u: &mut [Complex64], dt: f64) {
        self.phase_half(u, 0.5 * dt);
        let idx = self.propagator(dt);
        let grid = self.problem.grid().clone();
        grid.fft_forward(u);
        let p = &self.cache[idx].1;
        exec::for_each_mut(u, |i, z| *z *= p[i]);
        grid.fft_inverse(u);
        self.phase_half(u, 0.5 * dt);
    }
}

pub fn step_strang(u: &ComplexField, problem: &Problem, dt: f64) -> Result<ComplexField> {
    if !(dt > 0.0) {
        return Err(NlsError::InvalidOptions("dt must be positive".into()));
    }
    if u.grid() != problem.grid() {
        return Err(NlsError::GridMismatch);
    }
    let mut v = u.values().to_vec();
    SplitStepper::new(problem).step_values(&mut v, dt);
    let out = ComplexField::new(u.grid().clone(), v)?;
    out.check_finite()?;
    Ok(out)
}

fn l2_sq(a: &[Complex64]) -> f64 {
    exec::sum(a.len(), |i| a[i].norm_sqr())
}

fn l2_diff_sq(a: &[Complex64], b: &[Complex64]) -> f64 {
    exec::sum(a.len(), |i| (a[i] - b[i]).norm_sqr())
}

/// Quantities the stop rule needs, cheap enough to evaluate after every step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepProbe {
    pub kinetic: f64,
    pub sigma_norm_sq: f64,
}

impl StepProbe {
    pub fn of(u: &ComplexField, potential: &[f64]) -> Self {
        let kinetic = spectral_gradient_norm_sq(u);
        let dv = u.grid().cell_volume();
        let v = u.values();
        let mass_pot = exec::sum(v.len(), |i| v[i].norm_sqr() * (1.0 + potential[i])) * dv;
        StepProbe { kinetic, sigma_norm_sq: mass_pot + kinetic }
    }
}

impl From<&DiagnosticsRecord> for StepProbe {
    fn from(r: &DiagnosticsRecord) -> Self {
        StepProbe { kinetic: r.kinetic, sigma_norm_sq: r.sigma_norm_sq }
    }
}

/// Stop decision on the current state.
pub fn detect_blowup(
    records: &[DiagnosticsRecord],
    current: StepProbe,
    opts: &EvolveOptions,
    dt_underflow: bool,
) -> bool {
    let Some(first) = records.first() else { return false };
    let f2 = opts.blowup_gradient_factor * opts.blowup_gradient_factor;
    if current.kinetic >= f2 * first.kinetic || current.sigma_norm_sq >= opts.blowup_sigma_cap {
        return true;
    }
    if dt_underflow && records.len() >= 10 {
        let tail = &records[records.len() - 10..];
        let rising = tail.windows(2).all(|w| w[1].kinetic > w[0].kinetic) && current.kinetic > tail[9].kinetic;
        return rising;
    }
    false
}

/// Least-squares quadratic fit of `J(t)`; returns `J''`.
pub fn fit_j_curvature(records: &[DiagnosticsRecord]) -> Option<f64> {
    if records.len() < 3 {
        return None;
    }
    let n = records.len() as f64;
    let tm = records.iter().map(|r| r.t).sum::<f64>() / n;
    // normal equations for J = c0 + c1 s + c2 s^2, s = t - tm
    let mut a = [[0.0f64; 3]; 3];
    let mut b = [0.0f64; 3];
    for r in records {
        let s = r.t - tm;
        let basis = [1.0, s, s * s];
        for i in 0..3 {
            b[i] += basis[i] * r.j;
            for j in 0..3 {
                a[i][j] += basis[i] * basis[j];
            }
        }
    }
    solve3(a, b).map(|c| 2.0 * c[2])
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (v, p) in a[row].iter_mut().zip(pivot_row).skip(col) {
                *v -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Centered second differences of the recorded `J` next to `4 Q` at the same times.
pub fn virial_pairs(records: &[DiagnosticsRecord]) -> Vec<(f64, f64, f64)> {
    records
        .windows(3)
        .filter_map(|w| {
            let (h1, h2) = (w[1].t - w[0].t, w[2].t - w[1].t);
            if (h1 - h2).abs() > 1e-9 * h1 {
                return None;
            }
            let d2 = (w[2].j - 2.0 * w[1].j + w[0].j) / (h1 * h1);
            Some((w[1].t, d2, 4.0 * w[1].q))
        })
        .collect()
}

pub fn evolve(u0: &ComplexField, problem: &Problem, omega: f64, opts: &EvolveOptions) -> Result<TrajectoryLog> {
    opts.validate()?;
    if u0.grid() != problem.grid() {
        return Err(NlsError::GridMismatch);
    }
    u0.check_finite()?;
    let mut stepper = SplitStepper::new(problem);
    let mut u = u0.values().to_vec();
    let grid = problem.grid().clone();
    let field = |v: &[Complex64]| ComplexField::new(grid.clone(), v.to_vec()).expect("grid-sized buffer");
    let first = problem.diagnostics(u0, omega, 0.0)?;
    let mut records = vec![first];
    let mut snapshots = Vec::new();
    let mut snap_times: Vec<f64> =
        opts.snapshot_times.iter().copied().filter(|&s| s >= 0.0 && s <= opts.t_final).collect();
    snap_times.sort_by(f64::total_cmp);
    snap_times.dedup();
    let mut snap_next = 0;
    while snap_next < snap_times.len() && snap_times[snap_next] <= 0.0 {
        snapshots.push((0.0, u0.clone()));
        snap_next += 1;
    }

    let mut t = 0.0;
    let mut dt = opts.dt_init;
    let mut steps = 0usize;
    let mut rejected = 0usize;
    let mut record_index = 1u64;
    let mut outcome = Outcome::Completed;
    let mut scratch_full = vec![Complex64::new(0.0, 0.0); u.len()];
    let mut scratch_half = scratch_full.clone();

    let eps = 1e-12 * opts.t_final.max(1.0);
    while t < opts.t_final - eps {
        let next_record = record_index as f64 * opts.record_every;
        let mut target = next_record.min(opts.t_final);
        if snap_next < snap_times.len() {
            target = target.min(snap_times[snap_next]);
        }
        let h = dt.min(target - t);
        let mut underflow = false;
        if opts.adapt {
            scratch_full.copy_from_slice(&u);
            stepper.step_values(&mut scratch_full, h);
            scratch_half.copy_from_slice(&u);
            stepper.step_values(&mut scratch_half, 0.5 * h);
            stepper.step_values(&mut scratch_half, 0.5 * h);
            let err = (l2_diff_sq(&scratch_full, &scratch_half) / l2_sq(&scratch_half)).sqrt();
            if !err.is_finite() {
                outcome = Outcome::Corrupt;
                break;
            }
            if err > opts.adapt_tolerance {
                rejected += 1;
                dt = 0.5 * h;
                if dt < opts.dt_min {
                    underflow = true;
                } else {
                    continue;
                }
            } else {
                u.copy_from_slice(&scratch_half);
                t = if h == target - t { target } else { t + h };
                if err < 0.1 * opts.adapt_tolerance && h == dt {
                    dt = (2.0 * dt).min(opts.dt_init);
                }
            }
        } else {
            stepper.step_values(&mut u, h);
            t = if h == target - t { target } else { t + h };
        }
        if !underflow {
            steps += 1;
        }
        let current_field = field(&u);
        if current_field.check_finite().is_err() {
            outcome = Outcome::Corrupt;
            break;
        }
        let at_record = (t - next_record).abs() <= eps || t >= opts.t_final - eps;
        let probe = StepProbe::of(&current_field, problem.potential());
        if snap_next < snap_times.len() && (t - snap_times[snap_next]).abs() <= eps {
            snapshots.push((t, current_field.clone()));
            snap_next += 1;
        }
        let stop = if detect_blowup(&records, probe, opts, underflow) {
            Some(Outcome::BlowupDetected)
        } else if underflow {
            Some(Outcome::StepUnderflow)
        } else {
            None
        };
        if let Some(o) = stop {
            outcome = o;
            if records.last().map(|r| r.t < t).unwrap_or(true) {
                records.push(problem.diagnostics(&current_field, omega, t)?);
            }
            break;
        }
        if at_record {
            records.push(problem.diagnostics(&current_field, omega, t)?);
            if (t - next_record).abs() <= eps {
                record_index += 1;
            }
        }
    }

    let final_field = field(&u);
    let t_end = t;
    let blowup_evidence = match outcome {
        Outcome::BlowupDetected | Outcome::StepUnderflow => {
            let k0 = records[0].kinetic;
            let kl = records.last().unwrap().kinetic;
            // the J fit uses the part of the run where the gradient grew by at most 10x
            let resolved: Vec<DiagnosticsRecord> =
                records.iter().copied().take_while(|r| r.kinetic <= 100.0 * k0).collect();
            Some(BlowupEvidence {
                gradient_growth: (kl / k0).sqrt(),
                dt_at_stop: dt,
                j_curvature: fit_j_curvature(&resolved),
            })
        }
        _ => None,
    };
    Ok(TrajectoryLog {
        records,
        snapshots,
        outcome,
        t_end,
        blowup_evidence,
        final_field,
        steps,
        rejected_steps: rejected,
    })
}
