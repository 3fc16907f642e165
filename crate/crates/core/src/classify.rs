//! Predicted fate of initial data, and checks of those predictions against simulation.
//!
//! Routes are evaluated in a fixed order: subcritical global existence, negative-energy
//! virial blowup, the `V = 0` threshold `d_I` split by the sign of `Q`, and the
//! cross-manifold threshold `d_II` split into `K`, `K_+`, `R_+`. The first route whose
//! hypotheses and data conditions all hold decides the prediction; every route's
//! verdict is kept in the report.

use std::fmt;
use std::io::Write;

use crate::ansatz::with_quadratic_phase;
use crate::dynamics::{evolve, EvolveOptions, Outcome, TrajectoryLog};
use crate::error::Result;
use crate::functionals::{fmt_f64, DiagnosticsRecord, Problem};
use crate::grid::ComplexField;
use crate::model::{Route, RouteCheck};
use crate::thresholds::ThresholdReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn of(x: f64) -> Self {
        if x > 0.0 {
            Sign::Positive
        } else if x < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Sign::Negative => "negative",
            Sign::Zero => "zero",
            Sign::Positive => "positive",
        }
    }
}

/// Which invariant set the data falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetLabel {
    /// `I_omega < d_II`, `S_omega < 0`, `Q < 0`.
    K,
    /// `I_omega < d_II`, `S_omega < 0`, `Q > 0`.
    KPlus,
    /// `I_omega < d_II`, `S_omega > 0`.
    RPlus,
    /// `omega ||u||^2 + E < d_I`, `Q > 0` (`V = 0`).
    KIPlus,
    /// `omega ||u||^2 + E < d_I`, `Q < 0` (`V = 0`).
    KIMinus,
    OutsideScope,
}

impl SetLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            SetLabel::K => "K",
            SetLabel::KPlus => "K_plus",
            SetLabel::RPlus => "R_plus",
            SetLabel::KIPlus => "K_I_plus",
            SetLabel::KIMinus => "K_I_minus",
            SetLabel::OutsideScope => "outside_scope",
        }
    }
}

impl fmt::Display for SetLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Prediction {
    Global,
    Blowup,
    Indeterminate,
}

impl Prediction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Prediction::Global => "global",
            Prediction::Blowup => "blowup",
            Prediction::Indeterminate => "indeterminate",
        }
    }
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A threshold level as the classifier consumes it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Level {
    pub value: f64,
    pub converged: bool,
}

impl From<&ThresholdReport> for Level {
    fn from(r: &ThresholdReport) -> Self {
        Level { value: r.value, converged: r.converged }
    }
}

/// Threshold levels available to the classifier.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Levels {
    pub d_i: Option<Level>,
    pub d_ii: Option<Level>,
}

/// Verdict of one route on one initial datum.
#[derive(Clone, Debug, PartialEq)]
pub struct RouteVerdict {
    pub route: Route,
    /// Model-level hypotheses of the route.
    pub hypotheses_hold: bool,
    /// Hypotheses and data conditions both hold, so the route yields a prediction.
    pub applies: bool,
    pub prediction: Prediction,
    pub reason: String,
}

/// Signs and values the routes test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Memberships {
    pub i_omega: f64,
    pub s_omega: f64,
    pub q: f64,
    pub q1: f64,
    pub energy: f64,
    pub j: f64,
    pub j_prime: f64,
    pub i_omega_lt_d_ii: Option<bool>,
    pub s_omega_sign: Sign,
    pub q_sign: Sign,
    pub q1_sign: Sign,
    pub e_sign: Sign,
    pub j_prime_sign: Sign,
}

impl Memberships {
    pub fn of(r: &DiagnosticsRecord, d_ii: Option<f64>) -> Self {
        Memberships {
            i_omega: r.i_omega,
            s_omega: r.s_omega,
            q: r.q,
            q1: r.q1,
            energy: r.energy,
            j: r.j,
            j_prime: r.j_prime,
            i_omega_lt_d_ii: d_ii.map(|d| r.i_omega < d),
            s_omega_sign: Sign::of(r.s_omega),
            q_sign: Sign::of(r.q),
            q1_sign: Sign::of(r.q1),
            e_sign: Sign::of(r.energy),
            j_prime_sign: Sign::of(r.j_prime),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationReport {
    pub routes: Vec<RouteVerdict>,
    pub memberships: Memberships,
    pub set_label: SetLabel,
    pub prediction: Prediction,
    /// Route that produced the prediction.
    pub decided_by: Option<Route>,
    pub reasons: Vec<String>,
    /// Evidence worth a second look that does not change the prediction.
    pub flags: Vec<String>,
    pub observed: Option<Outcome>,
    pub t_end: Option<f64>,
}

/// Label inside `{I_omega < d_II}`; `None` on the measure-zero boundaries `S = 0` or `Q = 0`.
pub fn second_threshold_label(s_omega: f64, q: f64) -> Option<SetLabel> {
    match (Sign::of(s_omega), Sign::of(q)) {
        (Sign::Positive, _) => Some(SetLabel::RPlus),
        (Sign::Negative, Sign::Negative) => Some(SetLabel::K),
        (Sign::Negative, Sign::Positive) => Some(SetLabel::KPlus),
        _ => None,
    }
}

fn verdict(check: &RouteCheck, applies: bool, prediction: Prediction, reason: String) -> RouteVerdict {
    RouteVerdict { route: check.route, hypotheses_hold: check.holds, applies, prediction, reason }
}

fn refused(check: &RouteCheck) -> RouteVerdict {
    verdict(check, false, Prediction::Indeterminate, format!("hypotheses fail: {}", check.failure_reasons()))
}

/// Classify `u0` under every route; the first applicable route decides.
pub fn classify_initial_data(
    problem: &Problem,
    u0: &ComplexField,
    omega: f64,
    levels: &Levels,
) -> Result<ClassificationReport> {
    let rec = problem.diagnostics(u0, omega, 0.0)?;
    let hyp = problem.model().hypotheses();
    let m = Memberships::of(&rec, levels.d_ii.map(|l| l.value));
    let mut routes = Vec::new();
    let mut flags = Vec::new();
    let mut label = SetLabel::OutsideScope;

    // subcritical: every solution is global
    let g = &hyp.global_existence;
    routes.push(if g.holds {
        verdict(g, true, Prediction::Global, "subcritical hypotheses hold: every solution is global".into())
    } else {
        refused(g)
    });

    // negative energy, or zero energy with J'(0) < 0
    let v = &hyp.virial_blowup;
    routes.push(if !v.holds {
        refused(v)
    } else if m.e_sign == Sign::Negative {
        verdict(v, true, Prediction::Blowup, format!("E(u0) = {:.6e} < 0", m.energy))
    } else if m.e_sign == Sign::Zero && m.j_prime_sign == Sign::Negative {
        verdict(v, true, Prediction::Blowup, "E(u0) = 0 and J'(0) < 0".into())
    } else {
        verdict(v, false, Prediction::Indeterminate, format!("E(u0) = {:.6e} is not negative", m.energy))
    });

    // V = 0 threshold d_I, split by the sign of Q
    let first_gate = hyp.d_i_gate().cloned().unwrap_or_else(|| hyp.threshold_i.clone());
    routes.push(if !first_gate.holds {
        refused(&first_gate)
    } else if let Some(d_i) = levels.d_i {
        let level = omega * rec.mass_sq + rec.energy;
        if !d_i.converged {
            flags.push("d_I estimate not converged; route skipped".into());
            verdict(&first_gate, false, Prediction::Indeterminate, "d_I estimate not converged".into())
        } else if !(level < d_i.value) {
            verdict(
                &first_gate,
                false,
                Prediction::Indeterminate,
                format!("omega ||u0||^2 + E(u0) = {level:.6e} is not below d_I = {:.6e}", d_i.value),
            )
        } else {
            match m.q_sign {
                Sign::Positive => {
                    label = SetLabel::KIPlus;
                    verdict(&first_gate, true, Prediction::Global, "below d_I with Q(u0) > 0".into())
                }
                Sign::Negative => {
                    label = SetLabel::KIMinus;
                    if m.j_prime_sign == Sign::Negative {
                        verdict(&first_gate, true, Prediction::Blowup, "below d_I with Q(u0) < 0 and J'(0) < 0".into())
                    } else {
                        verdict(
                            &first_gate,
                            false,
                            Prediction::Indeterminate,
                            "below d_I with Q(u0) < 0 but J'(0) >= 0: the blowup branch needs J'(0) < 0".into(),
                        )
                    }
                }
                Sign::Zero => verdict(&first_gate, false, Prediction::Indeterminate, "Q(u0) = 0".into()),
            }
        }
    } else {
        verdict(&first_gate, false, Prediction::Indeterminate, "no d_I estimate supplied".into())
    });

    // cross-manifold threshold d_II
    let second_gate = hyp.d_ii_gate().cloned().unwrap_or_else(|| hyp.threshold_ii.clone());
    routes.push(if !second_gate.holds {
        refused(&second_gate)
    } else if let Some(d_ii) = levels.d_ii {
        if !d_ii.converged {
            flags.push("d_II estimate not converged; route skipped".into());
            verdict(&second_gate, false, Prediction::Indeterminate, "d_II estimate not converged".into())
        } else if !(m.i_omega < d_ii.value) {
            verdict(
                &second_gate,
                false,
                Prediction::Indeterminate,
                format!("I_omega(u0) = {:.6e} is not below d_II = {:.6e}", m.i_omega, d_ii.value),
            )
        } else {
            match second_threshold_label(m.s_omega, m.q) {
                Some(SetLabel::K) => {
                    label = SetLabel::K;
                    if m.j_prime_sign != Sign::Negative {
                        flags.push(
                            "K, but J'(0) >= 0: the virial premise of the blowup argument is unmet; prediction kept, evidence flagged"
                                .into(),
                        );
                    }
                    verdict(&second_gate, true, Prediction::Blowup, "below d_II with S_omega < 0 and Q < 0 (set K)".into())
                }
                Some(l) => {
                    label = l;
                    let why = if l == SetLabel::RPlus { "S_omega > 0 (set R_plus)" } else { "S_omega < 0 and Q > 0 (set K_plus)" };
                    verdict(&second_gate, true, Prediction::Global, format!("below d_II with {why}"))
                }
                None => verdict(
                    &second_gate,
                    false,
                    Prediction::Indeterminate,
                    "S_omega = 0 or Q = 0 below d_II, which the threshold excludes".into(),
                ),
            }
        }
    } else {
        verdict(&second_gate, false, Prediction::Indeterminate, "no d_II estimate supplied".into())
    });

    let decided = routes.iter().find(|r| r.applies);
    let prediction = decided.map(|r| r.prediction).unwrap_or(Prediction::Indeterminate);
    let decided_by = decided.map(|r| r.route);
    let applicable: Vec<&RouteVerdict> = routes.iter().filter(|r| r.applies).collect();
    if applicable.iter().any(|r| r.prediction != prediction) {
        flags.push("applicable routes disagree".into());
    }
    let reasons = routes.iter().map(|r| format!("{}: {}", r.route.key(), r.reason)).collect();
    Ok(ClassificationReport {
        routes,
        memberships: m,
        set_label: label,
        prediction,
        decided_by,
        reasons,
        flags,
        observed: None,
        t_end: None,
    })
}

/// Which signs must persist along a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MonitoredSets {
    /// `K`, `K_+`, `R_+` below `d_II` (level is `I_omega`).
    SecondThreshold,
    /// `K_I_+`, `K_I_-` below `d_I` (level is `omega ||u||^2 + E`).
    FirstThreshold,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvarianceReport {
    /// False when the initial datum is outside the route's hypothesis; nothing is asserted.
    pub asserted: bool,
    pub reason: String,
    pub records_checked: usize,
    pub s_omega_flips: usize,
    pub q_flips: usize,
    pub first_violation: Option<usize>,
}

impl InvarianceReport {
    pub fn violations(&self) -> usize {
        self.s_omega_flips + self.q_flips
    }
}

/// Check that the signs defining the initial invariant set persist along `records`.
pub fn monitor_invariance(records: &[DiagnosticsRecord], level: f64, sets: MonitoredSets) -> InvarianceReport {
    let declined = |reason: String| InvarianceReport {
        asserted: false,
        reason,
        records_checked: 0,
        s_omega_flips: 0,
        q_flips: 0,
        first_violation: None,
    };
    if records.len() < 2 {
        return declined("fewer than two records".into());
    }
    let first = &records[0];
    let start_level = match sets {
        MonitoredSets::SecondThreshold => first.i_omega,
        MonitoredSets::FirstThreshold => first.omega * first.mass_sq + first.energy,
    };
    if !(start_level < level) {
        return declined(format!("initial level {start_level:.6e} is not below the threshold {level:.6e}"));
    }
    let s0 = Sign::of(first.s_omega);
    let q0 = Sign::of(first.q);
    // Q is free inside R_+, so it is tracked only where it defines the set
    let (track_s, track_q) = match sets {
        MonitoredSets::SecondThreshold => (true, s0 == Sign::Negative),
        MonitoredSets::FirstThreshold => (false, true),
    };
    let mut report = InvarianceReport {
        asserted: true,
        reason: format!(
            "tracking{}{}",
            if track_s { " sign(S_omega)" } else { "" },
            if track_q { " sign(Q)" } else { "" }
        ),
        records_checked: records.len(),
        s_omega_flips: 0,
        q_flips: 0,
        first_violation: None,
    };
    for (i, r) in records.iter().enumerate().skip(1) {
        let mut bad = false;
        if track_s && Sign::of(r.s_omega) != s0 {
            report.s_omega_flips += 1;
            bad = true;
        }
        if track_q && Sign::of(r.q) != q0 {
            report.q_flips += 1;
            bad = true;
        }
        if bad && report.first_violation.is_none() {
            report.first_violation = Some(i);
        }
    }
    report
}

/// Gradient growth a step-size underflow must show before it counts as blowup.
pub const UNDERFLOW_MIN_GROWTH: f64 = 10.0;

/// Whether an observed run matches a prediction; `None` when there is nothing to judge.
///
/// A step-size underflow counts as blowup only once `||grad u||` has grown by
/// [`UNDERFLOW_MIN_GROWTH`]; a stiff but bounded run judges nothing.
pub fn agrees(prediction: Prediction, log: &TrajectoryLog) -> Option<bool> {
    let growth = log.blowup_evidence.as_ref().map(|e| e.gradient_growth).unwrap_or(1.0);
    match (prediction, log.outcome) {
        (Prediction::Indeterminate, _) | (_, Outcome::Corrupt) => None,
        (_, Outcome::StepUnderflow) if growth < UNDERFLOW_MIN_GROWTH => None,
        (Prediction::Global, o) => Some(o == Outcome::Completed),
        (Prediction::Blowup, o) => Some(matches!(o, Outcome::BlowupDetected | Outcome::StepUnderflow)),
    }
}

#[derive(Clone, Debug)]
pub struct DichotomyOptions {
    pub amplitudes: Vec<f64>,
    /// Focusing phase `exp(-i sigma |x|^2 / 2)` applied where `S_omega(c u) < 0`.
    pub sigma: f64,
    pub evolve: EvolveOptions,
}

#[derive(Clone, Debug)]
pub struct DichotomyRow {
    pub c: f64,
    pub report: ClassificationReport,
    pub observed: Outcome,
    pub t_end: f64,
    pub agreement: Option<bool>,
    pub invariance: InvarianceReport,
    pub log: TrajectoryLog,
}

pub const DICHOTOMY_HEADER: &str = "c,I_omega,S_omega,Q,set_label,prediction,observed,t_end";

impl DichotomyRow {
    pub fn csv_row(&self) -> String {
        let m = &self.report.memberships;
        format!(
            "{},{},{},{},{},{},{},{}",
            fmt_f64(self.c),
            fmt_f64(m.i_omega),
            fmt_f64(m.s_omega),
            fmt_f64(m.q),
            self.report.set_label,
            self.report.prediction,
            self.observed,
            fmt_f64(self.t_end)
        )
    }
}

pub fn write_dichotomy_csv<W: Write>(rows: &[DichotomyRow], mut out: W) -> Result<()> {
    writeln!(out, "{DICHOTOMY_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Initial datum of one row: `c u_base`, phased on the `S_omega < 0` side of the ray.
pub fn dichotomy_datum(problem: &Problem, base: &ComplexField, c: f64, omega: f64, sigma: f64) -> Result<ComplexField> {
    let u = base.scaled(c);
    let s = problem.components(&u)?.s_omega(omega);
    Ok(if s < 0.0 && sigma != 0.0 { with_quadratic_phase(&u, sigma) } else { u })
}

/// Classify then evolve every point of the amplitude ray `c u_base`.
pub fn dichotomy_experiment(
    problem: &Problem,
    omega: f64,
    base: &ComplexField,
    levels: &Levels,
    opts: &DichotomyOptions,
) -> Result<Vec<DichotomyRow>> {
    let mut rows = Vec::with_capacity(opts.amplitudes.len());
    for &c in &opts.amplitudes {
        let u0 = dichotomy_datum(problem, base, c, omega, opts.sigma)?;
        let mut report = classify_initial_data(problem, &u0, omega, levels)?;
        let log = evolve(&u0, problem, omega, &opts.evolve)?;
        report.observed = Some(log.outcome);
        report.t_end = Some(log.t_end);
        let invariance = match (report.decided_by, levels.d_ii, levels.d_i) {
            (Some(Route::ThresholdI), _, Some(d_i)) => {
                monitor_invariance(&log.records, d_i.value, MonitoredSets::FirstThreshold)
            }
            (_, Some(d_ii), _) => monitor_invariance(&log.records, d_ii.value, MonitoredSets::SecondThreshold),
            _ => monitor_invariance(&log.records, f64::NEG_INFINITY, MonitoredSets::SecondThreshold),
        };
        rows.push(DichotomyRow {
            c,
            agreement: agrees(report.prediction, &log),
            observed: log.outcome,
            t_end: log.t_end,
            report,
            invariance,
            log,
        });
    }
    Ok(rows)
}
