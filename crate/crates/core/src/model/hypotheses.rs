//! Closed-form hypothesis checks for the catalog families.
//!
//! Every condition is quantified over all `s >= 0` or all `x`, so it is decided
//! by exponent and sign algebra on the family parameters, never by sampling.
//! Two-term conditions use dominance: a sum `A s^a + B s^b` (`a < b`) keeps a
//! sign for all `s > 0` iff both coefficients do.

use std::fmt::{self, Write as _};

use num_rational::Rational64;

use super::interval::{Bound, Interval};
use super::kernel::Kernel;
use super::nonlinearity::{ratio_f64, Nonlinearity};
use super::potential::Potential;
use super::ModelSpec;

/// One checked inequality with the reason it holds or fails.
#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub name: &'static str,
    pub holds: bool,
    pub detail: String,
}

impl Condition {
    fn new(name: &'static str, holds: bool, detail: impl Into<String>) -> Self {
        Condition { name, holds, detail: detail.into() }
    }
}

/// Which result's hypotheses a check covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// Subcritical focusing: every solution is global.
    GlobalExistence,
    /// Virial convexity: negative energy blows up.
    VirialBlowup,
    /// `V = 0` sharp threshold at level `d_I` (sets split by the sign of `Q`).
    ThresholdI,
    /// Pure Hartree (`f = 0`, `V = 0`) slice of the cross-manifold threshold.
    HartreeThreshold,
    /// Cross-manifold sharp threshold at level `d_II`.
    ThresholdII,
}

impl Route {
    pub fn key(&self) -> &'static str {
        match self {
            Route::GlobalExistence => "global_existence",
            Route::VirialBlowup => "virial_blowup",
            Route::ThresholdI => "threshold_I",
            Route::HartreeThreshold => "hartree_threshold",
            Route::ThresholdII => "threshold_II",
        }
    }
}

/// Verdict for one route.
#[derive(Clone, Debug, PartialEq)]
pub struct RouteCheck {
    pub route: Route,
    pub holds: bool,
    pub conditions: Vec<Condition>,
    /// Admissible values of the exponent `l`, when the route uses one.
    pub l_range: Option<Interval>,
    /// The `l` used (user-supplied or a witness from `l_range`).
    pub l: Option<Rational64>,
    /// Smallest admissible `c3` (lower-bound constant for `x . grad W`).
    pub c3: Option<f64>,
    /// Potential constant `c` in `N l V + x . grad V >= c V`.
    pub c: Option<f64>,
}

impl RouteCheck {
    fn from_conditions(route: Route, conditions: Vec<Condition>) -> Self {
        let holds = conditions.iter().all(|c| c.holds);
        RouteCheck { route, holds, conditions, l_range: None, l: None, c3: None, c: None }
    }

    /// First failing condition, if any.
    pub fn first_failure(&self) -> Option<&Condition> {
        self.conditions.iter().find(|c| !c.holds)
    }

    /// Reasons of every failing condition joined by `; `.
    pub fn failure_reasons(&self) -> String {
        self.conditions
            .iter()
            .filter(|c| !c.holds)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Per-route hypothesis verdicts for one model.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisReport {
    pub dims: usize,
    pub global_existence: RouteCheck,
    pub virial_blowup: RouteCheck,
    pub threshold_i: RouteCheck,
    pub hartree_threshold: RouteCheck,
    pub threshold_ii: RouteCheck,
}

impl HypothesisReport {
    pub fn routes(&self) -> [&RouteCheck; 5] {
        [&self.global_existence, &self.virial_blowup, &self.threshold_i, &self.hartree_threshold, &self.threshold_ii]
    }

    /// Gate for the `d_I` estimate: the `V = 0` threshold or its pure-Hartree slice.
    pub fn d_i_gate(&self) -> Option<&RouteCheck> {
        if self.threshold_i.holds {
            Some(&self.threshold_i)
        } else if self.hartree_threshold.holds {
            Some(&self.hartree_threshold)
        } else {
            None
        }
    }

    /// Gate for the `d_N`, `d_M`, `d_II` estimates.
    pub fn d_ii_gate(&self) -> Option<&RouteCheck> {
        if self.threshold_ii.holds {
            Some(&self.threshold_ii)
        } else if self.hartree_threshold.holds {
            Some(&self.hartree_threshold)
        } else {
            None
        }
    }

    /// Flat `key = value` text block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dims = {}", self.dims);
        for r in self.routes() {
            let key = r.route.key();
            let _ = writeln!(out, "{key}.holds = {}", r.holds);
            if let Some(range) = &r.l_range {
                let _ = writeln!(out, "{key}.l_range = {range}");
            }
            if let Some(l) = r.l {
                let _ = writeln!(out, "{key}.l = {l}");
            }
            if let Some(c3) = r.c3 {
                let _ = writeln!(out, "{key}.c3 = {c3}");
            }
            if let Some(c) = r.c {
                let _ = writeln!(out, "{key}.c = {c}");
            }
            for c in &r.conditions {
                let _ = writeln!(out, "{key}.{} = {} ({})", c.name, c.holds, c.detail);
            }
        }
        out
    }
}

impl fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn rat(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

fn zero() -> Rational64 {
    Rational64::from_integer(0)
}

/// `2/N`.
fn mass_critical(dims: usize) -> Rational64 {
    rat(2, dims as i64)
}

/// `2/(N-2)^+` as an upper bound (infinite for `N <= 2`).
fn energy_critical_bound(dims: usize) -> Bound {
    if dims <= 2 {
        Bound::Unbounded
    } else {
        Bound::Open(rat(2, dims as i64 - 2))
    }
}

fn below_bound(p: Rational64, b: Bound) -> bool {
    match b {
        Bound::Unbounded => true,
        Bound::Open(x) => p < x,
        Bound::Closed(x) => p <= x,
    }
}

fn bound_text(b: Bound) -> String {
    match b {
        Bound::Unbounded => "inf".into(),
        Bound::Open(x) | Bound::Closed(x) => x.to_string(),
    }
}

/// Nonzero `(coefficient, exponent)` terms in increasing exponent order.
fn power_terms(nl: &Nonlinearity) -> Vec<(f64, Rational64)> {
    match *nl {
        Nonlinearity::Zero => vec![],
        Nonlinearity::Power { b, p } => vec![(b, p)],
        Nonlinearity::TwoPower { mu, p1, nu, p2 } => vec![(mu, p1), (nu, p2)],
        Nonlinearity::LogPower { .. } => vec![],
    }
    .into_iter()
    .filter(|(c, _)| *c != 0.0)
    .collect()
}

fn sgn(x: f64) -> i32 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// `F(s) <= c1 s + c2 s^{p+1}` for some `0 < p < 2/N`.
fn subcritical_growth(nl: &Nonlinearity, dims: usize) -> Condition {
    let crit = mass_critical(dims);
    let name = "subcritical_growth";
    match *nl {
        Nonlinearity::LogPower { b, p } if b > 0.0 => {
            Condition::new(name, p < crit, format!("log-power focusing needs p < 2/N = {crit}, got p = {p}"))
        }
        Nonlinearity::LogPower { .. } => Condition::new(name, true, "F <= 0"),
        _ => {
            let terms = power_terms(nl);
            match terms.last() {
                None => Condition::new(name, true, "F = 0"),
                Some(&(c, p)) if c < 0.0 => {
                    Condition::new(name, true, format!("leading term s^{p} is defocusing so F/s is bounded above"))
                }
                Some(&(_, p)) => Condition::new(
                    name,
                    p < crit,
                    if p < crit {
                        format!("leading focusing exponent {p} below 2/N = {crit}")
                    } else {
                        format!("focusing exponent {p} is not below 2/N = {crit}")
                    },
                ),
            }
        }
    }
}

/// `(N+2) F - N s f <= 0`.
fn virial_local(nl: &Nonlinearity, dims: usize) -> Condition {
    let name = "local_virial_sign";
    let n = Rational64::from_integer(dims as i64);
    let two = Rational64::from_integer(2);
    match *nl {
        Nonlinearity::LogPower { b, p } => {
            if b == 0.0 {
                Condition::new(name, true, "f = 0")
            } else if b > 0.0 {
                Condition::new(name, p >= mass_critical(dims), format!("focusing log-power needs p >= 2/N, got {p}"))
            } else {
                let bound = two / n - Rational64::from_integer(1);
                Condition::new(name, p <= bound, format!("defocusing log-power needs p <= 2/N - 1 = {bound}, got {p}"))
            }
        }
        _ => {
            // each term contributes b (2 - N p)/(p + 1) s^{p+1}
            let bad: Vec<String> = power_terms(nl)
                .into_iter()
                .filter(|&(c, p)| sgn(c) * sgn(ratio_f64(two - n * p)) > 0)
                .map(|(c, p)| format!("term {c} s^{p} has b(2 - N p) > 0"))
                .collect();
            if bad.is_empty() {
                Condition::new(name, true, "every term has b(2 - N p) <= 0")
            } else {
                Condition::new(name, false, bad.join(", "))
            }
        }
    }
}

/// Admissible `l` from `l F <= s f - F` plus the upper bound `s f - F <= c1 s^{p1+1} + c2 s^{p2+1}`.
fn local_l_range(nl: &Nonlinearity, dims: usize) -> (Interval, Vec<Condition>) {
    let crit = mass_critical(dims);
    let upper = energy_critical_bound(dims);
    let base = Interval::new(Bound::Open(crit), upper);
    let mut conds = Vec::new();
    let range = match *nl {
        Nonlinearity::Zero => base,
        Nonlinearity::LogPower { b, p } => {
            if b > 0.0 {
                let ok = p > crit - Rational64::from_integer(1) && below_bound(p, upper);
                conds.push(Condition::new(
                    "local_upper_bound",
                    ok,
                    format!("log-power needs 2/N - 1 < p < {}, got {p}", bound_text(upper)),
                ));
                base.intersect(&Interval::below(Bound::Closed(p)))
            } else if b < 0.0 {
                base.intersect(&Interval::above(Bound::Closed(p + Rational64::from_integer(1))))
            } else {
                base
            }
        }
        _ => {
            let terms = power_terms(nl);
            let mut range = base;
            for &(c, p) in &terms {
                range = if c > 0.0 {
                    range.intersect(&Interval::below(Bound::Closed(p)))
                } else {
                    range.intersect(&Interval::above(Bound::Closed(p)))
                };
            }
            if let Some(&(c, p)) = terms.first() {
                if c > 0.0 {
                    conds.push(Condition::new(
                        "local_upper_bound_small_s",
                        p > crit,
                        format!("lowest focusing exponent {p} must exceed 2/N = {crit}"),
                    ));
                }
            }
            if let Some(&(c, p)) = terms.last() {
                if c > 0.0 {
                    conds.push(Condition::new(
                        "local_upper_bound_large_s",
                        below_bound(p, upper),
                        format!("highest focusing exponent {p} must be below {}", bound_text(upper)),
                    ));
                }
            }
            range
        }
    };
    let holds = !range.is_empty();
    let detail = if holds {
        format!("l F <= s f - F for l in {range}")
    } else if let Some(&(c, p)) = power_terms(nl).first().filter(|(c, p)| *c > 0.0 && *p <= crit) {
        format!("exponent below 2/N: term {c} s^{p} forces l <= {p} but l > 2/N = {crit}")
    } else {
        format!("no l in (2/N, {}) satisfies l F <= s f - F", bound_text(upper))
    };
    conds.insert(0, Condition::new("local_l_range", holds, detail));
    (range, conds)
}

/// Admissible `l` from `N l W + x . grad W <= 0`.
fn kernel_l_range(kernel: &Kernel, dims: usize) -> Interval {
    let n = Rational64::from_integer(dims as i64);
    match *kernel {
        _ if kernel.is_zero() => Interval::ALL,
        Kernel::InversePower { a, k } => {
            if a > 0.0 {
                Interval::below(Bound::Closed(k / n))
            } else {
                Interval::above(Bound::Closed(k / n))
            }
        }
        Kernel::Bridged { a, inner, k } => {
            if a > 0.0 {
                Interval::below(Bound::Closed(inner / n))
            } else {
                Interval::above(Bound::Closed(k / n))
            }
        }
        // a e^{-pi r^2}(N l - 2 pi r^2) and a r^2 (N l (1 + r^2) + 2)/(1 + r^2)^2 change sign
        // unless a <= 0 (saturating) and never for the Gaussian with a != 0.
        Kernel::Saturating { a } if a < 0.0 => Interval::ALL,
        _ => Interval::empty(),
    }
}

/// Admissible `c3 > 0` from `c3 W + x . grad W >= 0`.
fn kernel_c3_range(kernel: &Kernel) -> Interval {
    let positive = Interval::above(Bound::Open(zero()));
    let range = match *kernel {
        _ if kernel.is_zero() => Interval::ALL,
        Kernel::InversePower { a, k } => {
            if a > 0.0 {
                Interval::above(Bound::Closed(k))
            } else {
                Interval::below(Bound::Closed(k))
            }
        }
        Kernel::Bridged { a, inner, k } => {
            if a > 0.0 {
                Interval::above(Bound::Closed(k))
            } else {
                Interval::below(Bound::Closed(inner))
            }
        }
        Kernel::Saturating { a } if a > 0.0 => Interval::ALL,
        _ => Interval::empty(),
    };
    range.intersect(&positive)
}

/// `W in L^q` for some `q >= 1` with `N/4 < q < N/2`.
fn kernel_decays(kernel: &Kernel, dims: usize) -> Condition {
    let n = Rational64::from_integer(dims as i64);
    let window = Interval::new(Bound::Open(n / 4), Bound::Open(n / 2))
        .intersect(&Interval::above(Bound::Closed(Rational64::from_integer(1))));
    let name = "kernel_in_Lq";
    match *kernel {
        _ if kernel.is_zero() => Condition::new(name, true, "W = 0"),
        Kernel::Gaussian { .. } => Condition::new(
            name,
            !window.is_empty(),
            format!("Gaussian lies in every L^q; needs some q >= 1 in (N/4, N/2): {window}"),
        ),
        Kernel::InversePower { .. } => {
            Condition::new(name, false, "|x|^-K is in no single L^q (fails at 0 or at infinity)")
        }
        Kernel::Saturating { .. } => Condition::new(name, false, "saturating kernel does not decay"),
        Kernel::Zero => Condition::new(name, true, "W = 0"),
        Kernel::Bridged { inner, k, .. } => {
            let q = window.intersect(&Interval::new(Bound::Open(n / k), Bound::Open(n / inner)));
            Condition::new(name, !q.is_empty(), format!("admissible q: {q}"))
        }
    }
}

/// `W^+ in L^q + L^inf` with `q >= N/2` (and `q > 1` for `N = 2`).
fn kernel_positive_part(kernel: &Kernel, dims: usize) -> Condition {
    let name = "kernel_positive_part";
    let singular = match *kernel {
        Kernel::InversePower { a, k } if a > 0.0 => Some(k),
        Kernel::Bridged { a, inner, .. } if a > 0.0 => Some(inner),
        _ => None,
    };
    match singular {
        None => Condition::new(name, true, "W^+ is bounded"),
        Some(s) => {
            // |x|^{-s} near 0 is in L^q iff s q < N; need such q >= max(N/2, 1)
            let n = Rational64::from_integer(dims as i64);
            let qmin = (n / 2).max(Rational64::from_integer(1));
            let ok = s * qmin < n;
            Condition::new(name, ok, format!("singularity |x|^-{s} needs {s} < N/max(N/2, 1) = {}", n / qmin))
        }
    }
}

/// Even and `L^q + L^inf` for some `q >= 1`, `q > N/4`; guaranteed by catalog validation.
fn kernel_admissible(_kernel: &Kernel) -> Condition {
    Condition::new("kernel_even_Lq_plus_Linf", true, "catalog kernels are even with singularity below min(4, N)")
}

/// `2 W + x . grad W <= 0`.
fn kernel_virial(kernel: &Kernel) -> Condition {
    let name = "kernel_virial_sign";
    let two = Rational64::from_integer(2);
    let (ok, detail) = match *kernel {
        _ if kernel.is_zero() => (true, "W = 0".to_string()),
        Kernel::InversePower { a, k } => {
            (if a > 0.0 { k >= two } else { k <= two }, format!("a (2 - K) <= 0 with a = {a}, K = {k}"))
        }
        Kernel::Gaussian { .. } => (false, "a e^{-pi r^2}(2 - 2 pi r^2) changes sign".into()),
        Kernel::Saturating { a } => (a < 0.0, format!("sign equals sign of a = {a}")),
        Kernel::Bridged { a, inner, k } => (
            if a > 0.0 { inner >= two } else { k <= two },
            format!("log slope in [-{k}, -{inner}] against 2 with a = {a}"),
        ),
        Kernel::Zero => (true, "W = 0".to_string()),
    };
    Condition::new(name, ok, detail)
}

fn potential_class(v: &Potential) -> Condition {
    let detail = if v.is_bounded() {
        "V >= 0 bounded (L^r + L^inf class)"
    } else {
        "V >= 0 unbounded with bounded second derivatives"
    };
    Condition::new("potential_class", true, detail)
}

/// `2 V + x . grad V >= 0`.
fn potential_virial(_v: &Potential) -> Condition {
    Condition::new("potential_virial_sign", true, "catalog potentials have a >= 0")
}

/// Largest `c` with `N l V + x . grad V >= c V`, or `None` when `V = 0` (any `c` works).
fn potential_constant(v: &Potential, dims: usize, l: Rational64) -> Option<f64> {
    if v.is_zero() {
        return None;
    }
    let nl = dims as f64 * ratio_f64(l);
    match v {
        Potential::Harmonic { .. } => Some(nl + 2.0),
        Potential::Saturating { .. } => Some(nl),
        Potential::Zero => None,
    }
}

fn monotone_f(nl: &Nonlinearity) -> Vec<Condition> {
    let one = Rational64::from_integer(1);
    let (incr, convex, secant) = match *nl {
        Nonlinearity::Zero => (true, true, true),
        Nonlinearity::Power { b, p } => (b >= 0.0, b * ratio_f64(p * (p - one)) >= 0.0, b >= 0.0),
        Nonlinearity::TwoPower { mu, p1, nu, p2 } => (
            mu >= 0.0 && nu >= 0.0,
            mu * ratio_f64(p1 * (p1 - one)) >= 0.0 && nu * ratio_f64(p2 * (p2 - one)) >= 0.0,
            mu >= 0.0 && nu >= 0.0,
        ),
        Nonlinearity::LogPower { b, p } => (b >= 0.0, b == 0.0 || (b > 0.0 && p >= one), b >= 0.0),
    };
    vec![
        Condition::new("f_nondecreasing", incr, "f(s) <= f(k^2 s) for k > 1"),
        Condition::new("fprime_nondecreasing", convex, "f'(s) <= f'(k^2 s) for k > 1"),
        Condition::new("secant_monotone", secant, "F(k^2 s) - k^2 s f(k^2 s) <= k^2 (F(s) - s f(s)) for k > 1"),
    ]
}

fn choose_l(range: &Interval, user: Option<Rational64>) -> (Option<Rational64>, Option<Condition>) {
    match user {
        Some(l) => {
            let ok = range.contains(l);
            (Some(l), Some(Condition::new("supplied_l", ok, format!("l = {l} against admissible {range}"))))
        }
        None => (range.witness(), None),
    }
}

/// Decide every route's hypotheses for a catalog model.
pub fn check_hypotheses(model: &ModelSpec) -> HypothesisReport {
    let dims = model.dims;
    let (v, f, w) = (&model.potential, &model.local, &model.kernel);
    let consts = &model.constants;

    let global_existence = RouteCheck::from_conditions(
        Route::GlobalExistence,
        vec![potential_class(v), kernel_positive_part(w, dims), subcritical_growth(f, dims)],
    );

    let virial_blowup = RouteCheck::from_conditions(
        Route::VirialBlowup,
        vec![potential_class(v), kernel_admissible(w), virial_local(f, dims), potential_virial(v), kernel_virial(w)],
    );

    // V = 0 sharp threshold
    let threshold_i = {
        let (lrange, mut conds) = local_l_range(f, dims);
        let krange = kernel_l_range(w, dims);
        let range = lrange.intersect(&krange);
        conds.insert(0, Condition::new("potential_zero", v.is_zero(), "requires V = 0"));
        conds.push(kernel_decays(w, dims));
        conds.push(Condition::new(
            "kernel_l_bound",
            !krange.is_empty(),
            format!("N l W + x . grad W <= 0 for l in {krange}"),
        ));
        let c3range = kernel_c3_range(w);
        conds.push(Condition::new(
            "kernel_c3_bound",
            !c3range.is_empty(),
            format!("c3 W + x . grad W >= 0 for c3 in {c3range}"),
        ));
        conds.push(Condition::new("common_l", !range.is_empty(), format!("admissible l: {range}")));
        let (l, extra) = choose_l(&range, consts.l);
        conds.extend(extra);
        let mut c3 = c3_floor(&c3range);
        if let Some(user) = consts.c3 {
            let ok = c3range_contains_f64(&c3range, user);
            conds.push(Condition::new("supplied_c3", ok, format!("c3 = {user} against admissible {c3range}")));
            c3 = Some(user);
        }
        let mut check = RouteCheck::from_conditions(Route::ThresholdI, conds);
        check.l_range = Some(range);
        check.l = l;
        check.c3 = c3;
        check
    };

    // pure Hartree slice
    let hartree_threshold = {
        let positive = match *w {
            Kernel::InversePower { a, .. } | Kernel::Gaussian { a } | Kernel::Bridged { a, .. } => a > 0.0,
            _ => false,
        };
        let krange = kernel_l_range(w, dims);
        let range = krange.intersect(&Interval::above(Bound::Open(mass_critical(dims))));
        let mut conds = vec![
            Condition::new("local_zero", f.is_zero(), "requires f = 0"),
            Condition::new("potential_zero", v.is_zero(), "requires V = 0"),
            Condition::new("kernel_positive", positive, "requires W > 0 everywhere"),
            kernel_admissible(w),
            Condition::new(
                "kernel_l_bound",
                !range.is_empty(),
                format!("N l W + x . grad W <= 0 with N l > 2 for l in {range}"),
            ),
        ];
        let (l, extra) = choose_l(&range, consts.l);
        conds.extend(extra);
        let mut check = RouteCheck::from_conditions(Route::HartreeThreshold, conds);
        check.l_range = Some(range);
        check.l = l;
        check
    };

    // cross-manifold sharp threshold
    let threshold_ii = {
        let (lrange, mut conds) = local_l_range(f, dims);
        let krange = kernel_l_range(w, dims);
        let range = lrange.intersect(&krange);
        let nonneg = match *w {
            Kernel::Zero => true,
            Kernel::InversePower { a, .. }
            | Kernel::Gaussian { a }
            | Kernel::Saturating { a }
            | Kernel::Bridged { a, .. } => a >= 0.0,
        };
        conds.push(kernel_admissible(w));
        conds.push(Condition::new("kernel_nonnegative", nonneg, "requires W >= 0"));
        conds.push(Condition::new(
            "kernel_l_bound",
            !krange.is_empty(),
            format!("N l W + x . grad W <= 0 for l in {krange}"),
        ));
        conds.push(Condition::new("common_l", !range.is_empty(), format!("admissible l: {range}")));
        let (l, extra) = choose_l(&range, consts.l);
        conds.extend(extra);
        let c = l.and_then(|l| potential_constant(v, dims, l));
        let c_detail = match c {
            Some(c) => format!("N l V + x . grad V >= {c} V"),
            None => "V = 0, any c > 0".into(),
        };
        let c_ok = match (c, consts.c) {
            (Some(max), Some(user)) => user > 0.0 && user <= max,
            (None, Some(user)) => user > 0.0,
            _ => l.is_some(),
        };
        conds.push(Condition::new("potential_bound", c_ok, c_detail));
        conds.extend(monotone_f(f));
        let mut check = RouteCheck::from_conditions(Route::ThresholdII, conds);
        check.l_range = Some(range);
        check.l = l;
        check.c = consts.c.or(c);
        check
    };

    HypothesisReport { dims, global_existence, virial_blowup, threshold_i, hartree_threshold, threshold_ii }
}

fn c3_floor(range: &Interval) -> Option<f64> {
    if range.is_empty() {
        return None;
    }
    match range.lo {
        Bound::Closed(x) | Bound::Open(x) => Some(ratio_f64(x)),
        Bound::Unbounded => Some(0.0),
    }
}

fn c3range_contains_f64(range: &Interval, x: f64) -> bool {
    let lo_ok = match range.lo {
        Bound::Unbounded => true,
        Bound::Open(a) => x > ratio_f64(a),
        Bound::Closed(a) => x >= ratio_f64(a),
    };
    let hi_ok = match range.hi {
        Bound::Unbounded => true,
        Bound::Open(b) => x < ratio_f64(b),
        Bound::Closed(b) => x <= ratio_f64(b),
    };
    lo_ok && hi_ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HypothesisConstants;

    fn model(dims: usize, v: Potential, f: Nonlinearity, w: Kernel) -> ModelSpec {
        ModelSpec::new(dims, v, f, w).unwrap()
    }

    #[test]
    fn harmonic_inverse_square_power_blows_up() {
        let m = model(
            3,
            Potential::Harmonic { a: 1.0 },
            Nonlinearity::Power { b: 1.0, p: rat(1, 1) },
            Kernel::InversePower { a: 1.0, k: rat(2, 1) },
        );
        let r = check_hypotheses(&m);
        assert!(r.virial_blowup.holds, "{}", r.virial_blowup.failure_reasons());
    }

    #[test]
    fn log_power_inverse_square_blows_up() {
        let m = model(
            3,
            Potential::Harmonic { a: 1.0 },
            Nonlinearity::LogPower { b: 1.0, p: rat(2, 3) },
            Kernel::InversePower { a: 1.0, k: rat(2, 1) },
        );
        assert!(check_hypotheses(&m).virial_blowup.holds);
    }

    #[test]
    fn subcritical_gaussian_kernel_is_global() {
        for b in [1.0, -1.0] {
            let m = model(
                2,
                Potential::Harmonic { a: 1.0 },
                Nonlinearity::Power { b, p: rat(2, 5) },
                Kernel::Gaussian { a: 1.0 },
            );
            let r = check_hypotheses(&m);
            assert!(r.global_existence.holds, "{}", r.global_existence.failure_reasons());
        }
        let m = model(
            2,
            Potential::Harmonic { a: 1.0 },
            Nonlinearity::LogPower { b: 2.0, p: rat(1, 2) },
            Kernel::Saturating { a: 1.0 },
        );
        assert!(check_hypotheses(&m).global_existence.holds);
    }

    #[test]
    fn defocusing_power_fails_virial_sign() {
        let m = model(1, Potential::Zero, Nonlinearity::Power { b: -1.0, p: rat(3, 1) }, Kernel::Zero);
        let r = check_hypotheses(&m);
        assert!(!r.virial_blowup.holds);
        assert_eq!(r.virial_blowup.first_failure().unwrap().name, "local_virial_sign");
    }

    #[test]
    fn quintic_one_dimensional_routes() {
        let m = model(1, Potential::Zero, Nonlinearity::Power { b: 1.0, p: rat(2, 1) }, Kernel::Zero);
        let r = check_hypotheses(&m);
        assert!(r.virial_blowup.holds);
        assert!(!r.global_existence.holds);
        // l must satisfy 2 < l <= 2: empty, the mass-critical case is outside the d_I route
        assert!(!r.threshold_i.holds);
    }

    #[test]
    fn supercritical_power_threshold_i() {
        let m = model(1, Potential::Zero, Nonlinearity::Power { b: 1.0, p: rat(3, 1) }, Kernel::Zero);
        let r = check_hypotheses(&m);
        assert!(r.threshold_i.holds, "{}", r.threshold_i.failure_reasons());
        assert_eq!(r.threshold_i.l, Some(rat(3, 1)));
        assert_eq!(r.threshold_i.l_range.unwrap().to_string(), "(2, 3]");
    }

    #[test]
    fn small_exponent_reports_reason() {
        let m = model(1, Potential::Zero, Nonlinearity::Power { b: 1.0, p: rat(1, 10) }, Kernel::Zero);
        let r = check_hypotheses(&m);
        assert!(!r.threshold_i.holds);
        assert!(r.threshold_i.failure_reasons().contains("exponent below 2/N"));
    }

    #[test]
    fn two_power_harmonic_threshold_ii() {
        let m = model(
            1,
            Potential::Harmonic { a: 1.0 },
            Nonlinearity::TwoPower { mu: 1.0, p1: rat(5, 2), nu: 1.0, p2: rat(3, 1) },
            Kernel::Zero,
        );
        let r = check_hypotheses(&m);
        assert!(r.threshold_ii.holds, "{}", r.threshold_ii.failure_reasons());
        assert_eq!(r.threshold_ii.l, Some(rat(5, 2)));
        assert_eq!(r.threshold_ii.c, Some(4.5));
        assert!(!r.threshold_i.holds);
    }

    #[test]
    fn mixed_sign_two_power_threshold_i() {
        // c < 0 low power, d > 0 high power: l in [q1, q2] within (2/N, ...)
        let m = model(
            2,
            Potential::Zero,
            Nonlinearity::TwoPower { mu: -1.0, p1: rat(1, 2), nu: 1.0, p2: rat(3, 2) },
            Kernel::Zero,
        );
        let r = check_hypotheses(&m);
        assert!(r.threshold_i.holds, "{}", r.threshold_i.failure_reasons());
        assert_eq!(r.threshold_i.l_range.unwrap().to_string(), "(1, 3/2]");
        // literal monotonicity of f fails for the negative low power
        assert!(!r.threshold_ii.holds);
    }

    #[test]
    fn hartree_slice_needs_strong_singularity() {
        let good = model(3, Potential::Zero, Nonlinearity::Zero, Kernel::InversePower { a: 1.0, k: rat(5, 2) });
        let r = check_hypotheses(&good);
        assert!(r.hartree_threshold.holds, "{}", r.hartree_threshold.failure_reasons());
        assert!(r.d_i_gate().is_some());
        let weak = model(3, Potential::Zero, Nonlinearity::Zero, Kernel::InversePower { a: 1.0, k: rat(3, 2) });
        assert!(!check_hypotheses(&weak).hartree_threshold.holds);
        let gauss = model(3, Potential::Zero, Nonlinearity::Zero, Kernel::Gaussian { a: 1.0 });
        assert!(!check_hypotheses(&gauss).hartree_threshold.holds);
    }

    #[test]
    fn bridged_kernel_threshold_i() {
        let m = model(
            3,
            Potential::Zero,
            Nonlinearity::Power { b: 1.0, p: rat(4, 5) },
            Kernel::Bridged { a: 1.0, inner: rat(5, 2), k: rat(29, 10) },
        );
        let r = check_hypotheses(&m);
        assert!(r.threshold_i.holds, "{}", r.threshold_i.failure_reasons());
        assert_eq!(r.threshold_i.c3, Some(2.9));
        let l = r.threshold_i.l.unwrap();
        assert!(l > rat(2, 3) && l <= rat(4, 5));
    }

    #[test]
    fn supplied_constants_are_checked() {
        let mut m = model(1, Potential::Zero, Nonlinearity::Power { b: 1.0, p: rat(3, 1) }, Kernel::Zero);
        m.constants = HypothesisConstants { l: Some(rat(7, 2)), ..Default::default() };
        let r = check_hypotheses(&m);
        assert!(!r.threshold_i.holds);
        assert_eq!(r.threshold_i.first_failure().unwrap().name, "supplied_l");
    }

    #[test]
    fn report_text_is_flat() {
        let m = model(1, Potential::Zero, Nonlinearity::Power { b: 1.0, p: rat(2, 1) }, Kernel::Zero);
        let text = check_hypotheses(&m).to_text();
        assert!(text.lines().all(|l| l.contains(" = ")));
        assert!(text.contains("virial_blowup.holds = true"));
    }
}
