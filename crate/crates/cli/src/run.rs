//! Command dispatch, output layout and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use nls_core::ansatz::{gaussian, with_quadratic_phase};
use nls_core::classify::{
    agrees, classify_initial_data, dichotomy_experiment, write_dichotomy_csv, ClassificationReport, DichotomyOptions,
    Level, Levels, DICHOTOMY_HEADER,
};
use nls_core::dynamics::{evolve, Outcome, TrajectoryLog};
use nls_core::exec;
use nls_core::functionals::{fmt_f64, Problem};
use nls_core::grid::{make_grid, ComplexField};
use nls_core::groundstate::{solve_stationary, verify_stationary_identities};
use nls_core::model::{ModelSpec, RouteCheck};
use nls_core::snapshot::{load_snapshot, save_snapshot};
use nls_core::thresholds::{
    estimate_d_i, estimate_d_ii, estimate_d_m, estimate_d_n, estimate_d_prime_i, SearchOptions, ThresholdKind,
    ThresholdReport,
};
use nls_core::NlsError;
use sha2::{Digest, Sha256};

use crate::config::{Command, GridConfig, InitialConfig, RouteName, RunConfig, SweepConfig, SweepParameter, SweepTask};

pub const MANIFEST: &str = "manifest.txt";

/// Why a run stopped early, ordered by exit code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Failure {
    /// Unreadable or invalid config, bad inputs, unwritable outputs.
    Config(String),
    /// The hypotheses of the requested route or level fail.
    Gate(String),
    /// Divergence, collapse, corrupt fields, empty feasible families.
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Gate(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Gate(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<NlsError> for Failure {
    fn from(e: NlsError) -> Self {
        let msg = e.to_string();
        match e {
            NlsError::HypothesisViolation(_) | NlsError::Undecidable(_) => Failure::Gate(msg),
            NlsError::Divergence(_)
            | NlsError::MassCollapse(_)
            | NlsError::CorruptField(_)
            | NlsError::ZeroField(_)
            | NlsError::NehariEmpty(_)
            | NlsError::NotDilationReachable(_)
            | NlsError::EmptyFamily(_) => Failure::Numerical(msg),
            NlsError::InvalidGrid(_)
            | NlsError::SizeMismatch { .. }
            | NlsError::GridMismatch
            | NlsError::InvalidModel(_)
            | NlsError::InvalidOptions(_)
            | NlsError::Snapshot(_)
            | NlsError::Io(_) => Failure::Config(msg),
        }
    }
}

type Step<T> = std::result::Result<T, Failure>;

/// Overrides taken from the command line.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub quiet: bool,
}

/// What a finished run reports back to the caller.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub exit_code: i32,
    pub error: Option<String>,
    pub out_dir: PathBuf,
    pub outputs: Vec<String>,
    pub summary: Vec<(String, String)>,
}

/// Files and scalars a command produced.
struct Artifacts {
    dir: PathBuf,
    prefix: String,
    files: Vec<String>,
    summary: Vec<(String, String)>,
    quiet: bool,
}

impl Artifacts {
    fn name(&self, suffix: &str) -> String {
        format!("{}_{suffix}", self.prefix)
    }

    fn write(&mut self, name: String, bytes: &[u8]) -> Step<()> {
        fs::write(self.dir.join(&name), bytes).map_err(|e| Failure::Config(format!("cannot write {name}: {e}")))?;
        self.files.push(name);
        Ok(())
    }

    fn snapshot(&mut self, name: String, u: &ComplexField) -> Step<()> {
        save_snapshot(u, &self.dir.join(&name)).map_err(|e| Failure::Config(format!("cannot write {name}: {e}")))?;
        self.files.push(name);
        Ok(())
    }

    fn scalar(&mut self, key: impl Into<String>, value: impl ToString) {
        self.summary.push((key.into(), value.to_string()));
    }

    fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("nls-lab: {msg}");
        }
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Load, dispatch and write the manifest. Never panics on bad input.
pub fn run(config_path: &Path, opts: &RunOptions) -> RunReport {
    let started = unix_now();
    let (mut cfg, text) = match RunConfig::load(config_path) {
        Ok(v) => v,
        Err(e) => {
            let dir = opts.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let report = RunReport {
                exit_code: 1,
                error: Some(e.to_string()),
                out_dir: dir,
                outputs: Vec::new(),
                summary: Vec::new(),
            };
            write_manifest(&report, config_path, None, None, None, started);
            return report;
        }
    };
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let dir = opts.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let mut art = Artifacts {
        dir: dir.clone(),
        prefix: cfg.output.prefix.clone(),
        files: Vec::new(),
        summary: Vec::new(),
        quiet: opts.quiet,
    };
    let base = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let result = fs::create_dir_all(&dir)
        .map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))
        .and_then(|_| dispatch(&cfg, &base, &mut art));
    let report = RunReport {
        exit_code: result.as_ref().map(|_| 0).unwrap_or_else(Failure::exit_code),
        error: result.err().map(|f| f.message().to_string()),
        out_dir: dir,
        outputs: art.files,
        summary: art.summary,
    };
    if let Some(e) = &report.error {
        if !opts.quiet {
            eprintln!("nls-lab: error: {e}");
        }
    }
    write_manifest(&report, config_path, Some(&text), Some(cfg.command), Some(cfg.seed), started);
    report
}

fn write_manifest(
    report: &RunReport,
    config_path: &Path,
    text: Option<&str>,
    command: Option<Command>,
    seed: Option<u64>,
    started: u64,
) {
    let mut s = String::new();
    let _ = writeln!(s, "artifact = nls-lab");
    let _ = writeln!(s, "artifact_version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "config = {}", config_path.display());
    if let Some(t) = text {
        let _ = writeln!(s, "config_sha256 = {:x}", Sha256::digest(t.as_bytes()));
    }
    if let Some(c) = command {
        let _ = writeln!(s, "command = {c}");
    }
    if let Some(seed) = seed {
        let _ = writeln!(s, "seed = {seed}");
    }
    let _ = writeln!(s, "started_unix = {started}");
    let _ = writeln!(s, "finished_unix = {}", unix_now());
    let _ = writeln!(s, "exit_code = {}", report.exit_code);
    if let Some(e) = &report.error {
        let _ = writeln!(s, "error = {e}");
    }
    for f in &report.outputs {
        let _ = writeln!(s, "output = {f}");
    }
    for (k, v) in &report.summary {
        let _ = writeln!(s, "summary.{k} = {v}");
    }
    // write then rename so a reader never sees a half-written manifest
    if fs::create_dir_all(&report.out_dir).is_ok() {
        let tmp = report.out_dir.join(".manifest.txt.tmp");
        if fs::write(&tmp, s).is_ok() {
            let _ = fs::rename(&tmp, report.out_dir.join(MANIFEST));
        }
    }
}

fn dispatch(cfg: &RunConfig, base: &Path, art: &mut Artifacts) -> Step<()> {
    let problem = build_problem(&cfg.model.to_model().map_err(|e| Failure::Config(e.to_string()))?, &cfg.grid)?;
    art.note(&format!("{} on {}^{} points", cfg.command, cfg.grid.points, cfg.model.dims));
    match cfg.command {
        Command::Simulate => simulate(cfg, base, &problem, art),
        Command::Groundstate => groundstate(cfg, &problem, art),
        Command::Threshold => threshold(cfg, &problem, art),
        Command::Classify => classify(cfg, base, &problem, art),
        Command::Dichotomy => dichotomy(cfg, &problem, art),
        Command::Sweep => sweep(cfg, base, &problem, art),
    }
}

fn build_problem(model: &ModelSpec, grid: &GridConfig) -> Step<Problem> {
    let g = make_grid(model.dims, grid.extent, grid.points)?;
    Ok(Problem::new(*model, g)?)
}

fn search_options(cfg: &RunConfig) -> SearchOptions {
    cfg.search.to_options(cfg.seed)
}

fn initial_field(
    cfg: &RunConfig,
    base: &Path,
    problem: &Problem,
    omega: f64,
    amp_override: Option<f64>,
) -> Step<ComplexField> {
    let init = cfg.initial.as_ref().ok_or_else(|| Failure::Config("no [initial] block".into()))?;
    let phased = |u: ComplexField, sigma: f64| if sigma != 0.0 { with_quadratic_phase(&u, sigma) } else { u };
    Ok(match init {
        InitialConfig::Gaussian { amplitude, width, sigma } => {
            gaussian(problem.grid(), amp_override.unwrap_or(*amplitude), *width, *sigma)
        }
        InitialConfig::GroundState { amplitude, sigma } => {
            let st = solve_stationary(problem, omega, None, &cfg.search.solve_options(cfg.seed))?;
            phased(st.field.scaled(amp_override.unwrap_or(*amplitude)), *sigma)
        }
        InitialConfig::Snapshot { path, amplitude, sigma } => {
            let full = if path.is_absolute() { path.clone() } else { base.join(path) };
            let u = load_snapshot(&full).map_err(|e| Failure::Config(format!("{}: {e}", full.display())))?;
            if u.grid().dims() != problem.grid().dims()
                || u.grid().points() != problem.grid().points()
                || u.grid().extent() != problem.grid().extent()
            {
                return Err(Failure::Config(format!("snapshot {} does not match the configured grid", full.display())));
            }
            let u = ComplexField::new(problem.grid().clone(), u.into_values())?;
            phased(u.scaled(amp_override.unwrap_or(*amplitude)), *sigma)
        }
    })
}

fn outcome_failure(log: &TrajectoryLog) -> Step<()> {
    if log.outcome == Outcome::Corrupt {
        Err(Failure::Numerical(format!("field became non-finite at t = {}", fmt_f64(log.t_end))))
    } else {
        Ok(())
    }
}

fn record_log(art: &mut Artifacts, stem: &str, log: &TrajectoryLog) -> Step<()> {
    let mut csv = Vec::new();
    log.write_csv(&mut csv)?;
    art.write(art.name(&format!("{stem}traj.csv")), &csv)?;
    for (i, (_, field)) in log.snapshots.iter().enumerate() {
        art.snapshot(art.name(&format!("{stem}t{i:03}.nlsf")), field)?;
    }
    for line in log.summary().lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            art.scalar(format!("{stem}{k}"), v);
        }
    }
    if !log.records.is_empty() {
        art.scalar(format!("{stem}mass_drift"), fmt_f64(log.mass_drift()));
        let e0 = log.records[0].energy.abs().max(f64::MIN_POSITIVE);
        art.scalar(format!("{stem}energy_drift_rel"), fmt_f64(log.energy_drift() / e0));
    }
    Ok(())
}

fn simulate(cfg: &RunConfig, base: &Path, problem: &Problem, art: &mut Artifacts) -> Step<()> {
    let u0 = initial_field(cfg, base, problem, cfg.omega, None)?;
    let log = evolve(&u0, problem, cfg.omega, &cfg.evolve.to_options())?;
    record_log(art, "", &log)?;
    art.snapshot(art.name("final.nlsf"), &log.final_field)?;
    outcome_failure(&log)
}

fn groundstate(cfg: &RunConfig, problem: &Problem, art: &mut Artifacts) -> Step<()> {
    let st = solve_stationary(problem, cfg.omega, None, &cfg.search.solve_options(cfg.seed))?;
    let rep = verify_stationary_identities(&st, problem)?;
    art.snapshot(art.name("groundstate.nlsf"), &st.field)?;
    art.scalar("iterations", st.iterations);
    art.scalar("residual_norm", fmt_f64(st.residual_norm));
    art.scalar("mass_sq", fmt_f64(st.components.mass));
    art.scalar("I_omega", fmt_f64(st.components.i_omega(cfg.omega)));
    art.scalar("S_omega", fmt_f64(rep.s_omega));
    art.scalar("Q", fmt_f64(rep.q));
    art.scalar("pohozaev", fmt_f64(rep.pohozaev));
    art.scalar("identities_hold", rep.holds);
    Ok(())
}

fn estimate_level(
    problem: &Problem,
    omega: f64,
    kind: ThresholdKind,
    opts: &SearchOptions,
) -> Step<Vec<ThresholdReport>> {
    Ok(match kind {
        ThresholdKind::DI => vec![estimate_d_i(problem, omega, opts)?],
        ThresholdKind::DPrimeI => vec![estimate_d_prime_i(problem, omega, opts)?],
        ThresholdKind::DN => vec![estimate_d_n(problem, omega, opts)?],
        ThresholdKind::DM => vec![estimate_d_m(problem, omega, opts)?],
        ThresholdKind::DII => {
            let r = estimate_d_ii(problem, omega, opts)?;
            vec![r.d_n, r.d_m, r.d_ii]
        }
    })
}

fn thresholds_text(problem: &Problem, reports: &[ThresholdReport]) -> String {
    let mut s = problem.model().hypotheses().to_text();
    for r in reports {
        s.push_str(&r.to_text());
    }
    s
}

fn threshold(cfg: &RunConfig, problem: &Problem, art: &mut Artifacts) -> Step<()> {
    let levels = &cfg.threshold.as_ref().expect("validated").levels;
    let opts = search_options(cfg);
    let mut reports = Vec::new();
    for l in levels {
        art.note(&format!("estimating {}", l.kind()));
        reports.extend(estimate_level(problem, cfg.omega, l.kind(), &opts)?);
    }
    art.write(art.name("thresholds.txt"), thresholds_text(problem, &reports).as_bytes())?;
    for r in &reports {
        art.snapshot(art.name(&format!("{}.nlsf", r.which.key())), &r.minimizer)?;
        art.scalar(r.which.key(), fmt_f64(r.value));
        art.scalar(format!("{}.converged", r.which.key()), r.converged);
    }
    Ok(())
}

fn route_check(problem: &Problem, route: RouteName) -> RouteCheck {
    let h = problem.model().hypotheses();
    match route {
        RouteName::GlobalExistence => h.global_existence,
        RouteName::VirialBlowup => h.virial_blowup,
        RouteName::ThresholdI => h.threshold_i,
        RouteName::HartreeThreshold => h.hartree_threshold,
        RouteName::ThresholdII => h.threshold_ii,
    }
}

/// Levels supplied in the config, else estimated wherever a route's hypotheses hold.
fn levels_for(
    problem: &Problem,
    omega: f64,
    given_d_i: Option<f64>,
    given_d_ii: Option<f64>,
    opts: &SearchOptions,
    reports: &mut Vec<ThresholdReport>,
) -> Step<Levels> {
    let hyp = problem.model().hypotheses();
    let known = |v: f64| Level { value: v, converged: true };
    let d_i = match given_d_i {
        Some(v) => Some(known(v)),
        None if hyp.d_i_gate().is_some() && problem.model().potential.is_zero() => {
            let r = estimate_d_i(problem, omega, opts)?;
            let level = Level::from(&r);
            reports.push(r);
            Some(level)
        }
        None => None,
    };
    let d_ii = match given_d_ii {
        Some(v) => Some(known(v)),
        None if hyp.d_ii_gate().is_some() => {
            let r = estimate_d_ii(problem, omega, opts)?;
            let level = Level::from(&r.d_ii);
            reports.extend([r.d_n, r.d_m, r.d_ii]);
            Some(level)
        }
        None => None,
    };
    Ok(Levels { d_i, d_ii })
}

/// RFC 4180 quoting for free-text fields.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const CLASSIFY_HEADER: &str =
    "set_label,prediction,decided_by,I_omega,S_omega,Q,energy,J_prime,d_I,d_II,observed,t_end,agreement,flags";

fn classify_row(r: &ClassificationReport, levels: &Levels, agreement: Option<bool>) -> String {
    let m = &r.memberships;
    let level = |l: Option<Level>| l.map(|l| fmt_f64(l.value)).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.set_label,
        r.prediction,
        r.decided_by.map(|d| d.key()).unwrap_or("none"),
        fmt_f64(m.i_omega),
        fmt_f64(m.s_omega),
        fmt_f64(m.q),
        fmt_f64(m.energy),
        fmt_f64(m.j_prime),
        level(levels.d_i),
        level(levels.d_ii),
        r.observed.map(|o| o.as_str()).unwrap_or(""),
        r.t_end.map(fmt_f64).unwrap_or_default(),
        agreement.map(|a| a.to_string()).unwrap_or_default(),
        csv_field(&r.flags.join("; "))
    )
}

fn classify(cfg: &RunConfig, base: &Path, problem: &Problem, art: &mut Artifacts) -> Step<()> {
    if let Some(route) = cfg.classify.route {
        let check = route_check(problem, route);
        if !check.holds {
            return Err(Failure::Gate(format!("{}: {}", check.route.key(), check.failure_reasons())));
        }
    }
    let u0 = initial_field(cfg, base, problem, cfg.omega, None)?;
    let opts = search_options(cfg);
    let mut reports = Vec::new();
    let levels = levels_for(problem, cfg.omega, cfg.classify.d_i, cfg.classify.d_ii, &opts, &mut reports)?;
    if !reports.is_empty() {
        art.write(art.name("thresholds.txt"), thresholds_text(problem, &reports).as_bytes())?;
    }
    let mut report = classify_initial_data(problem, &u0, cfg.omega, &levels)?;
    let mut agreement = None;
    let mut log = None;
    if cfg.classify.evolve {
        let l = evolve(&u0, problem, cfg.omega, &cfg.evolve.to_options())?;
        report.observed = Some(l.outcome);
        report.t_end = Some(l.t_end);
        agreement = agrees(report.prediction, &l);
        record_log(art, "", &l)?;
        log = Some(l);
    }
    let csv = format!("{CLASSIFY_HEADER}\n{}\n", classify_row(&report, &levels, agreement));
    art.write(art.name("classify.csv"), csv.as_bytes())?;
    art.scalar("set_label", report.set_label);
    art.scalar("prediction", report.prediction);
    for v in &report.routes {
        art.scalar(format!("route.{}", v.route.key()), format!("{}: {}", v.prediction, v.reason));
    }
    match log {
        Some(l) => outcome_failure(&l),
        None => Ok(()),
    }
}

fn dichotomy_levels(
    cfg: &RunConfig,
    problem: &Problem,
    omega: f64,
    given: Option<f64>,
    art: &mut Artifacts,
) -> Step<Levels> {
    let grid = cfg.dichotomy.as_ref().and_then(|d| d.threshold_grid.clone());
    let search_problem = match &grid {
        Some(g) => build_problem(problem.model(), g)?,
        None => problem.clone(),
    };
    let mut reports = Vec::new();
    let levels = levels_for(&search_problem, omega, None, given, &search_options(cfg), &mut reports)?;
    if !reports.is_empty() {
        art.write(art.name("thresholds.txt"), thresholds_text(&search_problem, &reports).as_bytes())?;
    }
    // only the d_II route is exercised along the ray
    Ok(Levels { d_i: None, d_ii: levels.d_ii })
}

fn dichotomy(cfg: &RunConfig, problem: &Problem, art: &mut Artifacts) -> Step<()> {
    let d = cfg.dichotomy.as_ref().expect("validated");
    let st = solve_stationary(problem, cfg.omega, None, &cfg.search.solve_options(cfg.seed))?;
    let levels = dichotomy_levels(cfg, problem, cfg.omega, d.d_ii, art)?;
    let opts = DichotomyOptions { amplitudes: d.amplitudes.clone(), sigma: d.sigma, evolve: cfg.evolve.to_options() };
    let rows = dichotomy_experiment(problem, cfg.omega, &st.field, &levels, &opts)?;
    let mut csv = Vec::new();
    write_dichotomy_csv(&rows, &mut csv)?;
    art.write(art.name("classify.csv"), &csv)?;
    let mut disagreements = 0;
    let mut flips = 0;
    for (i, row) in rows.iter().enumerate() {
        record_log(art, &format!("c{i:02}_"), &row.log)?;
        disagreements += usize::from(row.agreement == Some(false));
        flips += row.invariance.violations();
        art.scalar(format!("c{i:02}.invariance"), &row.invariance.reason);
    }
    art.scalar("disagreements", disagreements);
    art.scalar("sign_flips", flips);
    rows.iter().try_for_each(|r| outcome_failure(&r.log))
}

fn sweep_header(task: SweepTask) -> String {
    let tail = match task {
        SweepTask::Simulate => "outcome,t_end,mass_drift,energy_drift".to_string(),
        SweepTask::Dichotomy => DICHOTOMY_HEADER.to_string(),
        SweepTask::DN => "d_N,spread,converged".to_string(),
    };
    format!("index,parameter,value,exit_code,{tail}")
}

fn sweep_columns(task: SweepTask) -> usize {
    sweep_header(task).split(',').count() - 4
}

fn sweep_row(
    cfg: &RunConfig,
    s: &SweepConfig,
    base: &Path,
    problem: &Problem,
    value: f64,
    d_ii: Option<Level>,
) -> Step<String> {
    let (omega, amp) = match s.parameter {
        SweepParameter::Omega => (value, None),
        SweepParameter::Amplitude => (cfg.omega, Some(value)),
    };
    if !(omega > 0.0) {
        return Err(Failure::Config(format!("omega must be positive, got {value}")));
    }
    match s.task {
        SweepTask::Simulate => {
            let u0 = initial_field(cfg, base, problem, omega, amp)?;
            let log = evolve(&u0, problem, omega, &cfg.evolve.to_options())?;
            outcome_failure(&log)?;
            let e0 = log.records[0].energy.abs().max(f64::MIN_POSITIVE);
            Ok(format!(
                "{},{},{},{}",
                log.outcome,
                fmt_f64(log.t_end),
                fmt_f64(log.mass_drift()),
                fmt_f64(log.energy_drift() / e0)
            ))
        }
        SweepTask::Dichotomy => {
            let st = solve_stationary(problem, omega, None, &cfg.search.solve_options(cfg.seed))?;
            let d_ii = match d_ii {
                Some(l) => Some(l),
                None => {
                    let mut reports = Vec::new();
                    levels_for(problem, omega, None, s.d_ii, &search_options(cfg), &mut reports)?.d_ii
                }
            };
            let opts = DichotomyOptions {
                amplitudes: vec![amp.unwrap_or(1.0)],
                sigma: s.sigma,
                evolve: cfg.evolve.to_options(),
            };
            let rows = dichotomy_experiment(problem, omega, &st.field, &Levels { d_i: None, d_ii }, &opts)?;
            outcome_failure(&rows[0].log)?;
            Ok(rows[0].csv_row())
        }
        SweepTask::DN => {
            let r = estimate_d_n(problem, omega, &search_options(cfg))?;
            Ok(format!("{},{},{}", fmt_f64(r.value), fmt_f64(r.spread), r.converged))
        }
    }
}

fn sweep(cfg: &RunConfig, base: &Path, problem: &Problem, art: &mut Artifacts) -> Step<()> {
    let s = cfg.sweep.as_ref().expect("validated");
    if s.task == SweepTask::DN && s.parameter == SweepParameter::Amplitude {
        return Err(Failure::Config("a d_N sweep scans omega, not amplitude".into()));
    }
    // one d_II serves every row of an amplitude scan
    let shared = if s.task == SweepTask::Dichotomy && s.parameter == SweepParameter::Amplitude && !s.values.is_empty() {
        let mut reports = Vec::new();
        let levels = levels_for(problem, cfg.omega, None, s.d_ii, &search_options(cfg), &mut reports)?;
        if !reports.is_empty() {
            art.write(art.name("thresholds.txt"), thresholds_text(problem, &reports).as_bytes())?;
        }
        levels.d_ii
    } else {
        None
    };
    let rows = exec::map_jobs(&s.values, |&v| sweep_row(cfg, s, base, problem, v, shared));
    let mut csv = sweep_header(s.task);
    csv.push('\n');
    let mut failures = 0;
    for (i, (v, row)) in s.values.iter().zip(&rows).enumerate() {
        let param = match s.parameter {
            SweepParameter::Amplitude => "amplitude",
            SweepParameter::Omega => "omega",
        };
        let (code, tail) = match row {
            Ok(t) => (0, t.clone()),
            Err(f) => {
                failures += 1;
                (f.exit_code(), vec![""; sweep_columns(s.task)].join(","))
            }
        };
        let _ = writeln!(csv, "{i},{param},{},{code},{tail}", fmt_f64(*v));
    }
    art.write(art.name("sweep.csv"), csv.as_bytes())?;
    art.scalar("rows", s.values.len());
    art.scalar("failed_rows", failures);
    for (i, row) in rows.iter().enumerate() {
        if let Err(f) = row {
            art.scalar(format!("row{i}.error"), f.message());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nls_core::model::{Kernel, Nonlinearity, Potential};
    use num_rational::Rational64;

    fn run_text(dir: &Path, name: &str, text: &str) -> RunReport {
        let path = dir.join(name);
        fs::write(&path, text).unwrap();
        run(&path, &RunOptions { out: Some(dir.join(format!("{name}.out"))), seed: None, quiet: true })
    }

    fn read(report: &RunReport, file: &str) -> String {
        fs::read_to_string(report.out_dir.join(file)).unwrap()
    }

    const FREE_GAUSSIAN: &str = r#"
command = "simulate"
[model]
dims = 1
nonlinearity = { kind = "zero" }
[grid]
extent = 40.0
points = 256
[initial]
kind = "gaussian"
amplitude = 1.0
width = 1.0
sigma = 0.5
[evolve]
t_final = 1.0
record_every = 0.1
snapshot_times = [0.5]
"#;

    #[test]
    fn free_gaussian_run_conserves_mass() {
        let dir = tempfile::tempdir().unwrap();
        let r = run_text(dir.path(), "free.toml", FREE_GAUSSIAN);
        assert_eq!(r.exit_code, 0, "{:?}", r.error);
        let csv = read(&r, "run_traj.csv");
        let mut lines = csv.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let col = header.iter().position(|&h| h == "mass_sq").unwrap();
        let mass: Vec<f64> = lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
        assert_eq!(mass.len(), 11);
        let drift = mass.iter().map(|m| ((m - mass[0]) / mass[0]).abs()).fold(0.0, f64::max);
        assert!(drift <= 1e-11, "{drift}");
        assert!(r.outputs.contains(&"run_t000.nlsf".to_string()));
        assert!(r.outputs.contains(&"run_final.nlsf".to_string()));
        let manifest = read(&r, MANIFEST);
        assert!(manifest.contains("exit_code = 0\n"));
        assert!(manifest.contains("output = run_traj.csv\n"));
        assert!(manifest.lines().any(|l| l.starts_with("config_sha256 = ") && l.len() == 16 + 64));
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = run_text(dir.path(), "a.toml", FREE_GAUSSIAN);
        let b = run_text(dir.path(), "b.toml", FREE_GAUSSIAN);
        assert_eq!(read(&a, "run_traj.csv"), read(&b, "run_traj.csv"));
        assert_eq!(
            fs::read(a.out_dir.join("run_final.nlsf")).unwrap(),
            fs::read(b.out_dir.join("run_final.nlsf")).unwrap()
        );
    }

    #[test]
    fn small_exponent_is_refused_with_exit_2() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"
command = "classify"
[model]
dims = 1
nonlinearity = { kind = "power", b = 1.0, p = 0.1 }
[grid]
extent = 20.0
points = 64
[initial]
kind = "gaussian"
amplitude = 1.0
width = 1.0
[classify]
route = "threshold_I"
"#;
        let r = run_text(dir.path(), "gate.toml", text);
        assert_eq!(r.exit_code, 2);
        assert!(r.error.as_deref().unwrap().contains("exponent below 2/N"), "{:?}", r.error);
        assert!(read(&r, MANIFEST).contains("exit_code = 2\n"));
    }

    #[test]
    fn malformed_configs_exit_1() {
        let dir = tempfile::tempdir().unwrap();
        let unknown = FREE_GAUSSIAN.replace("points = 256", "points = 256\nresolution = 2");
        let r = run_text(dir.path(), "bad.toml", &unknown);
        assert_eq!(r.exit_code, 1);
        let manifest = read(&r, MANIFEST);
        assert!(manifest.contains("exit_code = 1\n") && manifest.contains("error = malformed config"), "{manifest}");
        let missing =
            run(&dir.path().join("absent.toml"), &RunOptions { out: Some(dir.path().join("m")), ..Default::default() });
        assert_eq!(missing.exit_code, 1);
    }

    #[test]
    fn collapsed_stationary_solve_exits_3() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"
command = "groundstate"
[model]
dims = 1
potential = { kind = "harmonic", a = 1.0 }
nonlinearity = { kind = "zero" }
[grid]
extent = 20.0
points = 128
"#;
        let r = run_text(dir.path(), "linear.toml", text);
        assert_eq!(r.exit_code, 3, "{:?}", r.error);
    }

    #[test]
    fn ground_state_snapshot_feeds_a_later_run() {
        let dir = tempfile::tempdir().unwrap();
        let gs = r#"
command = "groundstate"
[model]
dims = 1
nonlinearity = { kind = "power", b = 1.0, p = 1 }
[grid]
extent = 30.0
points = 256
"#;
        let r = run_text(dir.path(), "gs.toml", gs);
        assert_eq!(r.exit_code, 0, "{:?}", r.error);
        let snap = r.out_dir.join("run_groundstate.nlsf");
        let sim = format!(
            "{}\n[initial]\nkind = \"snapshot\"\npath = {:?}\n[evolve]\nt_final = 0.2\n",
            gs.replace("groundstate", "simulate"),
            snap.display().to_string()
        );
        let r = run_text(dir.path(), "sim.toml", &sim);
        assert_eq!(r.exit_code, 0, "{:?}", r.error);
        // a stationary state only rotates its phase: |u| is unchanged
        let first = load_snapshot(&snap).unwrap();
        let last = load_snapshot(&r.out_dir.join("run_final.nlsf")).unwrap();
        let err =
            first.values().iter().zip(last.values()).map(|(a, b)| (a.norm() - b.norm()).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        let wrong_grid = sim.replace("points = 256", "points = 128");
        assert_eq!(run_text(dir.path(), "wrong.toml", &wrong_grid).exit_code, 1);
    }

    #[test]
    fn threshold_command_writes_levels_or_refuses() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"
command = "threshold"
[model]
dims = 1
potential = { kind = "harmonic", a = 1.0 }
nonlinearity = { kind = "two_power", mu = 1.0, p1 = "5/2", nu = 1.0, p2 = 3 }
[grid]
extent = 20.0
points = 128
[threshold]
levels = ["d_N"]
[search]
widths = [1.0]
amplitudes = [1.0, 2.0]
perturbations = 1
refine_steps = 10
refine_top = 3
"#;
        let r = run_text(dir.path(), "th.toml", text);
        assert_eq!(r.exit_code, 0, "{:?}", r.error);
        let txt = read(&r, "run_thresholds.txt");
        assert!(txt.contains("threshold_II.holds = true") && txt.contains("d_N.value = "));
        let critical = text
            .replace("potential = { kind = \"harmonic\", a = 1.0 }\n", "")
            .replace(
                "{ kind = \"two_power\", mu = 1.0, p1 = \"5/2\", nu = 1.0, p2 = 3 }",
                "{ kind = \"power\", b = 1.0, p = 2 }",
            )
            .replace("[\"d_N\"]", "[\"d_prime_I\"]");
        let r = run_text(dir.path(), "crit.toml", &critical);
        assert_eq!(r.exit_code, 2, "{:?}", r.error);
    }

    const QUINTIC_SWEEP: &str = r#"
command = "sweep"
[model]
dims = 1
nonlinearity = { kind = "power", b = 1.0, p = 2 }
[grid]
extent = 30.0
points = 256
[evolve]
t_final = 0.3
record_every = 0.05
blowup_gradient_factor = 10.0
[sweep]
parameter = "amplitude"
values = [0.5, 1.0, 2.0]
task = "dichotomy"
sigma = 0.5
"#;

    #[test]
    fn amplitude_sweep_matches_the_dichotomy_driver() {
        let dir = tempfile::tempdir().unwrap();
        let r = run_text(dir.path(), "sweep.toml", QUINTIC_SWEEP);
        assert_eq!(r.exit_code, 0, "{:?}", r.error);
        let csv = read(&r, "run_sweep.csv");
        let model = ModelSpec::new(
            1,
            Potential::Zero,
            Nonlinearity::Power { b: 1.0, p: Rational64::from_integer(2) },
            Kernel::Zero,
        )
        .unwrap();
        let pr = Problem::new(model, make_grid(1, 30.0, 256).unwrap()).unwrap();
        let cfg = RunConfig::parse(QUINTIC_SWEEP).unwrap();
        let st = solve_stationary(&pr, 1.0, None, &cfg.search.solve_options(0)).unwrap();
        let opts = DichotomyOptions { amplitudes: vec![0.5, 1.0, 2.0], sigma: 0.5, evolve: cfg.evolve.to_options() };
        let rows = dichotomy_experiment(&pr, 1.0, &st.field, &Levels::default(), &opts).unwrap();
        let body: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(body.len(), 3);
        for (line, row) in body.iter().zip(&rows) {
            assert!(line.ends_with(&row.csv_row()), "{line} vs {}", row.csv_row());
            assert_eq!(line.split(',').nth(3), Some("0"));
        }
    }

    #[test]
    fn empty_sweep_writes_only_the_header() {
        let dir = tempfile::tempdir().unwrap();
        let r = run_text(dir.path(), "empty.toml", &QUINTIC_SWEEP.replace("values = [0.5, 1.0, 2.0]", "values = []"));
        assert_eq!(r.exit_code, 0, "{:?}", r.error);
        assert_eq!(read(&r, "run_sweep.csv"), format!("{}\n", sweep_header(SweepTask::Dichotomy)));
    }

    #[test]
    fn omega_scan_of_nehari_level_keeps_failed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"
command = "sweep"
[model]
dims = 1
potential = { kind = "harmonic", a = 1.0 }
nonlinearity = { kind = "two_power", mu = 1.0, p1 = "5/2", nu = 1.0, p2 = 3 }
[grid]
extent = 20.0
points = 128
[search]
widths = [1.0]
amplitudes = [1.0, 2.0]
perturbations = 1
refine_steps = 10
refine_top = 3
[sweep]
parameter = "omega"
values = [1.0, 2.0, -1.0]
task = "d_N"
"#;
        let r = run_text(dir.path(), "omega.toml", text);
        assert_eq!(r.exit_code, 0, "{:?}", r.error);
        let csv = read(&r, "run_sweep.csv");
        let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
        assert_eq!(rows.len(), 3);
        for row in &rows[..2] {
            assert_eq!(row[3], "0");
            assert!(row[4].parse::<f64>().unwrap() > 0.0);
        }
        assert_eq!(rows[2][3], "1");
        assert!(rows[2][4..].iter().all(|f| f.is_empty()));
    }

    #[test]
    fn csv_fields_are_quoted_when_needed() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a, b"), "\"a, b\"");
        assert_eq!(csv_field("say \"x\""), "\"say \"\"x\"\"\"");
    }
}
