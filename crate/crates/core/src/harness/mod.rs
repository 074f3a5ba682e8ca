//! Config-driven runs, file outputs and figure presets behind the CLI.
//!
//! Every command is deterministic: the same config produces byte-identical
//! files.

pub mod config;
pub mod csv;
pub mod figures;
pub mod svg;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::analysis::{
    check_orbit_bounds, default_recurrence_epsilon, recurrence_scan, stepsize_safety,
    volume_track, BoundsCertificate, OrbitCheck, RecurrenceReport,
};
use crate::dynamics::{rollout, rollout_vs_opponent, Mode, Trajectory};
use crate::error::{Error, Result};
use crate::game::{GameInstance, JointState};
use crate::metrics::{
    energy_delta_agent1, energy_delta_agent2, perturbed_energy, regret_alt_closed_form,
    regret_bound, regret_scale, regret_series, weighted_energy, Play, RegretReport,
};
use crate::numerics::Point2;

pub use config::{ExperimentConfig, OpponentSpec};

/// Drift allowed in the perturbed energy, relative to the initial energies.
pub const ENERGY_DRIFT_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Ok,
    Diverged { step: usize },
    InvariantFailure(String),
}

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DIVERGED: i32 = 3;
    pub const INVARIANT: i32 = 4;
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub files: Vec<PathBuf>,
    /// Human-readable `key = value` lines, also written to disk by most
    /// commands.
    pub summary: String,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Ok => exit::SUCCESS,
            Status::Diverged { .. } => exit::DIVERGED,
            Status::InvariantFailure(_) => exit::INVARIANT,
        }
    }
}

/// Exit code for an error that aborted a command.
pub fn error_exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. }
        | Error::Invalid { .. }
        | Error::DimensionMismatch { .. }
        | Error::NonFinite { .. }
        | Error::WrongMode { .. }
        | Error::OpponentContract { .. } => exit::CONFIG,
        Error::Diverged { .. } => exit::DIVERGED,
        _ => exit::OTHER,
    }
}

/// Runs the configured dynamics. Divergence is returned as a partial
/// trajectory plus the step at which it happened.
pub fn run_dynamics(config: &ExperimentConfig) -> Result<(Trajectory, Option<usize>)> {
    let game = config.game()?;
    let result = match config.mode {
        Mode::AltVsOpponent => {
            let mut opponent = config.build_opponent(&game)?.ok_or_else(|| Error::Invalid {
                what: "config",
                reason: "alt_vs_opponent needs an opponent".into(),
            })?;
            rollout_vs_opponent(&game, opponent.as_mut(), config.iterations)
        }
        mode => rollout(&game, mode, config.iterations),
    };
    match result {
        Ok(traj) => Ok((traj, None)),
        Err(Error::Diverged { step, partial }) => Ok((*partial, Some(step))),
        Err(e) => Err(e),
    }
}

struct Summary(String);

impl Summary {
    fn new() -> Self {
        Self(String::new())
    }

    fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.0, "{key} = {value}");
    }
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes)?;
    files.push(path);
    Ok(())
}

fn certificate_summary(s: &mut Summary, cert: &BoundsCertificate) {
    s.kv("spectral_norm", cert.spectral_norm);
    s.kv("safety_margin", cert.safety_margin);
    s.kv("safe", cert.is_safe());
    s.kv("coupling", cert.coupling);
    s.kv("upper_rhs", cert.upper_rhs);
    s.kv("lower_rhs", cert.lower_rhs);
    s.kv("cap_x1_sq", cert.per_agent_caps.0);
    s.kv("cap_x2_sq", cert.per_agent_caps.1);
}

fn orbit_summary(s: &mut Summary, check: &OrbitCheck) {
    s.kv("bounds_vacuous", check.vacuous);
    s.kv("bounds_passed", check.all_passed());
    if let Some(f) = check.first_failure() {
        s.kv("bounds_first_failure", f.t);
    }
    if let Some(w) = check.half_state_max_weighted {
        s.kv("half_state_max_weighted_energy", w);
    }
}

fn recurrence_summary(s: &mut Summary, r: &RecurrenceReport) {
    s.kv("recurrence_epsilon", r.epsilon);
    s.kv("recurrence_returns", r.return_times.len());
    if let Some(first) = r.return_times.first() {
        s.kv("recurrence_first_return", first);
    }
    s.kv("recurrence_min_distance", r.min_distance_seen);
}

/// Largest `|P_t − P_0|` over `Full` states, relative to `W_0 + |P_0|`.
pub fn max_energy_drift(traj: &Trajectory) -> Result<f64> {
    let game = &traj.game;
    let p0 = perturbed_energy(game, &game.initial)?;
    let scale = weighted_energy(game, &game.initial)? + p0.abs();
    let mut worst: f64 = 0.0;
    for s in traj.full_states() {
        let drift = (perturbed_energy(game, s)? - p0).abs();
        worst = worst.max(if scale > 0.0 { drift / scale } else { drift });
    }
    Ok(worst)
}

/// Rollout plus persistence: `trajectory.csv`, `metrics.csv`, `report.txt`.
pub fn simulate(config: &ExperimentConfig) -> Result<Outcome> {
    let (traj, diverged) = run_dynamics(config)?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();

    let mut buf = Vec::new();
    csv::write_trajectory_csv(&traj, &mut buf)?;
    write_file(dir, "trajectory.csv", &buf, &mut files)?;

    let comparator = config.comparator_or_zero();
    let rows = csv::compute_metrics(&traj, &comparator)?;
    let mut buf = Vec::new();
    csv::write_metrics_csv(&rows, &mut buf)?;
    write_file(dir, "metrics.csv", &buf, &mut files)?;

    let mut s = Summary::new();
    s.kv("mode", config.mode);
    s.kv("iterations", config.iterations);
    s.kv("completed_rounds", traj.horizon());
    match diverged {
        Some(step) => s.kv("status", format!("diverged at step {step}")),
        None => s.kv("status", "ok"),
    }
    s.kv("comparator", fmt_vec(&comparator));
    if let Some(last) = rows.last() {
        s.kv("final_cum_utility", last.cum_utility);
        s.kv("final_regret", last.regret_vs_comparator);
    }
    let game = &traj.game;
    match stepsize_safety(game) {
        Ok(cert) => {
            certificate_summary(&mut s, &cert);
            if traj.mode == Mode::Alt {
                orbit_summary(&mut s, &check_orbit_bounds(&traj, &cert)?);
            }
        }
        Err(e) => s.kv("spectral_norm_error", e),
    }
    if matches!(traj.mode, Mode::Alt) {
        s.kv("perturbed_energy_max_rel_drift", max_energy_drift(&traj)?);
        let eps = config.epsilon.unwrap_or_else(|| default_recurrence_epsilon(game));
        if eps > 0.0 {
            recurrence_summary(&mut s, &recurrence_scan(&traj, eps)?);
        }
    }
    write_file(dir, "report.txt", s.0.as_bytes(), &mut files)?;

    Ok(Outcome {
        status: diverged.map_or(Status::Ok, |step| Status::Diverged { step }),
        files,
        summary: s.0,
    })
}

fn require_alternating_config(config: &ExperimentConfig, command: &str) -> Result<()> {
    if matches!(config.mode, Mode::Alt | Mode::AltVsOpponent) {
        Ok(())
    } else {
        Err(Error::WrongMode {
            expected: "alt or alt_vs_opponent",
            found: format!("{} (for `{command}`)", config.mode),
        })
    }
}

fn finish_or_diverged(diverged: Option<usize>, failure: Option<String>) -> Status {
    match (diverged, failure) {
        (Some(step), _) => Status::Diverged { step },
        (None, Some(msg)) => Status::InvariantFailure(msg),
        (None, None) => Status::Ok,
    }
}

/// Regret of agent 1 against `fixed` at every horizon: `regret.csv` with the
/// summed form, the closed form and the bound.
pub fn regret(config: &ExperimentConfig, fixed: &[f64]) -> Result<Outcome> {
    require_alternating_config(config, "regret")?;
    let (traj, diverged) = run_dynamics(config)?;
    let game = &traj.game;
    if fixed.len() != game.k1() {
        return Err(Error::DimensionMismatch {
            what: "fixed strategy",
            expected: game.k1(),
            found: fixed.len(),
        });
    }
    let summed = regret_series(&traj, fixed, Play::Alternating)?;
    let bound = regret_bound(&game.steps, fixed, &game.initial.x1)?;
    let first = &game.initial.x1;

    let mut rows = Vec::with_capacity(summed.len());
    let mut failure = None;
    let mut last_report = None;
    for (s, &sum) in traj.full_states().zip(&summed) {
        let closed = regret_alt_closed_form(&game.steps, fixed, first, &s.x1)?;
        let report = RegretReport {
            fixed_strategy: fixed.to_vec(),
            summed_regret: sum,
            closed_form_regret: closed,
            bound,
            horizon: s.t,
            scale: regret_scale(&game.steps, fixed, first, &s.x1),
        };
        if failure.is_none() && !(report.forms_agree() && report.within_bound()) {
            failure = Some(format!(
                "regret check failed at t = {}: summed {sum}, closed form {closed}, bound {bound}",
                s.t
            ));
        }
        rows.push(vec![
            s.t.to_string(),
            sum.to_string(),
            closed.to_string(),
            bound.to_string(),
        ]);
        last_report = Some(report);
    }

    fs::create_dir_all(&config.output_dir)?;
    let mut files = Vec::new();
    let mut buf = Vec::new();
    csv::write_table(&mut buf, "t,summed_regret,closed_form_regret,bound", &rows)?;
    write_file(&config.output_dir, "regret.csv", &buf, &mut files)?;

    let mut s = Summary::new();
    s.kv("fixed_strategy", fmt_vec(fixed));
    if let Some(r) = &last_report {
        s.kv("horizon", r.horizon);
        s.kv("summed_regret", r.summed_regret);
        s.kv("closed_form_regret", r.closed_form_regret);
        s.kv("bound", r.bound);
    }
    s.kv("checks_passed", failure.is_none());
    Ok(Outcome {
        status: finish_or_diverged(diverged, failure),
        files,
        summary: s.0,
    })
}

/// Per-round energy identities and perturbed-energy drift: `invariants.csv`.
///
/// The agent-2 identity and energy conservation apply only when agent 2 plays
/// Stage 2; their columns stay empty otherwise.
pub fn invariants(config: &ExperimentConfig) -> Result<Outcome> {
    require_alternating_config(config, "invariants")?;
    let (traj, diverged) = run_dynamics(config)?;
    let game = &traj.game;
    let both_alternate =
        config.mode == Mode::Alt || matches!(config.opponent, Some(OpponentSpec::Stage2));

    let p0 = perturbed_energy(game, &game.initial)?;
    let energy_scale = weighted_energy(game, &game.initial)? + p0.abs();

    let mut rows = Vec::new();
    let mut failure = None;
    let mut worst1: f64 = 0.0;
    let mut worst2: f64 = 0.0;
    let mut worst_drift: f64 = 0.0;
    let updates1: Vec<(&JointState, &JointState)> = traj.agent1_updates().collect();
    let updates2: Vec<(&JointState, &JointState)> = traj.agent2_updates().collect();
    for (round, (before, half)) in updates1.iter().enumerate() {
        let a1 = energy_delta_agent1(game, before, half)?;
        worst1 = worst1.max(a1.relative_residual());
        let mut row = vec![
            round.to_string(),
            a1.lhs.to_string(),
            a1.rhs.to_string(),
            a1.relative_residual().to_string(),
        ];
        if !a1.holds() && failure.is_none() {
            failure = Some(format!("agent 1 identity fails in round {round}"));
        }
        match updates2.get(round) {
            Some((h, after)) if both_alternate => {
                let a2 = energy_delta_agent2(game, h, after)?;
                worst2 = worst2.max(a2.relative_residual());
                let p = perturbed_energy(game, after)?;
                let drift = (p - p0).abs() / energy_scale.max(f64::MIN_POSITIVE);
                worst_drift = worst_drift.max(drift);
                if !a2.holds() && failure.is_none() {
                    failure = Some(format!("agent 2 identity fails in round {round}"));
                }
                if drift > ENERGY_DRIFT_RTOL && failure.is_none() {
                    failure = Some(format!("perturbed energy drifts by {drift} in round {round}"));
                }
                row.extend([
                    a2.lhs.to_string(),
                    a2.rhs.to_string(),
                    a2.relative_residual().to_string(),
                    p.to_string(),
                    drift.to_string(),
                ]);
            }
            _ => row.extend(std::iter::repeat_n(String::new(), 5)),
        }
        rows.push(row);
    }

    fs::create_dir_all(&config.output_dir)?;
    let mut files = Vec::new();
    let mut buf = Vec::new();
    csv::write_table(
        &mut buf,
        "round,agent1_lhs,agent1_rhs,agent1_rel_residual,agent2_lhs,agent2_rhs,agent2_rel_residual,perturbed_energy,perturbed_rel_drift",
        &rows,
    )?;
    write_file(&config.output_dir, "invariants.csv", &buf, &mut files)?;

    let mut s = Summary::new();
    s.kv("rounds", updates1.len());
    s.kv("agent1_max_rel_residual", worst1);
    if both_alternate {
        s.kv("agent2_max_rel_residual", worst2);
        s.kv("perturbed_energy_initial", p0);
        s.kv("perturbed_energy_max_rel_drift", worst_drift);
    }
    s.kv("checks_passed", failure.is_none());
    Ok(Outcome {
        status: finish_or_diverged(diverged, failure),
        files,
        summary: s.0,
    })
}

/// Bound certificate and the per-round orbit check: `bounds.csv`,
/// `bounds.txt`. Failures count only under strictly safe step sizes.
pub fn bounds(config: &ExperimentConfig) -> Result<Outcome> {
    if config.mode != Mode::Alt {
        return Err(Error::WrongMode {
            expected: "alt",
            found: format!("{} (for `bounds`)", config.mode),
        });
    }
    let (traj, diverged) = run_dynamics(config)?;
    let cert = stepsize_safety(&traj.game)?;
    let check = check_orbit_bounds(&traj, &cert)?;

    let rows: Vec<Vec<String>> = check
        .steps
        .iter()
        .map(|c| {
            vec![
                c.t.to_string(),
                c.weighted_energy.to_string(),
                c.upper_ok.to_string(),
                c.lower_ok.to_string(),
                c.cap1_ok.to_string(),
                c.cap2_ok.to_string(),
            ]
        })
        .collect();
    fs::create_dir_all(&config.output_dir)?;
    let mut files = Vec::new();
    let mut buf = Vec::new();
    csv::write_table(&mut buf, "t,weighted_energy,upper_ok,lower_ok,cap1_ok,cap2_ok", &rows)?;
    write_file(&config.output_dir, "bounds.csv", &buf, &mut files)?;

    let mut s = Summary::new();
    certificate_summary(&mut s, &cert);
    orbit_summary(&mut s, &check);
    if check.vacuous {
        s.kv("warning", "step sizes are not strictly safe; bounds carry no guarantee");
    }
    write_file(&config.output_dir, "bounds.txt", s.0.as_bytes(), &mut files)?;

    let failure = (!check.vacuous && !check.all_passed()).then(|| {
        format!(
            "orbit bound violated at t = {}",
            check.first_failure().map_or(0, |f| f.t)
        )
    });
    Ok(Outcome {
        status: finish_or_diverged(diverged, failure),
        files,
        summary: s.0,
    })
}

/// Return-time scan of the `Full` states: `recurrence.txt`, `recurrence.csv`.
pub fn recurrence(config: &ExperimentConfig, epsilon: Option<f64>) -> Result<Outcome> {
    if config.mode != Mode::Alt {
        return Err(Error::WrongMode {
            expected: "alt",
            found: format!("{} (for `recurrence`)", config.mode),
        });
    }
    let (traj, diverged) = run_dynamics(config)?;
    let eps = epsilon
        .or(config.epsilon)
        .unwrap_or_else(|| default_recurrence_epsilon(&traj.game));
    let report = recurrence_scan(&traj, eps)?;

    let start = &traj.game.initial;
    let rows: Vec<Vec<String>> = report
        .return_times
        .iter()
        .map(|&t| {
            let d = traj
                .full_states()
                .nth(t)
                .map_or(f64::NAN, |s| s.distance(start));
            vec![t.to_string(), d.to_string()]
        })
        .collect();
    fs::create_dir_all(&config.output_dir)?;
    let mut files = Vec::new();
    let mut buf = Vec::new();
    csv::write_table(&mut buf, "t,distance", &rows)?;
    write_file(&config.output_dir, "recurrence.csv", &buf, &mut files)?;

    let mut s = Summary::new();
    s.kv("horizon", report.horizon);
    recurrence_summary(&mut s, &report);
    write_file(&config.output_dir, "recurrence.txt", s.0.as_bytes(), &mut files)?;
    Ok(Outcome {
        status: finish_or_diverged(diverged, None),
        files,
        summary: s.0,
    })
}

/// Reads `x1,x2` pairs, one per non-empty line.
pub fn parse_cloud(text: &str) -> Result<Vec<Point2>> {
    let mut pts = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let v = config::parse_vector(content).map_err(|message| Error::Parse {
            line: idx + 1,
            message,
        })?;
        if v.len() != 2 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected 2 coordinates, got {}", v.len()),
            });
        }
        pts.push([v[0], v[1]]);
    }
    Ok(pts)
}

/// Hull area of a point cloud after every round: `volume.csv`.
pub fn volume(config: &ExperimentConfig, cloud: &[Point2]) -> Result<Outcome> {
    let game: GameInstance = config.game()?;
    let areas = volume_track(&game, cloud, config.mode, config.iterations)?;
    let rows: Vec<Vec<String>> = areas
        .iter()
        .enumerate()
        .map(|(t, h)| vec![t.to_string(), h.area.to_string(), h.degenerate.to_string()])
        .collect();
    fs::create_dir_all(&config.output_dir)?;
    let mut files = Vec::new();
    let mut buf = Vec::new();
    csv::write_table(&mut buf, "step,area,degenerate", &rows)?;
    write_file(&config.output_dir, "volume.csv", &buf, &mut files)?;

    let mut s = Summary::new();
    s.kv("mode", config.mode);
    s.kv("points", cloud.len());
    if let (Some(first), Some(last)) = (areas.first(), areas.last()) {
        s.kv("initial_area", first.area);
        s.kv("final_area", last.area);
        if first.area > 0.0 {
            s.kv("area_ratio", last.area / first.area);
        }
    }
    Ok(Outcome {
        status: Status::Ok,
        files,
        summary: s.0,
    })
}

/// Runs `simulate` on every config with up to `jobs` worker threads. Results
/// come back in input order.
pub fn batch(configs: &[ExperimentConfig], jobs: usize) -> Result<Vec<Result<Outcome>>> {
    let mut dirs: Vec<&Path> = configs.iter().map(|c| c.output_dir.as_path()).collect();
    dirs.sort();
    if let Some(w) = dirs.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Invalid {
            what: "batch",
            reason: format!("output_dir {} is shared by several configs", w[0].display()),
        });
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<Outcome>>>> =
        Mutex::new((0..configs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.max(1).min(configs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(config) = configs.get(i) else { break };
                let outcome = simulate(config);
                results.lock().expect("no worker panics while holding the lock")[i] = Some(outcome);
            });
        }
    });
    Ok(results
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every index visited"))
        .collect())
}
