//! Step-size safety, orbit bounds, Jacobian volume checks and recurrence.
//!
//! With `c = √(η1 η2) ‖A‖ / 2`, `W = ‖x1‖²/η1 + ‖x2‖²/η2` and the conserved
//! perturbed energy `P`, alternating play satisfies at every round
//!
//! ```text
//! (1 − c) W_t ≤ P_0                (upper)
//! (1 + c) W_t ≥ (1 − c) W_0        (lower, needs c ≤ 1)
//! ‖x1^t‖² ≤ P_0 / (1/η1 − √(η2/η1) ‖A‖/2)
//! ‖x2^t‖² ≤ P_0 / (1/η2 − √(η1/η2) ‖A‖/2)
//! ```
//!
//! The bounds are informative only for `c < 1`; `c = 1` makes the upper bound
//! vacuous and is treated as unsafe.

use crate::dynamics::{alt_gd_step, sim_gd_step, Mode, Trajectory};
use crate::error::{Error, Result};
use crate::game::{payoff, GameInstance, JointState, StepSizes};
use crate::metrics::weighted_energy;
use crate::numerics::{hull_area_2d, spectral_norm_default, HullArea, Point2, SquareMatrix};

/// Relative slack on bound comparisons, scaled by the initial energies.
pub const BOUND_SLACK: f64 = 1e-12;

/// Tolerance for classifying `a² − 4/(η1η2)` as zero.
pub const CONIC_TOL: f64 = 1e-12;

/// Default recurrence radius as a fraction of the initial state norm.
pub const DEFAULT_RECURRENCE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsCertificate {
    pub spectral_norm: f64,
    /// `2/‖A‖ − √(η1η2)`; infinite when `A = 0`.
    pub safety_margin: f64,
    /// `c = √(η1η2)‖A‖/2`.
    pub coupling: f64,
    /// `P_0 = W_0 + ⟨x1^0, A x2^0⟩`.
    pub upper_rhs: f64,
    /// `(1 − c) W_0`.
    pub lower_rhs: f64,
    /// Caps on `‖x1‖²` and `‖x2‖²`; infinite when vacuous.
    pub per_agent_caps: (f64, f64),
    /// `W_0`, kept for scaling tolerances.
    pub initial_weighted_energy: f64,
}

impl BoundsCertificate {
    /// Strictly inside the safe region; the boundary is not safe.
    pub fn is_safe(&self) -> bool {
        self.coupling < 1.0
    }
}

/// Computes `‖A‖` and every bound constant for the game's initial condition.
pub fn stepsize_safety(game: &GameInstance) -> Result<BoundsCertificate> {
    let norm = spectral_norm_default(&game.matrix)?;
    let eta1 = game.steps.eta1();
    let eta2 = game.steps.eta2();
    let root = game.steps.geometric_mean();
    let coupling = root * norm / 2.0;
    let safety_margin = if norm == 0.0 {
        f64::INFINITY
    } else {
        2.0 / norm - root
    };

    let w0 = weighted_energy(game, &game.initial)?;
    let upper_rhs = w0 + payoff(game, &game.initial)?;
    let lower_rhs = (1.0 - coupling) * w0;

    let safe = coupling < 1.0;
    let cap = |own: f64, other: f64| {
        let denom = 1.0 / own - (other / own).sqrt() * norm / 2.0;
        if safe && denom > 0.0 {
            upper_rhs / denom
        } else {
            f64::INFINITY
        }
    };
    Ok(BoundsCertificate {
        spectral_norm: norm,
        safety_margin,
        coupling,
        upper_rhs,
        lower_rhs,
        per_agent_caps: (cap(eta1, eta2), cap(eta2, eta1)),
        initial_weighted_energy: w0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConicKind {
    Ellipse,
    Parabola,
    Hyperbola,
}

/// Shape of the level set `x1²/η1 + x2²/η2 + a x1 x2 = const` holding a 1-D
/// alternating orbit, from the sign of `a² − 4/(η1η2)`.
pub fn conic_classify_1d(a: f64, steps: &StepSizes) -> ConicKind {
    let limit = 4.0 / (steps.eta1() * steps.eta2());
    let disc = a * a - limit;
    if disc.abs() <= CONIC_TOL * limit.max(a * a) {
        ConicKind::Parabola
    } else if disc < 0.0 {
        ConicKind::Ellipse
    } else {
        ConicKind::Hyperbola
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitStepCheck {
    pub t: usize,
    pub weighted_energy: f64,
    pub upper_ok: bool,
    pub lower_ok: bool,
    pub cap1_ok: bool,
    pub cap2_ok: bool,
}

impl OrbitStepCheck {
    pub fn passed(&self) -> bool {
        self.upper_ok && self.lower_ok && self.cap1_ok && self.cap2_ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitCheck {
    pub steps: Vec<OrbitStepCheck>,
    /// Set when the step sizes are not strictly safe; the checks still run but
    /// carry no guarantee.
    pub vacuous: bool,
    /// Largest `W` seen on the half-iterates, which have no certified bound.
    pub half_state_max_weighted: Option<f64>,
}

impl OrbitCheck {
    pub fn all_passed(&self) -> bool {
        self.steps.iter().all(OrbitStepCheck::passed)
    }

    pub fn first_failure(&self) -> Option<&OrbitStepCheck> {
        self.steps.iter().find(|s| !s.passed())
    }
}

/// Checks every `Full` state of an alternating trajectory against the bounds
/// in `cert`.
pub fn check_orbit_bounds(traj: &Trajectory, cert: &BoundsCertificate) -> Result<OrbitCheck> {
    if traj.mode != Mode::Alt {
        return Err(Error::WrongMode {
            expected: "alt",
            found: traj.mode.to_string(),
        });
    }
    let game = &traj.game;
    let c = cert.coupling;
    let slack = BOUND_SLACK * (cert.upper_rhs.abs() + cert.initial_weighted_energy);
    let (cap1, cap2) = cert.per_agent_caps;

    let steps = traj
        .full_states()
        .map(|s| {
            let w = weighted_energy(game, s)?;
            let n1: f64 = s.x1.iter().map(|v| v * v).sum();
            let n2: f64 = s.x2.iter().map(|v| v * v).sum();
            Ok(OrbitStepCheck {
                t: s.t,
                weighted_energy: w,
                upper_ok: (1.0 - c) * w <= cert.upper_rhs + slack,
                lower_ok: (1.0 + c) * w >= cert.lower_rhs - slack,
                cap1_ok: n1 <= cap1 * (1.0 + BOUND_SLACK) + slack,
                cap2_ok: n2 <= cap2 * (1.0 + BOUND_SLACK) + slack,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let half_state_max_weighted = traj
        .half_states()
        .map(|s| weighted_energy(game, s))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .reduce(f64::max);

    Ok(OrbitCheck {
        steps,
        vacuous: !cert.is_safe(),
        half_state_max_weighted,
    })
}

/// Unit block-triangular matrix with `scale·A` in the upper-right block or
/// `scale·Aᵀ` in the lower-left block.
fn block_unit_triangular(
    game: &GameInstance,
    upper: bool,
    scale: f64,
) -> Result<SquareMatrix> {
    let (k1, k2) = (game.k1(), game.k2());
    let mut m = SquareMatrix::identity(k1 + k2)?;
    for i in 0..k1 {
        for j in 0..k2 {
            let a = game.matrix.get(i, j);
            if upper {
                m.set(i, k1 + j, scale * a);
            } else {
                m.set(k1 + j, i, scale * a);
            }
        }
    }
    Ok(m)
}

/// Jacobian of Stage 1: `[[I, η1 A], [0, I]]`.
pub fn jacobian_stage1(game: &GameInstance) -> Result<SquareMatrix> {
    block_unit_triangular(game, true, game.steps.eta1())
}

/// Jacobian of Stage 2: `[[I, 0], [−η2 Aᵀ, I]]`.
pub fn jacobian_stage2(game: &GameInstance) -> Result<SquareMatrix> {
    block_unit_triangular(game, false, -game.steps.eta2())
}

/// Jacobian of one alternating round, `J2 · J1`.
pub fn jacobian_altgd(game: &GameInstance) -> Result<SquareMatrix> {
    jacobian_stage2(game)?.matmul(&jacobian_stage1(game)?)
}

/// Jacobian of one simultaneous round: `[[I, η1 A], [−η2 Aᵀ, I]]`.
pub fn jacobian_simgd(game: &GameInstance) -> Result<SquareMatrix> {
    let mut m = jacobian_stage1(game)?;
    let k1 = game.k1();
    let eta2 = game.steps.eta2();
    for i in 0..k1 {
        for j in 0..game.k2() {
            m.set(k1 + j, i, -eta2 * game.matrix.get(i, j));
        }
    }
    Ok(m)
}

fn require_planar(game: &GameInstance) -> Result<()> {
    if game.k1() == 1 && game.k2() == 1 {
        Ok(())
    } else {
        Err(Error::Invalid {
            what: "game",
            reason: format!(
                "requires one strategy dimension per agent, got {}x{}",
                game.k1(),
                game.k2()
            ),
        })
    }
}

/// Pushes every cloud point through `n_steps` rounds of `mode` (alt or sim)
/// and records the hull area before the first and after every round.
pub fn volume_track(
    game: &GameInstance,
    cloud: &[Point2],
    mode: Mode,
    n_steps: usize,
) -> Result<Vec<HullArea>> {
    Ok(cloud_snapshots(game, cloud, mode, n_steps)?
        .iter()
        .map(|pts| hull_area_2d(pts))
        .collect())
}

/// The cloud after `0, 1, …, n_steps` rounds.
pub fn cloud_snapshots(
    game: &GameInstance,
    cloud: &[Point2],
    mode: Mode,
    n_steps: usize,
) -> Result<Vec<Vec<Point2>>> {
    require_planar(game)?;
    let step = match mode {
        Mode::Alt => alt_gd_step,
        Mode::Sim => sim_gd_step,
        other => {
            return Err(Error::WrongMode {
                expected: "alt or sim",
                found: other.to_string(),
            })
        }
    };
    let mut states: Vec<JointState> = cloud
        .iter()
        .map(|p| JointState::initial(vec![p[0]], vec![p[1]]))
        .collect();
    let snapshot = |states: &[JointState]| -> Vec<Point2> {
        states.iter().map(|s| [s.x1[0], s.x2[0]]).collect()
    };
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(snapshot(&states));
    for _ in 0..n_steps {
        states = states
            .iter()
            .map(|s| step(game, s))
            .collect::<Result<_>>()?;
        out.push(snapshot(&states));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceReport {
    pub epsilon: f64,
    /// Rounds `t ≥ 1` whose `Full` state lies within `epsilon` of the start.
    pub return_times: Vec<usize>,
    /// Smallest distance to the start over `t ≥ 1`; infinite for `T = 0`.
    pub min_distance_seen: f64,
    pub horizon: usize,
}

/// `epsilon` defaulting to 1% of the initial state norm.
pub fn default_recurrence_epsilon(game: &GameInstance) -> f64 {
    DEFAULT_RECURRENCE_FRACTION * game.initial.norm_sq().sqrt()
}

/// Scans an alternating trajectory for returns near its initial state.
pub fn recurrence_scan(traj: &Trajectory, epsilon: f64) -> Result<RecurrenceReport> {
    if traj.mode != Mode::Alt {
        return Err(Error::WrongMode {
            expected: "alt",
            found: traj.mode.to_string(),
        });
    }
    if !(epsilon > 0.0) {
        return Err(Error::Invalid {
            what: "epsilon",
            reason: format!("must be positive, got {epsilon}"),
        });
    }
    let start = &traj.game.initial;
    let mut return_times = Vec::new();
    let mut min_distance_seen = f64::INFINITY;
    for s in traj.full_states().skip(1) {
        let d = s.distance(start);
        min_distance_seen = min_distance_seen.min(d);
        if d < epsilon {
            return_times.push(s.t);
        }
    }
    Ok(RecurrenceReport {
        epsilon,
        return_times,
        min_distance_seen,
        horizon: traj.horizon(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationAngle {
    pub theta: f64,
    /// The map sits on the parabolic boundary (`trace = ±2`).
    pub degenerate: bool,
}

/// Rotation angle `arccos(trace/2)` of the 2×2 alternating map of a 1-D game.
pub fn rotation_angle_2d(game: &GameInstance) -> Result<RotationAngle> {
    require_planar(game)?;
    let a = game.matrix.get(0, 0);
    let trace = jacobian_altgd(game)?.trace();
    match conic_classify_1d(a, &game.steps) {
        ConicKind::Hyperbola => Err(Error::NotElliptic { trace }),
        ConicKind::Parabola => Ok(RotationAngle {
            theta: (trace / 2.0).clamp(-1.0, 1.0).acos(),
            degenerate: true,
        }),
        ConicKind::Ellipse => Ok(RotationAngle {
            theta: (trace / 2.0).acos(),
            degenerate: trace.abs() >= 2.0,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::rollout;
    use crate::game::PayoffMatrix;
    use crate::numerics::det;

    fn scalar_game(a: f64, eta1: f64, eta2: f64, x1: f64, x2: f64) -> GameInstance {
        GameInstance::new(
            PayoffMatrix::scalar(a).unwrap(),
            StepSizes::new(eta1, eta2).unwrap(),
            vec![x1],
            vec![x2],
        )
        .unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn safety_margin_examples() {
        let cert = stepsize_safety(&scalar_game(1.0, 0.5, 0.5, 35.0, 35.0)).unwrap();
        assert!(close(cert.safety_margin, 1.5, 1e-9));
        assert!(cert.is_safe());
        let cert = stepsize_safety(&scalar_game(1.0, 4.0, 4.0, 1.0, 0.0)).unwrap();
        assert!(close(cert.safety_margin, -2.0, 1e-9));
        assert!(!cert.is_safe());
        assert_eq!(cert.per_agent_caps, (f64::INFINITY, f64::INFINITY));
        let cert = stepsize_safety(&scalar_game(1.0, 2.0, 2.0, 1.0, 0.0)).unwrap();
        assert!(cert.safety_margin.abs() < 1e-9);
        assert!(!cert.is_safe());
    }

    #[test]
    fn fig1_bound_constants() {
        let cert = stepsize_safety(&scalar_game(1.0, 0.5, 0.5, 35.0, 35.0)).unwrap();
        assert_eq!(cert.upper_rhs, 6125.0);
        assert!(close(cert.coupling, 0.25, 1e-12));
        // (1 − 0.25)·W ≤ 6125 with W = 2‖x‖² gives ‖x‖² ≤ 4083.33…
        assert!(close(cert.upper_rhs / (0.75 * 2.0), 4083.333333333333, 1e-12));
        // (1 + 0.25)·2‖x‖² ≥ 0.75·4900 gives ‖x‖² ≥ 1470.
        assert!(close(cert.lower_rhs / (1.25 * 2.0), 1470.0, 1e-12));
        // 6125 / (1/η1 − √(η2/η1)·‖A‖/2) = 6125 / 1.5.
        assert!(close(cert.per_agent_caps.0, 6125.0 / 1.5, 1e-12));
        assert!(close(cert.per_agent_caps.1, 6125.0 / 1.5, 1e-12));
    }

    #[test]
    fn fig1_orbit_satisfies_bounds() {
        let g = scalar_game(1.0, 0.5, 0.5, 35.0, 35.0);
        let cert = stepsize_safety(&g).unwrap();
        let traj = rollout(&g, Mode::Alt, 125).unwrap();
        let check = check_orbit_bounds(&traj, &cert).unwrap();
        assert!(!check.vacuous);
        assert!(check.all_passed(), "{:?}", check.first_failure());
        assert_eq!(check.steps.len(), 126);
        for s in traj.full_states() {
            let r = s.norm_sq();
            assert!((1470.0..=4083.34).contains(&r), "t={} r={r}", s.t);
            assert!(s.x1[0] * s.x1[0] <= 3500.0);
        }
        assert!(check.half_state_max_weighted.unwrap().is_finite());
    }

    #[test]
    fn orbit_check_flags_unsafe_and_wrong_mode() {
        let g = scalar_game(1.0, 2.5, 2.5, 1.0, 0.0);
        let cert = stepsize_safety(&g).unwrap();
        let traj = rollout(&g, Mode::Alt, 10).unwrap();
        assert!(check_orbit_bounds(&traj, &cert).unwrap().vacuous);
        let sim = rollout(&g, Mode::Sim, 3).unwrap();
        assert!(check_orbit_bounds(&sim, &cert).is_err());
    }

    #[test]
    fn conic_examples() {
        let s = |e: f64| StepSizes::new(e, e).unwrap();
        assert_eq!(conic_classify_1d(1.0, &s(0.5)), ConicKind::Ellipse);
        assert_eq!(conic_classify_1d(1.0, &s(2.0)), ConicKind::Parabola);
        assert_eq!(conic_classify_1d(1.0, &s(4.0)), ConicKind::Hyperbola);
        assert_eq!(conic_classify_1d(-1.0, &s(4.0)), ConicKind::Hyperbola);
        assert_eq!(conic_classify_1d(0.0, &s(100.0)), ConicKind::Ellipse);
    }

    #[test]
    fn jacobian_examples() {
        let g = scalar_game(1.0, 0.5, 0.5, 0.0, 0.0);
        let alt = jacobian_altgd(&g).unwrap();
        assert_eq!(alt.entries(), &[1.0, 0.5, -0.5, 0.75]);
        assert_eq!(det(&alt), 1.0);
        let sim = jacobian_simgd(&g).unwrap();
        assert_eq!(sim.entries(), &[1.0, 0.5, -0.5, 1.0]);
        assert_eq!(det(&sim), 1.25);
    }

    #[test]
    fn jacobian_matches_the_update_map() {
        let a = PayoffMatrix::from_rows(&[vec![0.5, -1.0, 2.0], vec![1.5, 0.25, -0.75]]).unwrap();
        let g = GameInstance::new(
            a,
            StepSizes::new(0.3, 0.7).unwrap(),
            vec![1.0, -2.0],
            vec![0.5, 3.0, -1.0],
        )
        .unwrap();
        let flat: Vec<f64> = g.initial.x1.iter().chain(&g.initial.x2).copied().collect();
        for (jac, step) in [
            (jacobian_altgd(&g).unwrap(), alt_gd_step as fn(&_, &_) -> _),
            (jacobian_simgd(&g).unwrap(), sim_gd_step),
        ] {
            let next = step(&g, &g.initial).unwrap();
            let mapped = jac.apply(&flat).unwrap();
            let expected: Vec<f64> = next.x1.iter().chain(&next.x2).copied().collect();
            for (m, e) in mapped.iter().zip(&expected) {
                assert!((m - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn volume_track_examples() {
        let square = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let g = scalar_game(1.0, 0.5, 0.5, 0.0, 0.0);
        let alt = volume_track(&g, &square, Mode::Alt, 20).unwrap();
        assert_eq!(alt.len(), 21);
        assert!(alt.iter().all(|h| close(h.area, 1.0, 1e-9)));
        let sim = volume_track(&g, &square, Mode::Sim, 20).unwrap();
        for (t, h) in sim.iter().enumerate() {
            assert!(close(h.area, 1.25_f64.powi(t as i32), 1e-9));
        }
        let line = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]];
        let flat = volume_track(&g, &line, Mode::Alt, 10).unwrap();
        assert!(flat.iter().all(|h| h.area == 0.0 && h.degenerate));
        assert!(volume_track(&g, &square, Mode::Continuous, 1).is_err());
    }

    #[test]
    fn volume_track_rejects_higher_dimensions() {
        let a = PayoffMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let g = GameInstance::new(a, StepSizes::new(1.0, 1.0).unwrap(), vec![0.0], vec![0.0, 0.0])
            .unwrap();
        assert!(volume_track(&g, &[[0.0, 0.0]], Mode::Alt, 1).is_err());
    }

    #[test]
    fn rotation_angle_examples() {
        let r = rotation_angle_2d(&scalar_game(1.0, 0.5, 0.5, 0.0, 0.0)).unwrap();
        assert!(close(r.theta, 0.875_f64.acos(), 1e-15));
        assert!(close(r.theta, 0.50536, 1e-5));
        assert!(!r.degenerate);

        let eta = 1e-4;
        let r = rotation_angle_2d(&scalar_game(1.0, eta, eta, 0.0, 0.0)).unwrap();
        assert!(close(r.theta, eta, 1e-6));

        let r = rotation_angle_2d(&scalar_game(1.0, 2.0, 2.0, 0.0, 0.0)).unwrap();
        assert!(r.degenerate);
        assert!(close(r.theta, std::f64::consts::PI, 1e-12));

        assert!(matches!(
            rotation_angle_2d(&scalar_game(1.0, 4.0, 4.0, 0.0, 0.0)),
            Err(Error::NotElliptic { .. })
        ));
    }

    #[test]
    fn recurrence_at_origin_reports_every_round() {
        let g = scalar_game(1.0, 0.5, 0.5, 0.0, 0.0);
        let traj = rollout(&g, Mode::Alt, 30).unwrap();
        let report = recurrence_scan(&traj, 1e-6).unwrap();
        assert_eq!(report.return_times, (1..=30).collect::<Vec<_>>());
        assert_eq!(report.min_distance_seen, 0.0);
    }

    #[test]
    fn recurrence_absent_in_hyperbolic_regime() {
        let g = scalar_game(1.0, 4.0, 4.0, 1.0, 1.0);
        let traj = rollout(&g, Mode::Alt, 40).unwrap();
        let report = recurrence_scan(&traj, 0.01 * 2.0_f64.sqrt()).unwrap();
        assert!(report.return_times.is_empty());
        assert!(report.min_distance_seen > 1.0);
        let last = traj.last_full().distance(&g.initial);
        assert!(last > 1e20);
    }

    #[test]
    fn recurrence_rejects_bad_inputs() {
        let g = scalar_game(1.0, 0.5, 0.5, 1.0, 1.0);
        let traj = rollout(&g, Mode::Alt, 3).unwrap();
        assert!(recurrence_scan(&traj, 0.0).is_err());
        let sim = rollout(&g, Mode::Sim, 3).unwrap();
        assert!(recurrence_scan(&sim, 1.0).is_err());
    }
}
