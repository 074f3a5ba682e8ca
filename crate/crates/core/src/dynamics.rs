//! Update rules and trajectory rollout.
//!
//! Alternating play is built from two stages: agent 1 moves against the
//! current `x2` (Stage 1, producing a `Half` state), then agent 2 moves
//! against the freshly updated `x1` (Stage 2). Both stages are recorded so
//! the half-iterate sequence `(x1^{t+1}, x2^t)` is available without
//! recomputation.

use std::fmt;
use std::str::FromStr;

use crate::error::{check_finite, check_len, Error, Result};
use crate::game::{GameInstance, JointState, Stage};
use crate::numerics::{mat_tvec, mat_vec};

/// Any component above this magnitude aborts a rollout.
pub const DIVERGENCE_THRESHOLD: f64 = 1e300;

/// Substep used by the reference integrator when none is given.
pub const DEFAULT_REFERENCE_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Alt,
    Sim,
    Continuous,
    AltVsOpponent,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Alt => "alt",
            Mode::Sim => "sim",
            Mode::Continuous => "continuous",
            Mode::AltVsOpponent => "alt_vs_opponent",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "alt" => Ok(Mode::Alt),
            "sim" => Ok(Mode::Sim),
            "continuous" => Ok(Mode::Continuous),
            "alt_vs_opponent" => Ok(Mode::AltVsOpponent),
            other => Err(format!(
                "unknown mode {other:?} (expected alt, sim, continuous or alt_vs_opponent)"
            )),
        }
    }
}

/// Time-ordered states of one run.
///
/// `states[0]` is the game's initial state. In the alternating modes every
/// round contributes a `Half` state followed by a `Full` state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub game: GameInstance,
    pub mode: Mode,
    pub states: Vec<JointState>,
    /// Continuous time between consecutive `Full` states (1 for the discrete
    /// modes).
    pub time_step: f64,
}

impl Trajectory {
    fn start(game: &GameInstance, mode: Mode, capacity: usize) -> Self {
        let mut states = Vec::with_capacity(capacity);
        states.push(game.initial.clone());
        Self {
            game: game.clone(),
            mode,
            states,
            time_step: 1.0,
        }
    }

    pub fn full_states(&self) -> impl Iterator<Item = &JointState> + '_ {
        self.states.iter().filter(|s| s.stage == Stage::Full)
    }

    pub fn half_states(&self) -> impl Iterator<Item = &JointState> + '_ {
        self.states.iter().filter(|s| s.stage == Stage::Half)
    }

    pub fn has_half_states(&self) -> bool {
        self.states.iter().any(|s| s.stage == Stage::Half)
    }

    /// Number of completed rounds.
    pub fn horizon(&self) -> usize {
        self.full_states().count() - 1
    }

    pub fn last_full(&self) -> &JointState {
        self.full_states().last().expect("initial state is always present")
    }

    /// `(x_t, x_{t+1/2})` pairs, one per completed agent-1 update.
    pub fn agent1_updates(&self) -> impl Iterator<Item = (&JointState, &JointState)> + '_ {
        self.states
            .windows(2)
            .filter(|w| w[0].stage == Stage::Full && w[1].stage == Stage::Half)
            .map(|w| (&w[0], &w[1]))
    }

    /// `(x_{t+1/2}, x_{t+1})` pairs, one per completed agent-2 update.
    pub fn agent2_updates(&self) -> impl Iterator<Item = (&JointState, &JointState)> + '_ {
        self.states
            .windows(2)
            .filter(|w| w[0].stage == Stage::Half && w[1].stage == Stage::Full)
            .map(|w| (&w[0], &w[1]))
    }

    fn push_guarded(mut self, state: JointState) -> Result<Self> {
        let ok = state.is_finite() && state.max_abs() <= DIVERGENCE_THRESHOLD;
        let step = state.t + usize::from(state.stage == Stage::Half);
        if ok {
            self.states.push(state);
            Ok(self)
        } else {
            Err(Error::Diverged {
                step,
                partial: Box::new(self),
            })
        }
    }
}

fn plus_scaled(base: &[f64], scale: f64, grad: &[f64]) -> Vec<f64> {
    base.iter().zip(grad).map(|(b, g)| b + scale * g).collect()
}

fn minus_scaled(base: &[f64], scale: f64, grad: &[f64]) -> Vec<f64> {
    base.iter().zip(grad).map(|(b, g)| b - scale * g).collect()
}

/// One simultaneous round: both agents read the old state.
pub fn sim_gd_step(game: &GameInstance, s: &JointState) -> Result<JointState> {
    s.expect_stage(Stage::Full)?;
    let ax2 = mat_vec(&game.matrix, &s.x2)?;
    let atx1 = mat_tvec(&game.matrix, &s.x1)?;
    Ok(JointState::new(
        plus_scaled(&s.x1, game.steps.eta1(), &ax2),
        minus_scaled(&s.x2, game.steps.eta2(), &atx1),
        s.t + 1,
        Stage::Full,
    ))
}

/// Agent 1 ascends: `x1 ← x1 + η1 A x2`.
pub fn alt_gd_stage1(game: &GameInstance, s: &JointState) -> Result<JointState> {
    s.expect_stage(Stage::Full)?;
    check_len("x1", game.k1(), s.x1.len())?;
    let ax2 = mat_vec(&game.matrix, &s.x2)?;
    Ok(JointState::new(
        plus_scaled(&s.x1, game.steps.eta1(), &ax2),
        s.x2.clone(),
        s.t,
        Stage::Half,
    ))
}

/// Agent 2 descends against the updated `x1`: `x2 ← x2 − η2 Aᵀ x1`.
pub fn alt_gd_stage2(game: &GameInstance, s: &JointState) -> Result<JointState> {
    s.expect_stage(Stage::Half)?;
    check_len("x2", game.k2(), s.x2.len())?;
    let atx1 = mat_tvec(&game.matrix, &s.x1)?;
    Ok(JointState::new(
        s.x1.clone(),
        minus_scaled(&s.x2, game.steps.eta2(), &atx1),
        s.t + 1,
        Stage::Full,
    ))
}

/// One alternating round, Stage 2 after Stage 1.
pub fn alt_gd_step(game: &GameInstance, s: &JointState) -> Result<JointState> {
    alt_gd_stage2(game, &alt_gd_stage1(game, s)?)
}

/// Decides agent 2's next strategy after agent 1 has moved in `round`.
pub trait OpponentRule {
    fn respond(&mut self, round: usize, state: &JointState) -> Result<Vec<f64>>;
}

impl<F> OpponentRule for F
where
    F: FnMut(usize, &JointState) -> Vec<f64>,
{
    fn respond(&mut self, round: usize, state: &JointState) -> Result<Vec<f64>> {
        Ok(self(round, state))
    }
}

/// Agent 2 plays the alternating Stage 2 update.
#[derive(Debug, Clone)]
pub struct Stage2Opponent {
    game: GameInstance,
}

impl Stage2Opponent {
    pub fn new(game: &GameInstance) -> Self {
        Self { game: game.clone() }
    }
}

impl OpponentRule for Stage2Opponent {
    fn respond(&mut self, _round: usize, state: &JointState) -> Result<Vec<f64>> {
        alt_gd_stage2(&self.game, state).map(|s| s.x2)
    }
}

/// Agent 2 plays the same vector every round.
#[derive(Debug, Clone)]
pub struct ConstantOpponent(pub Vec<f64>);

impl OpponentRule for ConstantOpponent {
    fn respond(&mut self, _round: usize, _state: &JointState) -> Result<Vec<f64>> {
        Ok(self.0.clone())
    }
}

/// Agent 2 replays a fixed script, one vector per round.
#[derive(Debug, Clone)]
pub struct ScriptedOpponent {
    script: Vec<Vec<f64>>,
}

impl ScriptedOpponent {
    pub fn new(script: Vec<Vec<f64>>) -> Self {
        Self { script }
    }

    pub fn len(&self) -> usize {
        self.script.len()
    }

    pub fn is_empty(&self) -> bool {
        self.script.is_empty()
    }
}

impl OpponentRule for ScriptedOpponent {
    fn respond(&mut self, round: usize, _state: &JointState) -> Result<Vec<f64>> {
        self.script
            .get(round)
            .cloned()
            .ok_or_else(|| Error::OpponentContract {
                round,
                reason: format!("script has only {} entries", self.script.len()),
            })
    }
}

/// Runs `horizon` rounds of the given update rule from `game.initial`.
///
/// `Mode::Continuous` samples the reference integrator at integer times, so
/// sample `t` is comparable with round `t` of the discrete rules.
/// `Mode::AltVsOpponent` needs an opponent; use [`rollout_vs_opponent`].
pub fn rollout(game: &GameInstance, mode: Mode, horizon: usize) -> Result<Trajectory> {
    game.check_state(&game.initial)?;
    match mode {
        Mode::Alt => {
            let mut traj = Trajectory::start(game, mode, 2 * horizon + 1);
            for _ in 0..horizon {
                let half = alt_gd_stage1(game, traj.states.last().expect("non-empty"))?;
                traj = traj.push_guarded(half)?;
                let full = alt_gd_stage2(game, traj.states.last().expect("non-empty"))?;
                traj = traj.push_guarded(full)?;
            }
            Ok(traj)
        }
        Mode::Sim => {
            let mut traj = Trajectory::start(game, mode, horizon + 1);
            for _ in 0..horizon {
                let next = sim_gd_step(game, traj.states.last().expect("non-empty"))?;
                traj = traj.push_guarded(next)?;
            }
            Ok(traj)
        }
        Mode::Continuous => {
            let per_unit = (1.0 / DEFAULT_REFERENCE_STEP).round() as usize;
            integrate(game, horizon, per_unit, 1.0 / per_unit as f64)
        }
        Mode::AltVsOpponent => Err(Error::WrongMode {
            expected: "a self-contained update rule",
            found: mode.to_string(),
        }),
    }
}

/// Agent 1 plays Stage 1 every round; agent 2's next strategy comes from
/// `opponent`, which sees the half state.
pub fn rollout_vs_opponent(
    game: &GameInstance,
    opponent: &mut dyn OpponentRule,
    horizon: usize,
) -> Result<Trajectory> {
    game.check_state(&game.initial)?;
    let mut traj = Trajectory::start(game, Mode::AltVsOpponent, 2 * horizon + 1);
    for round in 0..horizon {
        let half = alt_gd_stage1(game, traj.states.last().expect("non-empty"))?;
        traj = traj.push_guarded(half)?;
        let half = traj.states.last().expect("non-empty");
        let x2 = opponent.respond(round, half)?;
        if x2.len() != game.k2() {
            return Err(Error::OpponentContract {
                round,
                reason: format!("returned length {}, expected {}", x2.len(), game.k2()),
            });
        }
        if check_finite("x2", &x2).is_err() {
            return Err(Error::OpponentContract {
                round,
                reason: "returned a non-finite component".into(),
            });
        }
        let full = JointState::new(half.x1.clone(), x2, round + 1, Stage::Full);
        traj = traj.push_guarded(full)?;
    }
    Ok(traj)
}

/// Integrates the continuous-time dynamics `x1' = η1 A x2`, `x2' = −η2 Aᵀ x1`
/// up to `t_end` with classical RK4, recording every substep. The substep is
/// the largest `t_end / n` not exceeding `h`.
pub fn continuous_reference(game: &GameInstance, t_end: f64, h: f64) -> Result<Trajectory> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Invalid {
            what: "substep",
            reason: format!("must be positive and finite, got {h}"),
        });
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Invalid {
            what: "end time",
            reason: format!("must be non-negative and finite, got {t_end}"),
        });
    }
    game.check_state(&game.initial)?;
    let n = (t_end / h).ceil() as usize;
    if n == 0 {
        return Ok(Trajectory::start(game, Mode::Continuous, 1));
    }
    integrate(game, n, 1, t_end / n as f64)
}

fn vector_field(game: &GameInstance, x1: &[f64], x2: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let eta1 = game.steps.eta1();
    let eta2 = game.steps.eta2();
    let d1 = mat_vec(&game.matrix, x2).expect("dimensions checked");
    let d2 = mat_tvec(&game.matrix, x1).expect("dimensions checked");
    (
        d1.into_iter().map(|v| eta1 * v).collect(),
        d2.into_iter().map(|v| -eta2 * v).collect(),
    )
}

fn axpy(x: &[f64], a: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| xi + a * yi).collect()
}

fn rk4_step(game: &GameInstance, x1: &[f64], x2: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
    let (k1a, k1b) = vector_field(game, x1, x2);
    let (k2a, k2b) = vector_field(game, &axpy(x1, dt / 2.0, &k1a), &axpy(x2, dt / 2.0, &k1b));
    let (k3a, k3b) = vector_field(game, &axpy(x1, dt / 2.0, &k2a), &axpy(x2, dt / 2.0, &k2b));
    let (k4a, k4b) = vector_field(game, &axpy(x1, dt, &k3a), &axpy(x2, dt, &k3b));
    let combine = |x: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
        (0..x.len())
            .map(|i| x[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
            .collect()
    };
    (
        combine(x1, &k1a, &k2a, &k3a, &k4a),
        combine(x2, &k1b, &k2b, &k3b, &k4b),
    )
}

fn integrate(game: &GameInstance, samples: usize, substeps: usize, dt: f64) -> Result<Trajectory> {
    let mut traj = Trajectory::start(game, Mode::Continuous, samples + 1);
    traj.time_step = dt * substeps as f64;
    let mut x1 = game.initial.x1.clone();
    let mut x2 = game.initial.x2.clone();
    for t in 1..=samples {
        for _ in 0..substeps {
            (x1, x2) = rk4_step(game, &x1, &x2, dt);
        }
        traj = traj.push_guarded(JointState::new(x1.clone(), x2.clone(), t, Stage::Full))?;
    }
    Ok(traj)
}
