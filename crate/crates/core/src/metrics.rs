//! Cumulative utility, regret and energy quantities along trajectories.
//!
//! For alternating play agent 1 faces each `x2^t` twice, once before and once
//! after her own move, so round `t` is worth `⟨x1^{t+1} + x1^t, A x2^t⟩`. The
//! sums here run over every agent-1 update recorded in the trajectory: a
//! rollout of `n` rounds yields the sums for `t = 0..n-1` and its last `Full`
//! state carries `x1^n`.
//!
//! Regret is reported as defined (positive means the comparator would have
//! done better) and is never averaged over the horizon.

use crate::dynamics::{Mode, Trajectory};
use crate::error::{check_len, Error, Result};
use crate::game::{GameInstance, JointState, Stage, StepSizes};
use crate::numerics::{dot, mat_vec, norm_sq};

/// Which utility accounting applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Play {
    Alternating,
    Simultaneous,
}

impl Play {
    /// The accounting matching a trajectory's update rule.
    pub fn for_mode(mode: Mode) -> Play {
        match mode {
            Mode::Alt | Mode::AltVsOpponent => Play::Alternating,
            Mode::Sim | Mode::Continuous => Play::Simultaneous,
        }
    }
}

fn require_alternating(traj: &Trajectory) -> Result<()> {
    let expected_halves = traj.horizon();
    let ok = matches!(traj.mode, Mode::Alt | Mode::AltVsOpponent)
        && traj.agent1_updates().count() == expected_halves;
    if ok {
        Ok(())
    } else {
        Err(Error::MissingHalfStates)
    }
}

/// Per-round terms `(A x2^t, ⟨x1^{t+1} + x1^t, A x2^t⟩)` of alternating play.
fn alternating_terms(traj: &Trajectory) -> Result<Vec<(Vec<f64>, f64)>> {
    require_alternating(traj)?;
    traj.agent1_updates()
        .map(|(before, half)| {
            let ax2 = mat_vec(&traj.game.matrix, &before.x2)?;
            let sum: Vec<f64> = half.x1.iter().zip(&before.x1).map(|(a, b)| a + b).collect();
            let u = dot(&sum, &ax2);
            Ok((ax2, u))
        })
        .collect()
}

/// Per-state terms `(A x2^t, ⟨x1^t, A x2^t⟩)` of simultaneous play.
fn simultaneous_terms(traj: &Trajectory) -> Result<Vec<(Vec<f64>, f64)>> {
    traj.full_states()
        .map(|s| {
            let ax2 = mat_vec(&traj.game.matrix, &s.x2)?;
            let u = dot(&s.x1, &ax2);
            Ok((ax2, u))
        })
        .collect()
}

/// `Σ_t ⟨x1^t, A x2^t⟩` over every `Full` state of a simultaneous run.
pub fn cumulative_utility_sim(traj: &Trajectory) -> Result<f64> {
    if traj.mode != Mode::Sim {
        return Err(Error::WrongMode {
            expected: "sim",
            found: traj.mode.to_string(),
        });
    }
    Ok(simultaneous_terms(traj)?.iter().map(|(_, u)| u).sum())
}

/// `Σ_t ⟨x1^{t+1} + x1^t, A x2^t⟩` over every recorded agent-1 update.
pub fn cumulative_utility_alt(traj: &Trajectory) -> Result<f64> {
    Ok(alternating_terms(traj)?.iter().map(|(_, u)| u).sum())
}

/// Running cumulative utility, one entry per `Full` state: entry `t` covers
/// the rounds before state `t` (alternating) or states `0..=t` (simultaneous).
pub fn utility_series(traj: &Trajectory, play: Play) -> Result<Vec<f64>> {
    let terms = match play {
        Play::Alternating => alternating_terms(traj)?,
        Play::Simultaneous => simultaneous_terms(traj)?,
    };
    let mut acc = 0.0;
    let running = terms.iter().map(|(_, u)| {
        acc += u;
        acc
    });
    Ok(match play {
        Play::Alternating => std::iter::once(0.0).chain(running).collect(),
        Play::Simultaneous => running.collect(),
    })
}

/// Running regret against `x1_fixed`, indexed like [`utility_series`].
pub fn regret_series(traj: &Trajectory, x1_fixed: &[f64], play: Play) -> Result<Vec<f64>> {
    check_len("comparator", traj.game.k1(), x1_fixed.len())?;
    let (weight, terms) = match play {
        Play::Alternating => (2.0, alternating_terms(traj)?),
        Play::Simultaneous => (1.0, simultaneous_terms(traj)?),
    };
    let mut gain = 0.0;
    let mut utility = 0.0;
    let running = terms.iter().map(|(ax2, u)| {
        gain += weight * dot(x1_fixed, ax2);
        utility += u;
        gain - utility
    });
    Ok(match play {
        Play::Alternating => std::iter::once(0.0).chain(running).collect(),
        Play::Simultaneous => running.collect(),
    })
}

/// Literal regret: comparator utility minus realized utility over the whole
/// trajectory.
pub fn regret_summed(traj: &Trajectory, x1_fixed: &[f64], play: Play) -> Result<f64> {
    check_len("comparator", traj.game.k1(), x1_fixed.len())?;
    let (weight, terms) = match play {
        Play::Alternating => (2.0, alternating_terms(traj)?),
        Play::Simultaneous => (1.0, simultaneous_terms(traj)?),
    };
    let k1 = traj.game.k1();
    let mut total_ax2 = vec![0.0; k1];
    let mut utility = 0.0;
    for (ax2, u) in &terms {
        total_ax2.iter_mut().zip(ax2).for_each(|(t, v)| *t += v);
        utility += u;
    }
    Ok(weight * dot(x1_fixed, &total_ax2) - utility)
}

/// `⟨2x, Σ A x2^t⟩ − Σ ⟨x1^{t+1} + x1^t, A x2^t⟩`.
pub fn regret_alt_summed(traj: &Trajectory, x1_fixed: &[f64]) -> Result<f64> {
    regret_summed(traj, x1_fixed, Play::Alternating)
}

/// `⟨x, Σ A x2^t⟩ − Σ ⟨x1^t, A x2^t⟩`.
pub fn regret_sim_summed(traj: &Trajectory, x1_fixed: &[f64]) -> Result<f64> {
    regret_summed(traj, x1_fixed, Play::Simultaneous)
}

/// Alternating regret from the first and last agent-1 strategies only:
/// `(⟨2x − x1^last, x1^last⟩ − ⟨2x − x1^first, x1^first⟩) / η1`.
pub fn regret_alt_closed_form(
    steps: &StepSizes,
    x1_fixed: &[f64],
    x1_first: &[f64],
    x1_last: &[f64],
) -> Result<f64> {
    check_len("first strategy", x1_fixed.len(), x1_first.len())?;
    check_len("last strategy", x1_fixed.len(), x1_last.len())?;
    let pairing = |x: &[f64]| -> f64 {
        x1_fixed
            .iter()
            .zip(x)
            .map(|(c, v)| (2.0 * c - v) * v)
            .sum()
    };
    Ok((pairing(x1_last) - pairing(x1_first)) / steps.eta1())
}

/// Horizon-free upper bound `(⟨x1^0 − 2x, x1^0⟩ + ‖x‖²) / η1` on alternating
/// regret, attained when the last strategy equals the comparator.
pub fn regret_bound(steps: &StepSizes, x1_fixed: &[f64], x1_first: &[f64]) -> Result<f64> {
    check_len("first strategy", x1_fixed.len(), x1_first.len())?;
    let cross: f64 = x1_first
        .iter()
        .zip(x1_fixed)
        .map(|(f, c)| (f - 2.0 * c) * f)
        .sum();
    Ok((cross + norm_sq(x1_fixed)) / steps.eta1())
}

/// Size of the terms in the closed-form regret, `(‖x‖² + ‖x1^first‖² +
/// ‖x1^last‖²)/η1`; agreement between the regret forms is judged relative to
/// it.
pub fn regret_scale(steps: &StepSizes, x1_fixed: &[f64], x1_first: &[f64], x1_last: &[f64]) -> f64 {
    (norm_sq(x1_fixed) + norm_sq(x1_first) + norm_sq(x1_last)) / steps.eta1()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub fixed_strategy: Vec<f64>,
    pub summed_regret: f64,
    pub closed_form_regret: f64,
    pub bound: f64,
    /// Number of agent-1 updates summed over.
    pub horizon: usize,
    /// Magnitude used for relative comparisons, see [`regret_scale`].
    pub scale: f64,
}

impl RegretReport {
    /// Summed and closed forms agree to [`IDENTITY_RTOL`] of `scale`.
    pub fn forms_agree(&self) -> bool {
        (self.summed_regret - self.closed_form_regret).abs() <= IDENTITY_RTOL * self.scale
    }

    /// Neither form exceeds `bound + IDENTITY_RTOL·|bound|`.
    pub fn within_bound(&self) -> bool {
        let limit = self.bound + IDENTITY_RTOL * self.bound.abs();
        self.summed_regret <= limit && self.closed_form_regret <= limit
    }
}

/// Summed, closed-form and bound values of alternating regret for one run.
pub fn regret_report(traj: &Trajectory, x1_fixed: &[f64]) -> Result<RegretReport> {
    let summed_regret = regret_alt_summed(traj, x1_fixed)?;
    let steps = traj.game.steps;
    let first = &traj.game.initial.x1;
    let last = &traj.last_full().x1;
    Ok(RegretReport {
        fixed_strategy: x1_fixed.to_vec(),
        summed_regret,
        closed_form_regret: regret_alt_closed_form(&steps, x1_fixed, first, last)?,
        bound: regret_bound(&steps, x1_fixed, first)?,
        horizon: traj.horizon(),
        scale: regret_scale(&steps, x1_fixed, first, last),
    })
}

/// Relative tolerance for the one-step energy identities and regret forms.
pub const IDENTITY_RTOL: f64 = 1e-9;

/// Both sides of a one-step energy identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBalance {
    pub lhs: f64,
    pub rhs: f64,
    /// Magnitude of the terms entering either side, the yardstick for
    /// rounding error.
    pub scale: f64,
}

impl EnergyBalance {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }

    pub fn relative_residual(&self) -> f64 {
        if self.scale > 0.0 {
            self.residual() / self.scale
        } else {
            self.residual()
        }
    }

    pub fn holds(&self) -> bool {
        self.relative_residual() <= IDENTITY_RTOL
    }
}

/// `(‖x1^{t+1}‖² − ‖x1^t‖²)/η1` against `⟨x1^{t+1} + x1^t, A x2^t⟩`.
pub fn energy_delta_agent1(
    game: &GameInstance,
    before: &JointState,
    half: &JointState,
) -> Result<EnergyBalance> {
    before.expect_stage(Stage::Full)?;
    half.expect_stage(Stage::Half)?;
    check_len("x1", game.k1(), before.x1.len())?;
    check_len("x1", game.k1(), half.x1.len())?;
    let eta1 = game.steps.eta1();
    let (after_sq, before_sq) = (norm_sq(&half.x1), norm_sq(&before.x1));
    let lhs = (after_sq - before_sq) / eta1;
    let sum: Vec<f64> = half.x1.iter().zip(&before.x1).map(|(a, b)| a + b).collect();
    let ax2 = mat_vec(&game.matrix, &before.x2)?;
    let rhs = dot(&sum, &ax2);
    let scale = (after_sq + before_sq) / eta1 + (norm_sq(&sum) * norm_sq(&ax2)).sqrt();
    Ok(EnergyBalance { lhs, rhs, scale })
}

/// `(‖x2^{t+1}‖² − ‖x2^t‖²)/η2` against `−⟨x1^{t+1}, A(x2^{t+1} + x2^t)⟩`.
pub fn energy_delta_agent2(
    game: &GameInstance,
    half: &JointState,
    after: &JointState,
) -> Result<EnergyBalance> {
    half.expect_stage(Stage::Half)?;
    after.expect_stage(Stage::Full)?;
    check_len("x1", game.k1(), half.x1.len())?;
    check_len("x2", game.k2(), after.x2.len())?;
    let eta2 = game.steps.eta2();
    let (after_sq, before_sq) = (norm_sq(&after.x2), norm_sq(&half.x2));
    let lhs = (after_sq - before_sq) / eta2;
    let sum: Vec<f64> = after.x2.iter().zip(&half.x2).map(|(a, b)| a + b).collect();
    let a_sum = mat_vec(&game.matrix, &sum)?;
    let rhs = -dot(&half.x1, &a_sum);
    let scale = (after_sq + before_sq) / eta2 + (norm_sq(&half.x1) * norm_sq(&a_sum)).sqrt();
    Ok(EnergyBalance { lhs, rhs, scale })
}

/// `‖x1‖²/η1 + ‖x2‖²/η2`.
pub fn weighted_energy(game: &GameInstance, s: &JointState) -> Result<f64> {
    check_len("x1", game.k1(), s.x1.len())?;
    check_len("x2", game.k2(), s.x2.len())?;
    Ok(norm_sq(&s.x1) / game.steps.eta1() + norm_sq(&s.x2) / game.steps.eta2())
}

/// `‖x1‖²/η1 + ‖x2‖²/η2 + ⟨x1, A x2⟩`, constant when both agents alternate.
pub fn perturbed_energy(game: &GameInstance, s: &JointState) -> Result<f64> {
    Ok(weighted_energy(game, s)? + crate::game::payoff(game, s)?)
}
