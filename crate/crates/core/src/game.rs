//! The bilinear zero-sum game: payoff matrix, step sizes, joint strategies.
//!
//! Agent 1 picks `x1 ∈ ℝ^k1` and receives `⟨x1, A x2⟩`; agent 2 picks
//! `x2 ∈ ℝ^k2` and receives the negation. Strategies are unconstrained and the
//! equilibrium sits at the origin.

use std::fmt;

use crate::error::{check_finite, check_len, Error, Result};
use crate::numerics::{dot, mat_vec};

/// Dense `rows × cols` payoff matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl PayoffMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Invalid {
                what: "payoff matrix",
                reason: format!("dimensions must be positive, got {rows}x{cols}"),
            });
        }
        check_len("payoff matrix entries", rows * cols, entries.len())?;
        check_finite("payoff matrix entries", &entries)?;
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            check_len("payoff matrix row", cols, row.len())?;
            entries.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, entries)
    }

    /// The 1×1 game `A = [a]`.
    pub fn scalar(a: f64) -> Result<Self> {
        Self::new(1, 1, vec![a])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn transpose(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                entries.push(self.get(i, j));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum()
    }

    /// The single entry of a 1×1 matrix.
    pub fn as_scalar(&self) -> Option<f64> {
        (self.rows == 1 && self.cols == 1).then(|| self.entries[0])
    }
}

/// Fixed learning rates `(η1, η2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    eta1: f64,
    eta2: f64,
}

impl StepSizes {
    pub fn new(eta1: f64, eta2: f64) -> Result<Self> {
        for (name, eta) in [("eta1", eta1), ("eta2", eta2)] {
            if !(eta.is_finite() && eta > 0.0) {
                return Err(Error::Invalid {
                    what: "step size",
                    reason: format!("{name} must be positive and finite, got {eta}"),
                });
            }
        }
        Ok(Self { eta1, eta2 })
    }

    pub fn eta1(&self) -> f64 {
        self.eta1
    }

    pub fn eta2(&self) -> f64 {
        self.eta2
    }

    /// `√(η1 η2)`.
    pub fn geometric_mean(&self) -> f64 {
        (self.eta1 * self.eta2).sqrt()
    }
}

/// Whether a state sits after a full round or between agent 1's and agent 2's
/// updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Full,
    Half,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Full => "full",
            Stage::Half => "half",
        })
    }
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "full" => Ok(Stage::Full),
            "half" => Ok(Stage::Half),
            other => Err(format!("unknown stage {other:?}")),
        }
    }
}

/// Joint strategy `(x1, x2)` at round `t`.
///
/// A `Half` state with index `t` holds `(x1^{t+1}, x2^t)`: agent 1 has already
/// moved in round `t`, agent 2 has not.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub t: usize,
    pub stage: Stage,
}

impl JointState {
    pub fn new(x1: Vec<f64>, x2: Vec<f64>, t: usize, stage: Stage) -> Self {
        Self { x1, x2, t, stage }
    }

    /// A `Full` state at `t = 0`.
    pub fn initial(x1: Vec<f64>, x2: Vec<f64>) -> Self {
        Self::new(x1, x2, 0, Stage::Full)
    }

    pub fn is_finite(&self) -> bool {
        self.x1.iter().chain(&self.x2).all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.x1
            .iter()
            .chain(&self.x2)
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Squared Euclidean norm of the concatenated vector `(x1, x2)`.
    pub fn norm_sq(&self) -> f64 {
        dot(&self.x1, &self.x1) + dot(&self.x2, &self.x2)
    }

    /// Euclidean distance between the concatenated vectors.
    pub fn distance(&self, other: &JointState) -> f64 {
        let d1 = self.x1.iter().zip(&other.x1).map(|(a, b)| (a - b) * (a - b));
        let d2 = self.x2.iter().zip(&other.x2).map(|(a, b)| (a - b) * (a - b));
        d1.chain(d2).sum::<f64>().sqrt()
    }

    pub(crate) fn expect_stage(&self, expected: Stage) -> Result<()> {
        if self.stage == expected {
            Ok(())
        } else {
            Err(Error::WrongStage {
                expected,
                found: self.stage,
            })
        }
    }
}

/// A payoff matrix, step sizes and initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct GameInstance {
    pub matrix: PayoffMatrix,
    pub steps: StepSizes,
    pub initial: JointState,
}

impl GameInstance {
    pub fn new(matrix: PayoffMatrix, steps: StepSizes, x1: Vec<f64>, x2: Vec<f64>) -> Result<Self> {
        let game = Self {
            matrix,
            steps,
            initial: JointState::initial(x1, x2),
        };
        game.check_state(&game.initial)?;
        Ok(game)
    }

    pub fn k1(&self) -> usize {
        self.matrix.rows()
    }

    pub fn k2(&self) -> usize {
        self.matrix.cols()
    }

    /// Same game and steps, started from a different point.
    pub fn with_initial(&self, x1: Vec<f64>, x2: Vec<f64>) -> Result<Self> {
        Self::new(self.matrix.clone(), self.steps, x1, x2)
    }

    pub fn check_state(&self, s: &JointState) -> Result<()> {
        check_len("x1", self.k1(), s.x1.len())?;
        check_len("x2", self.k2(), s.x2.len())?;
        check_finite("x1", &s.x1)?;
        check_finite("x2", &s.x2)
    }
}

/// Agent 1's payoff `⟨x1, A x2⟩`.
pub fn payoff(game: &GameInstance, s: &JointState) -> Result<f64> {
    check_len("x1", game.k1(), s.x1.len())?;
    let ax2 = mat_vec(&game.matrix, &s.x2)?;
    Ok(dot(&s.x1, &ax2))
}

/// Agent 2's payoff, the exact negation of agent 1's.
pub fn payoff_agent2(game: &GameInstance, s: &JointState) -> Result<f64> {
    payoff(game, s).map(|p| -p)
}
