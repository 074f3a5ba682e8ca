//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # fig1 preset, written out
//! matrix = 1            # rows separated by ';', entries by ','
//! eta1 = 0.5
//! eta2 = 0.5
//! x1_0 = 35
//! x2_0 = 35
//! mode = alt            # alt | sim | continuous | alt_vs_opponent
//! iterations = 125
//! epsilon = 0.5         # optional recurrence radius
//! comparator = 0        # optional fixed strategy for the regret column
//! output_dir = out/fig1
//! ```
//!
//! `alt_vs_opponent` also needs `opponent = stage2 | zero | constant | scripted`,
//! with `opponent_value = <vector>` for `constant` and `opponent_file = <path>`
//! for `scripted`. Relative paths resolve against the config file's directory.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::dynamics::{
    ConstantOpponent, Mode, OpponentRule, ScriptedOpponent, Stage2Opponent,
};
use crate::error::{Error, Result};
use crate::game::{GameInstance, PayoffMatrix, StepSizes};

#[derive(Debug, Clone, PartialEq)]
pub enum OpponentSpec {
    Stage2,
    Zero,
    Constant(Vec<f64>),
    Scripted(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub matrix: PayoffMatrix,
    pub eta1: f64,
    pub eta2: f64,
    pub x1_0: Vec<f64>,
    pub x2_0: Vec<f64>,
    pub mode: Mode,
    pub opponent: Option<OpponentSpec>,
    pub iterations: usize,
    pub epsilon: Option<f64>,
    pub comparator: Option<Vec<f64>>,
    pub output_dir: PathBuf,
}

const KEYS: &[&str] = &[
    "matrix",
    "eta1",
    "eta2",
    "x1_0",
    "x2_0",
    "mode",
    "opponent",
    "opponent_value",
    "opponent_file",
    "iterations",
    "epsilon",
    "comparator",
    "output_dir",
];

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse_vector(text: &str) -> std::result::Result<Vec<f64>, String> {
    text.split(',')
        .map(|item| {
            let item = item.trim();
            let v: f64 = item
                .parse()
                .map_err(|_| format!("not a number: {item:?}"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("not finite: {item:?}"))
            }
        })
        .collect()
}

pub fn parse_matrix(text: &str) -> std::result::Result<PayoffMatrix, String> {
    let rows = text
        .split(';')
        .map(parse_vector)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    PayoffMatrix::from_rows(&rows).map_err(|e| e.to_string())
}

fn format_vector(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn format_matrix(m: &PayoffMatrix) -> String {
    (0..m.rows())
        .map(|i| format_vector(m.row(i)))
        .collect::<Vec<_>>()
        .join(";")
}

struct Entry {
    line: usize,
    value: String,
}

impl ExperimentConfig {
    /// Parses config text; relative paths are joined onto `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut entries: HashMap<&str, Entry> = HashMap::new();
        let mut last_line = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            last_line = line;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| parse_err(line, format!("expected `key = value`, got {content:?}")))?;
            let key = key.trim();
            let known = KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| parse_err(line, format!("unknown key {key:?}")))?;
            let value = value.trim().to_string();
            if value.is_empty() {
                return Err(parse_err(line, format!("empty value for {key:?}")));
            }
            if let Some(prev) = entries.insert(known, Entry { line, value }) {
                return Err(parse_err(
                    line,
                    format!("duplicate key {key:?} (first set on line {})", prev.line),
                ));
            }
        }

        let eof = last_line + 1;
        let required = |key: &str| -> Result<&Entry> {
            entries
                .get(key)
                .ok_or_else(|| parse_err(eof, format!("missing required key {key:?}")))
        };
        let real = |key: &str| -> Result<f64> {
            let e = required(key)?;
            e.value
                .parse::<f64>()
                .map_err(|_| parse_err(e.line, format!("{key}: not a number: {:?}", e.value)))
        };
        let vector = |e: &Entry, key: &str| -> Result<Vec<f64>> {
            parse_vector(&e.value).map_err(|m| parse_err(e.line, format!("{key}: {m}")))
        };
        let path = |e: &Entry| -> PathBuf {
            let p = PathBuf::from(&e.value);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };

        let m = required("matrix")?;
        let matrix =
            parse_matrix(&m.value).map_err(|msg| parse_err(m.line, format!("matrix: {msg}")))?;

        let eta1 = real("eta1")?;
        let eta2 = real("eta2")?;
        if let Err(e) = StepSizes::new(eta1, eta2) {
            let line = if eta1 > 0.0 && eta1.is_finite() {
                required("eta2")?.line
            } else {
                required("eta1")?.line
            };
            return Err(parse_err(line, e.to_string()));
        }

        let e = required("x1_0")?;
        let x1_0 = vector(e, "x1_0")?;
        if x1_0.len() != matrix.rows() {
            return Err(parse_err(
                e.line,
                format!("x1_0 has {} entries, matrix has {} rows", x1_0.len(), matrix.rows()),
            ));
        }
        let e = required("x2_0")?;
        let x2_0 = vector(e, "x2_0")?;
        if x2_0.len() != matrix.cols() {
            return Err(parse_err(
                e.line,
                format!("x2_0 has {} entries, matrix has {} columns", x2_0.len(), matrix.cols()),
            ));
        }

        let e = required("mode")?;
        let mode: Mode = e.value.parse().map_err(|m: String| parse_err(e.line, m))?;

        let e = required("iterations")?;
        let iterations: usize = e
            .value
            .parse()
            .map_err(|_| parse_err(e.line, format!("iterations: not a count: {:?}", e.value)))?;

        let opponent = match entries.get("opponent") {
            None => None,
            Some(e) => Some(match e.value.as_str() {
                "stage2" => OpponentSpec::Stage2,
                "zero" => OpponentSpec::Zero,
                "constant" => {
                    let v = entries.get("opponent_value").ok_or_else(|| {
                        parse_err(e.line, "opponent = constant needs opponent_value")
                    })?;
                    let c = vector(v, "opponent_value")?;
                    if c.len() != matrix.cols() {
                        return Err(parse_err(
                            v.line,
                            format!("opponent_value has {} entries, expected {}", c.len(), matrix.cols()),
                        ));
                    }
                    OpponentSpec::Constant(c)
                }
                "scripted" => {
                    let f = entries.get("opponent_file").ok_or_else(|| {
                        parse_err(e.line, "opponent = scripted needs opponent_file")
                    })?;
                    OpponentSpec::Scripted(path(f))
                }
                other => {
                    return Err(parse_err(
                        e.line,
                        format!("unknown opponent {other:?} (expected stage2, zero, constant or scripted)"),
                    ))
                }
            }),
        };
        match (mode, &opponent) {
            (Mode::AltVsOpponent, None) => {
                let e = required("mode")?;
                return Err(parse_err(e.line, "mode alt_vs_opponent needs an opponent"));
            }
            (Mode::AltVsOpponent, Some(_)) | (_, None) => {}
            (_, Some(_)) => {
                let e = required("opponent")?;
                return Err(parse_err(e.line, format!("opponent is only valid with mode alt_vs_opponent, not {mode}")));
            }
        }

        let epsilon = match entries.get("epsilon") {
            None => None,
            Some(e) => {
                let v: f64 = e
                    .value
                    .parse()
                    .map_err(|_| parse_err(e.line, format!("epsilon: not a number: {:?}", e.value)))?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(parse_err(e.line, "epsilon must be positive"));
                }
                Some(v)
            }
        };

        let comparator = match entries.get("comparator") {
            None => None,
            Some(e) => {
                let c = vector(e, "comparator")?;
                if c.len() != matrix.rows() {
                    return Err(parse_err(
                        e.line,
                        format!("comparator has {} entries, expected {}", c.len(), matrix.rows()),
                    ));
                }
                Some(c)
            }
        };

        let output_dir = path(required("output_dir")?);

        Ok(Self {
            matrix,
            eta1,
            eta2,
            x1_0,
            x2_0,
            mode,
            opponent,
            iterations,
            epsilon,
            comparator,
            output_dir,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    pub fn steps(&self) -> StepSizes {
        StepSizes::new(self.eta1, self.eta2).expect("validated at parse time")
    }

    pub fn game(&self) -> Result<GameInstance> {
        GameInstance::new(
            self.matrix.clone(),
            self.steps(),
            self.x1_0.clone(),
            self.x2_0.clone(),
        )
    }

    /// The configured comparator, or the origin.
    pub fn comparator_or_zero(&self) -> Vec<f64> {
        self.comparator
            .clone()
            .unwrap_or_else(|| vec![0.0; self.matrix.rows()])
    }

    /// Instantiates the configured opponent, reading scripts from disk.
    pub fn build_opponent(&self, game: &GameInstance) -> Result<Option<Box<dyn OpponentRule>>> {
        Ok(match &self.opponent {
            None => None,
            Some(OpponentSpec::Stage2) => Some(Box::new(Stage2Opponent::new(game))),
            Some(OpponentSpec::Zero) => Some(Box::new(ConstantOpponent(vec![0.0; game.k2()]))),
            Some(OpponentSpec::Constant(c)) => Some(Box::new(ConstantOpponent(c.clone()))),
            Some(OpponentSpec::Scripted(path)) => {
                let text = std::fs::read_to_string(path)?;
                Some(Box::new(parse_script(&text, game.k2())?))
            }
        })
    }
}

/// One `x2` vector per non-empty line.
pub fn parse_script(text: &str, k2: usize) -> Result<ScriptedOpponent> {
    let mut script = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let v = parse_vector(content).map_err(|m| parse_err(idx + 1, m))?;
        if v.len() != k2 {
            return Err(parse_err(
                idx + 1,
                format!("opponent vector has {} entries, expected {k2}", v.len()),
            ));
        }
        script.push(v);
    }
    Ok(ScriptedOpponent::new(script))
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "matrix = {}", format_matrix(&self.matrix))?;
        writeln!(f, "eta1 = {}", self.eta1)?;
        writeln!(f, "eta2 = {}", self.eta2)?;
        writeln!(f, "x1_0 = {}", format_vector(&self.x1_0))?;
        writeln!(f, "x2_0 = {}", format_vector(&self.x2_0))?;
        writeln!(f, "mode = {}", self.mode)?;
        match &self.opponent {
            None => {}
            Some(OpponentSpec::Stage2) => writeln!(f, "opponent = stage2")?,
            Some(OpponentSpec::Zero) => writeln!(f, "opponent = zero")?,
            Some(OpponentSpec::Constant(c)) => {
                writeln!(f, "opponent = constant")?;
                writeln!(f, "opponent_value = {}", format_vector(c))?;
            }
            Some(OpponentSpec::Scripted(p)) => {
                writeln!(f, "opponent = scripted")?;
                writeln!(f, "opponent_file = {}", p.display())?;
            }
        }
        writeln!(f, "iterations = {}", self.iterations)?;
        if let Some(e) = self.epsilon {
            writeln!(f, "epsilon = {e}")?;
        }
        if let Some(c) = &self.comparator {
            writeln!(f, "comparator = {}", format_vector(c))?;
        }
        writeln!(f, "output_dir = {}", self.output_dir.display())
    }
}
