//! Trajectory and metrics CSV files.
//!
//! Trajectory columns: `t,stage,x1_0..x1_{k1-1},x2_0..x2_{k2-1}`.
//! Metrics columns: `t,perturbed_energy,weighted_energy,cum_utility,regret_vs_comparator`.
//! Reals are written in shortest round-trip form so re-reading is exact.

use std::io::Write;

use crate::dynamics::{Mode, Trajectory};
use crate::error::{Error, Result};
use crate::game::{GameInstance, JointState, Stage};
use crate::metrics::{perturbed_energy, regret_series, utility_series, weighted_energy, Play};

pub const METRICS_HEADER: &str = "t,perturbed_energy,weighted_energy,cum_utility,regret_vs_comparator";

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn trajectory_header(k1: usize, k2: usize) -> String {
    let mut cols = vec!["t".to_string(), "stage".to_string()];
    cols.extend((0..k1).map(|i| format!("x1_{i}")));
    cols.extend((0..k2).map(|i| format!("x2_{i}")));
    cols.join(",")
}

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut out: W) -> Result<()> {
    writeln!(out, "{}", trajectory_header(traj.game.k1(), traj.game.k2()))?;
    for s in &traj.states {
        write!(out, "{},{}", s.t, s.stage)?;
        for v in s.x1.iter().chain(&s.x2) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Rebuilds a trajectory of `game` from CSV text.
pub fn read_trajectory_csv(text: &str, game: &GameInstance, mode: Mode) -> Result<Trajectory> {
    let (k1, k2) = (game.k1(), game.k2());
    let mut lines = text.lines().enumerate();
    let expected = trajectory_header(k1, k2);
    match lines.next() {
        Some((_, h)) if h.trim() == expected => {}
        Some((_, h)) => return Err(parse_err(1, format!("header {h:?}, expected {expected:?}"))),
        None => return Err(parse_err(1, "empty trajectory file")),
    }
    let mut states = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != 2 + k1 + k2 {
            return Err(parse_err(
                line,
                format!("{} fields, expected {}", fields.len(), 2 + k1 + k2),
            ));
        }
        let t: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(line, format!("bad index {:?}", fields[0])))?;
        let stage: Stage = fields[1].parse().map_err(|m: String| parse_err(line, m))?;
        let values = fields[2..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| parse_err(line, format!("bad number {f:?}"))))
            .collect::<Result<Vec<_>>>()?;
        states.push(JointState::new(
            values[..k1].to_vec(),
            values[k1..].to_vec(),
            t,
            stage,
        ));
    }
    if states.first() != Some(&game.initial) {
        return Err(parse_err(2, "first row does not match the game's initial state"));
    }
    Ok(Trajectory {
        game: game.clone(),
        mode,
        states,
        time_step: 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub t: usize,
    pub perturbed_energy: f64,
    pub weighted_energy: f64,
    pub cum_utility: f64,
    pub regret_vs_comparator: f64,
}

/// One row per `Full` state; utility and regret use the accounting of the
/// trajectory's mode (simultaneous for the continuous reference).
pub fn compute_metrics(traj: &Trajectory, comparator: &[f64]) -> Result<Vec<MetricsRow>> {
    let play = Play::for_mode(traj.mode);
    let utility = utility_series(traj, play)?;
    let regret = regret_series(traj, comparator, play)?;
    traj.full_states()
        .zip(utility.iter().zip(&regret))
        .map(|(s, (&u, &r))| {
            Ok(MetricsRow {
                t: s.t,
                perturbed_energy: perturbed_energy(&traj.game, s)?,
                weighted_energy: weighted_energy(&traj.game, s)?,
                cum_utility: u,
                regret_vs_comparator: r,
            })
        })
        .collect()
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], mut out: W) -> Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.t, r.perturbed_energy, r.weighted_energy, r.cum_utility, r.regret_vs_comparator
        )?;
    }
    Ok(())
}

pub fn read_metrics_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == METRICS_HEADER => {}
        _ => return Err(parse_err(1, "missing metrics header")),
    }
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = raw.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(parse_err(line, format!("{} fields, expected 5", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| parse_err(line, format!("bad number {s:?}")));
        rows.push(MetricsRow {
            t: f[0]
                .parse()
                .map_err(|_| parse_err(line, format!("bad index {:?}", f[0])))?,
            perturbed_energy: num(f[1])?,
            weighted_energy: num(f[2])?,
            cum_utility: num(f[3])?,
            regret_vs_comparator: num(f[4])?,
        });
    }
    Ok(rows)
}

/// Writes `header` and one comma-joined row per entry.
pub fn write_table<W: Write>(mut out: W, header: &str, rows: &[Vec<String>]) -> Result<()> {
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::rollout;
    use crate::game::{PayoffMatrix, StepSizes};

    fn game() -> GameInstance {
        let a = PayoffMatrix::from_rows(&[vec![0.3, -1.1], vec![0.9, 0.4]]).unwrap();
        GameInstance::new(
            a,
            StepSizes::new(0.45, 0.3).unwrap(),
            vec![1.0 / 3.0, -2.0],
            vec![0.1, 7.0],
        )
        .unwrap()
    }

    #[test]
    fn trajectory_round_trips_exactly() {
        let g = game();
        for mode in [Mode::Alt, Mode::Sim] {
            let traj = rollout(&g, mode, 40).unwrap();
            let mut buf = Vec::new();
            write_trajectory_csv(&traj, &mut buf).unwrap();
            let back = read_trajectory_csv(std::str::from_utf8(&buf).unwrap(), &g, mode).unwrap();
            assert_eq!(back.states, traj.states);
        }
    }

    #[test]
    fn header_layout() {
        assert_eq!(trajectory_header(1, 2), "t,stage,x1_0,x2_0,x2_1");
    }

    #[test]
    fn read_rejects_malformed_rows() {
        let g = game();
        let header = trajectory_header(2, 2);
        let bad = format!("{header}\n0,full,1,2,3\n");
        assert!(matches!(
            read_trajectory_csv(&bad, &g, Mode::Alt),
            Err(Error::Parse { line: 2, .. })
        ));
        let bad = format!("{header}\n0,middle,1,2,3,4\n");
        assert!(read_trajectory_csv(&bad, &g, Mode::Alt).is_err());
        assert!(read_trajectory_csv("t,stage\n", &g, Mode::Alt).is_err());
        let wrong_start = format!("{header}\n0,full,0,0,0,0\n");
        assert!(read_trajectory_csv(&wrong_start, &g, Mode::Alt).is_err());
    }

    #[test]
    fn metrics_round_trip() {
        let traj = rollout(&game(), Mode::Alt, 25).unwrap();
        let rows = compute_metrics(&traj, &[1.0, -1.0]).unwrap();
        assert_eq!(rows.len(), 26);
        assert_eq!(rows[0].cum_utility, 0.0);
        let mut buf = Vec::new();
        write_metrics_csv(&rows, &mut buf).unwrap();
        assert_eq!(read_metrics_csv(std::str::from_utf8(&buf).unwrap()).unwrap(), rows);
    }
}
