//! Preset experiments and their figure data.

use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::cloud_snapshots;
use crate::dynamics::{rollout, Mode, Trajectory};
use crate::error::{Error, Result};
use crate::game::{PayoffMatrix, Stage};
use crate::harness::config::ExperimentConfig;
use crate::harness::csv::{compute_metrics, write_metrics_csv, write_table, write_trajectory_csv};
use crate::harness::svg::{render, Marker, Series};
use crate::metrics::{regret_bound, weighted_energy};
use crate::numerics::{hull_area_2d, Point2};

pub const PRESETS: &[&str] = &["fig1", "fig2a", "fig2b", "fig3", "fig4"];

/// Snapshot rounds shown for the point-cloud presets.
pub const FIG4_SNAPSHOTS: [usize; 7] = [0, 4, 8, 12, 16, 20, 24];

fn scalar_config(
    eta1: f64,
    eta2: f64,
    x1: f64,
    x2: f64,
    mode: Mode,
    iterations: usize,
    output_dir: &Path,
) -> ExperimentConfig {
    ExperimentConfig {
        matrix: PayoffMatrix::scalar(1.0).expect("valid"),
        eta1,
        eta2,
        x1_0: vec![x1],
        x2_0: vec![x2],
        mode,
        opponent: None,
        iterations,
        epsilon: None,
        comparator: Some(vec![0.0]),
        output_dir: output_dir.to_path_buf(),
    }
}

/// Configuration of a named preset. `fig3` and `fig4` compare both update
/// rules; the returned config is the alternating half.
pub fn preset_config(name: &str, output_dir: &Path) -> Result<ExperimentConfig> {
    Ok(match name {
        "fig1" => scalar_config(0.5, 0.5, 35.0, 35.0, Mode::Alt, 125, output_dir),
        "fig2a" => scalar_config(0.5, 0.5, 60.0, 0.0, Mode::Alt, 50, output_dir),
        "fig2b" => scalar_config(1.0, 0.5, 60.0, 0.0, Mode::Alt, 50, output_dir),
        "fig3" => scalar_config(0.5, 0.5, 40.0, 0.0, Mode::Alt, 10, output_dir),
        "fig4" => scalar_config(0.2, 0.2, 0.0, 0.0, Mode::Alt, 24, output_dir),
        other => {
            return Err(Error::Invalid {
                what: "preset",
                reason: format!("unknown preset {other:?} (expected one of {})", PRESETS.join(", ")),
            })
        }
    })
}

fn ring(center: Point2, radius: f64, n: usize) -> impl Iterator<Item = Point2> {
    (0..n).map(move |i| {
        let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
    })
}

fn segment(a: Point2, b: Point2, n: usize) -> impl Iterator<Item = Point2> {
    (0..=n).map(move |i| {
        let s = i as f64 / n as f64;
        [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
    })
}

/// A cat's face drawn as a point cloud in the `(x1, x2)` plane: head, ears,
/// eyes, nose and whiskers, centred at `(0, 8)`.
pub fn cat_cloud() -> Vec<Point2> {
    let c = [0.0, 8.0];
    let mut pts: Vec<Point2> = ring(c, 2.5, 48).collect();
    for side in [-1.0, 1.0] {
        let base_out = [c[0] + side * 2.2, c[1] + 1.2];
        let tip = [c[0] + side * 1.7, c[1] + 3.6];
        let base_in = [c[0] + side * 0.6, c[1] + 2.3];
        pts.extend(segment(base_out, tip, 6));
        pts.extend(segment(tip, base_in, 6));
        pts.extend(ring([c[0] + side * 0.9, c[1] + 0.5], 0.3, 8));
        for dy in [0.4, -0.4] {
            pts.extend(segment(
                [c[0] + side * 0.5, c[1] - 0.6],
                [c[0] + side * 3.4, c[1] - 0.6 + dy],
                5,
            ));
        }
    }
    pts.extend(segment([-0.2, c[1] - 0.3], [0.2, c[1] - 0.3], 2));
    pts.push([0.0, c[1] - 0.5]);
    pts
}

fn state_points(traj: &Trajectory, stage: Stage) -> Vec<Point2> {
    traj.states
        .iter()
        .filter(|s| s.stage == stage)
        .map(|s| [s.x1[0], s.x2[0]])
        .collect()
}

struct Emitter<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
    svg: bool,
}

impl Emitter<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        self.files.push(path);
        Ok(())
    }

    fn svg(&mut self, name: &str, title: &str, series: &[Series], equal: bool) -> Result<()> {
        if self.svg {
            self.write(name, render(title, series, equal).as_bytes())?;
        }
        Ok(())
    }

    fn trajectory(&mut self, name: &str, traj: &Trajectory) -> Result<()> {
        let mut buf = Vec::new();
        write_trajectory_csv(traj, &mut buf)?;
        self.write(name, &buf)
    }

    fn metrics(&mut self, name: &str, traj: &Trajectory, comparator: &[f64]) -> Result<()> {
        let mut buf = Vec::new();
        write_metrics_csv(&compute_metrics(traj, comparator)?, &mut buf)?;
        self.write(name, &buf)
    }

    fn table(&mut self, name: &str, header: &str, rows: &[Vec<String>]) -> Result<()> {
        let mut buf = Vec::new();
        write_table(&mut buf, header, rows)?;
        self.write(name, &buf)
    }
}

fn cycle_plot(emit: &mut Emitter<'_>, name: &str, title: &str, traj: &Trajectory) -> Result<()> {
    let series = [
        Series::new("after both move", state_points(traj, Stage::Full), "#1f4fbf", Marker::Triangle),
        Series::new("after agent 1 moves", state_points(traj, Stage::Half), "#c0282d", Marker::Circle),
    ];
    emit.svg(name, title, &series, true)
}

/// Writes the data files (and SVGs when `svg` is set) for a preset into
/// `dir`, returning the paths written.
pub fn generate(name: &str, dir: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    let config = preset_config(name, dir)?;
    fs::create_dir_all(dir)?;
    let mut emit = Emitter {
        dir,
        files: Vec::new(),
        svg,
    };
    emit.write(&format!("{name}.conf"), config.to_string().as_bytes())?;
    let game = config.game()?;
    let comparator = config.comparator_or_zero();

    match name {
        "fig1" => {
            let traj = rollout(&game, Mode::Alt, config.iterations)?;
            emit.trajectory("fig1_trajectory.csv", &traj)?;
            emit.metrics("fig1_metrics.csv", &traj, &comparator)?;
            let bound = regret_bound(&game.steps, &comparator, &game.initial.x1)?;
            let metrics = compute_metrics(&traj, &comparator)?;
            let rows: Vec<Vec<String>> = metrics
                .iter()
                .map(|m| {
                    vec![
                        m.t.to_string(),
                        m.cum_utility.to_string(),
                        m.regret_vs_comparator.to_string(),
                        bound.to_string(),
                    ]
                })
                .collect();
            emit.table("fig1_regret.csv", "t,cum_utility,regret,bound", &rows)?;
            cycle_plot(&mut emit, "fig1_trajectory.svg", "Alternating play, (35, 35)", &traj)?;
            let regret: Vec<Point2> = metrics
                .iter()
                .map(|m| [m.t as f64, m.regret_vs_comparator])
                .collect();
            let bound_line = vec![[0.0, bound], [config.iterations as f64, bound]];
            emit.svg(
                "fig1_regret.svg",
                "Agent 1 regret against x1 = 0",
                &[
                    Series::new("regret", regret, "#1f4fbf", Marker::Line),
                    Series::new("bound", bound_line, "#999999", Marker::Line),
                ],
                false,
            )?;
        }
        "fig2a" | "fig2b" => {
            let traj = rollout(&game, Mode::Alt, config.iterations)?;
            emit.trajectory(&format!("{name}_trajectory.csv"), &traj)?;
            emit.metrics(&format!("{name}_metrics.csv"), &traj, &comparator)?;
            let title = format!("Alternating play, eta = ({}, {})", config.eta1, config.eta2);
            cycle_plot(&mut emit, &format!("{name}_trajectory.svg"), &title, &traj)?;
        }
        "fig3" => {
            let sim = rollout(&game, Mode::Sim, config.iterations)?;
            let alt = rollout(&game, Mode::Alt, config.iterations)?;
            emit.trajectory("fig3_sim_trajectory.csv", &sim)?;
            emit.trajectory("fig3_alt_trajectory.csv", &alt)?;
            emit.metrics("fig3_sim_metrics.csv", &sim, &comparator)?;
            emit.metrics("fig3_alt_metrics.csv", &alt, &comparator)?;
            let rows = sim
                .full_states()
                .zip(alt.full_states())
                .map(|(s, a)| {
                    Ok(vec![
                        s.t.to_string(),
                        weighted_energy(&game, s)?.to_string(),
                        weighted_energy(&game, a)?.to_string(),
                        crate::metrics::perturbed_energy(&game, a)?.to_string(),
                    ])
                })
                .collect::<Result<Vec<_>>>()?;
            emit.table(
                "fig3_energy.csv",
                "t,sim_weighted_energy,alt_weighted_energy,alt_perturbed_energy",
                &rows,
            )?;
            let full = |t: &Trajectory| -> Vec<Point2> { state_points(t, Stage::Full) };
            emit.svg(
                "fig3_sim.svg",
                "Simultaneous play diverges",
                &[
                    Series::new("path", full(&sim), "#bbbbbb", Marker::Line),
                    Series::new("sim", full(&sim), "#c0282d", Marker::Circle),
                ],
                true,
            )?;
            emit.svg(
                "fig3_alt.svg",
                "Alternating play stays near a circle",
                &[
                    Series::new("path", full(&alt), "#bbbbbb", Marker::Line),
                    Series::new("alt", full(&alt), "#1f4fbf", Marker::Triangle),
                ],
                true,
            )?;
        }
        "fig4" => {
            let cloud = cat_cloud();
            let alt = cloud_snapshots(&game, &cloud, Mode::Alt, config.iterations)?;
            let sim = cloud_snapshots(&game, &cloud, Mode::Sim, config.iterations)?;
            let mut point_rows = Vec::new();
            for (label, snaps) in [("alt", &alt), ("sim", &sim)] {
                for &step in &FIG4_SNAPSHOTS {
                    for (i, p) in snaps[step].iter().enumerate() {
                        point_rows.push(vec![
                            label.to_string(),
                            step.to_string(),
                            i.to_string(),
                            p[0].to_string(),
                            p[1].to_string(),
                        ]);
                    }
                }
            }
            emit.table("fig4_points.csv", "mode,step,point,x1,x2", &point_rows)?;
            let area_rows: Vec<Vec<String>> = (0..=config.iterations)
                .map(|step| {
                    vec![
                        step.to_string(),
                        hull_area_2d(&alt[step]).area.to_string(),
                        hull_area_2d(&sim[step]).area.to_string(),
                    ]
                })
                .collect();
            emit.table("fig4_area.csv", "step,alt_area,sim_area", &area_rows)?;
            const COLORS: [&str; 7] = [
                "#000000", "#1f4fbf", "#2a9d8f", "#e9c46a", "#f4a261", "#e76f51", "#c0282d",
            ];
            for (label, snaps, title) in [
                ("alt", &alt, "Alternating play preserves area"),
                ("sim", &sim, "Simultaneous play expands area"),
            ] {
                let series: Vec<Series> = FIG4_SNAPSHOTS
                    .iter()
                    .zip(COLORS)
                    .map(|(&step, color)| {
                        Series::new(format!("t = {step}"), snaps[step].clone(), color, Marker::Circle)
                    })
                    .collect();
                emit.svg(&format!("fig4_{label}.svg"), title, &series, true)?;
            }
        }
        _ => unreachable!("preset_config rejected unknown names"),
    }
    Ok(emit.files)
}
