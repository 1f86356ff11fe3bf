//! File outputs: per-slot trajectory CSV, energy report CSV, strategy
//! comparison CSV, and SVG renderings of the flight paths and of each
//! UAV's speed/rate profile over time.

use std::path::{Path, PathBuf};

use crate::channel::best_rate_bps;
use crate::energy::{flight_power_w, EnergyBreakdown};
use crate::harness::{Comparison, EnergyReport};
use crate::scenario::{Point2, Scenario};
use crate::trajectory::MissionPlan;
use crate::{Error, Result};

const PALETTE: [&str; 8] = [
    "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |e| Error::Parse {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

/// One per-slot record of the trajectory table.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub uav: usize,
    /// Mission-wide slot index.
    pub slot: usize,
    /// Elapsed mission time at the end of the slot, s.
    pub t_s: f64,
    /// Waypoint at the end of the slot.
    pub x_m: f64,
    pub y_m: f64,
    pub speed_mps: f64,
    /// Best station rate at the slot midpoint.
    pub best_rate_bps: f64,
    /// Station receiving the slot's offload (empty when none).
    pub tau_station: Option<u32>,
    /// Total offload fraction of the slot.
    pub tau_frac: f64,
    pub f_uav_hz: f64,
}

/// Flattens mission plans into per-slot rows.
pub fn trajectory_rows(scenario: &Scenario, plans: &[MissionPlan]) -> Vec<TrajectoryRow> {
    let mut rows = Vec::new();
    for plan in plans {
        let mut slot = 0usize;
        let mut t = 0.0;
        for seg in &plan.segments {
            for l in 0..seg.slots() {
                t += seg.slot_s[l];
                let tau_frac: f64 = seg.tau[l].iter().sum();
                let tau_station = seg.tau[l]
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v > 0.0)
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(m, _)| scenario.stations[m].id);
                let end = seg.waypoints[l + 1];
                rows.push(TrajectoryRow {
                    uav: plan.uav_id,
                    slot,
                    t_s: t,
                    x_m: end.x,
                    y_m: end.y,
                    speed_mps: seg.speed_mps(l),
                    best_rate_bps: best_rate_bps(
                        seg.midpoint(l),
                        &scenario.stations,
                        &scenario.uav,
                        &scenario.channel,
                    ),
                    tau_station,
                    tau_frac,
                    f_uav_hz: seg.f_uav[l],
                });
                slot += 1;
            }
        }
    }
    rows
}

pub fn write_trajectories_csv(
    scenario: &Scenario,
    plans: &[MissionPlan],
    path: &Path,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record([
        "uav",
        "slot",
        "t_s",
        "x_m",
        "y_m",
        "speed_mps",
        "best_rate_bps",
        "tau_station",
        "tau_frac",
        "f_uav_hz",
    ])
    .map_err(csv_err(path))?;
    for r in trajectory_rows(scenario, plans) {
        w.write_record([
            r.uav.to_string(),
            r.slot.to_string(),
            r.t_s.to_string(),
            r.x_m.to_string(),
            r.y_m.to_string(),
            r.speed_mps.to_string(),
            r.best_rate_bps.to_string(),
            r.tau_station.map(|id| id.to_string()).unwrap_or_default(),
            r.tau_frac.to_string(),
            r.f_uav_hz.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Reads a trajectory table back, e.g. for re-rendering.
pub fn read_trajectories_csv(path: &Path) -> Result<Vec<TrajectoryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let parse_f = |s: &str, path: &Path| -> Result<f64> {
        s.parse().map_err(|_| Error::Parse {
            path: path.display().to_string(),
            msg: format!("bad float '{s}'"),
        })
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let field = |i: usize| rec.get(i).unwrap_or_default();
        rows.push(TrajectoryRow {
            uav: field(0).parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                msg: format!("bad uav id '{}'", field(0)),
            })?,
            slot: field(1).parse().unwrap_or_default(),
            t_s: parse_f(field(2), path)?,
            x_m: parse_f(field(3), path)?,
            y_m: parse_f(field(4), path)?,
            speed_mps: parse_f(field(5), path)?,
            best_rate_bps: parse_f(field(6), path)?,
            tau_station: field(7).parse().ok(),
            tau_frac: parse_f(field(8), path)?,
            f_uav_hz: parse_f(field(9), path)?,
        });
    }
    Ok(rows)
}

/// Re-accounts per-UAV energy and completion time from trajectory rows;
/// an independent path used to validate the report.
pub fn reconstruct_energy(
    rows: &[TrajectoryRow],
    scenario: &Scenario,
) -> Vec<(usize, f64, EnergyBreakdown)> {
    let mut ids: Vec<usize> = rows.iter().map(|r| r.uav).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.into_iter()
        .map(|uav| {
            let mut t_prev = 0.0;
            let mut flight = 0.0;
            let mut compute = 0.0;
            let mut transmit = 0.0;
            let mut t_end = 0.0;
            for r in rows.iter().filter(|r| r.uav == uav) {
                let dt = r.t_s - t_prev;
                t_prev = r.t_s;
                t_end = r.t_s;
                flight += flight_power_w(r.speed_mps, &scenario.uav.rotor) * dt;
                compute += scenario.uav.cap_coeff * r.f_uav_hz.powi(3) * dt;
                transmit += r.tau_frac * scenario.uav.tx_power_w * dt;
            }
            (uav, t_end, EnergyBreakdown::new(flight, compute, transmit))
        })
        .collect()
}

pub fn write_report_csv(report: &EnergyReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record([
        "uav_id",
        "t_complete_s",
        "e_flight_j",
        "e_compute_j",
        "e_transmit_j",
        "e_total_j",
        "t_avg_s",
        "e_total_all_j",
        "minmax_gap_s",
        "p0_literal",
        "p0_abs",
    ])
    .map_err(csv_err(path))?;
    for u in &report.per_uav {
        w.write_record([
            u.uav_id.to_string(),
            u.t_complete_s.to_string(),
            u.energy.flight_j.to_string(),
            u.energy.compute_j.to_string(),
            u.energy.transmit_j.to_string(),
            u.energy.total_j.to_string(),
            report.t_avg_s.to_string(),
            report.e_total_all_j.to_string(),
            report.minmax_gap_s.to_string(),
            report.p0_literal.to_string(),
            report.p0_abs.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn write_comparison_csv(cmp: &Comparison, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record([
        "strategy",
        "seed",
        "uav_id",
        "T_i",
        "E_i",
        "T_avg",
        "E_total",
        "minmax_gap",
    ])
    .map_err(csv_err(path))?;
    for r in &cmp.rows {
        w.write_record([
            r.strategy.name().to_string(),
            r.seed.to_string(),
            r.uav_id.to_string(),
            r.t_i_s.to_string(),
            r.e_i_j.to_string(),
            r.t_avg_s.to_string(),
            r.e_total_j.to_string(),
            r.minmax_gap_s.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    for s in &cmp.summaries {
        w.write_record([
            s.strategy.name().to_string(),
            "mean".to_string(),
            "all".to_string(),
            String::new(),
            String::new(),
            s.mean_t_avg_s.to_string(),
            s.mean_e_total_j.to_string(),
            s.mean_minmax_gap_s.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// World-to-viewport mapping for the map SVGs.
struct ViewBox {
    min: Point2,
    scale: f64,
    height: f64,
}

impl ViewBox {
    fn fit(points: &[Point2], size: f64, margin: f64) -> ViewBox {
        let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        if !min.x.is_finite() {
            min = Point2::new(0.0, 0.0);
            max = Point2::new(1.0, 1.0);
        }
        let span = (max.x - min.x).max(max.y - min.y).max(1.0);
        ViewBox {
            min,
            scale: (size - 2.0 * margin) / span,
            height: size,
        }
    }

    fn map(&self, p: Point2, margin: f64) -> (f64, f64) {
        (
            margin + (p.x - self.min.x) * self.scale,
            self.height - margin - (p.y - self.min.y) * self.scale,
        )
    }
}

/// Renders the scenario map with one colored polyline per UAV.
pub fn trajectories_svg(scenario: &Scenario, paths: &[(usize, Vec<Point2>)]) -> String {
    let size = 800.0;
    let margin = 40.0;
    let mut world: Vec<Point2> = scenario.stations.iter().map(|s| s.position).collect();
    world.extend(scenario.cruise_points.iter().map(|p| p.position));
    world.push(scenario.start);
    world.push(scenario.finish);
    for (_, pts) in paths {
        world.extend_from_slice(pts);
    }
    let vb = ViewBox::fit(&world, size, margin);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" \
         viewBox=\"0 0 {size} {size}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for st in &scenario.stations {
        let (x, y) = vb.map(st.position, margin);
        svg.push_str(&format!(
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"#333\"/>\n",
            x - 5.0,
            y - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#333\">G{}</text>\n",
            x + 7.0,
            y - 7.0,
            st.id
        ));
    }
    let q_max = scenario
        .cruise_points
        .iter()
        .map(|p| p.data_bits)
        .fold(0.0, f64::max)
        .max(1.0);
    for p in &scenario.cruise_points {
        let (x, y) = vb.map(p.position, margin);
        let r = 2.5 + 4.0 * (p.data_bits / q_max);
        svg.push_str(&format!(
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{r:.2}\" fill=\"#999\" \
             fill-opacity=\"0.8\"/>\n"
        ));
    }
    for &(anchor, label) in &[(scenario.start, "S"), (scenario.finish, "F")] {
        let (x, y) = vb.map(anchor, margin);
        svg.push_str(&format!(
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"6\" fill=\"none\" stroke=\"#000\" \
             stroke-width=\"1.5\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#000\">{label}</text>\n",
            x + 8.0,
            y + 4.0
        ));
    }
    for (uav, pts) in paths {
        let color = PALETTE[(uav + PALETTE.len() - 1) % PALETTE.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|&p| {
                let (x, y) = vb.map(p, margin);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n",
            coords.join(" ")
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Renders one UAV's speed and best-rate series over mission time on a
/// shared time axis with independent vertical scales.
pub fn speed_rate_svg(uav: usize, series: &[(f64, f64, f64)]) -> String {
    let w = 800.0;
    let h = 400.0;
    let margin = 50.0;
    let t_max = series.last().map(|s| s.0).unwrap_or(1.0).max(1e-9);
    let v_max = series.iter().map(|s| s.1).fold(0.0, f64::max).max(1e-9);
    let r_max = series.iter().map(|s| s.2).fold(0.0, f64::max).max(1e-9);
    let sx = |t: f64| margin + (w - 2.0 * margin) * t / t_max;
    let sy = |frac: f64| h - margin - (h - 2.0 * margin) * frac;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<line x1=\"{margin}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"#000\"/>\n\
         <line x1=\"{margin}\" y1=\"{margin}\" x2=\"{margin}\" y2=\"{0}\" stroke=\"#000\"/>\n",
        h - margin,
        w - margin
    ));
    for (label, color, col) in [("speed (m/s)", PALETTE[0], 1usize), ("best rate (bit/s)", PALETTE[1], 2)] {
        let maxv = if col == 1 { v_max } else { r_max };
        let coords: Vec<String> = series
            .iter()
            .map(|&(t, v, r)| {
                let y = if col == 1 { v / maxv } else { r / maxv };
                format!("{:.2},{:.2}", sx(t), sy(y))
            })
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            coords.join(" ")
        ));
        let y_label = if col == 1 { 20.0 } else { 36.0 };
        svg.push_str(&format!(
            "<text x=\"{margin}\" y=\"{y_label}\" font-size=\"12\" fill=\"{color}\">uav {uav}: \
             {label}, max {maxv:.3e}</text>\n"
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#000\">t (s), total {t_max:.1}</text>\n",
        w / 2.0 - 40.0,
        h - margin + 30.0
    ));
    svg.push_str("</svg>\n");
    svg
}

fn mission_path(plan: &MissionPlan) -> Vec<Point2> {
    let mut pts = Vec::new();
    for seg in &plan.segments {
        for (i, &p) in seg.waypoints.iter().enumerate() {
            if i == 0 && !pts.is_empty() {
                continue; // shared with the previous segment's end
            }
            pts.push(p);
        }
    }
    pts
}

fn mission_series(scenario: &Scenario, plan: &MissionPlan) -> Vec<(f64, f64, f64)> {
    let mut t = 0.0;
    let mut out = Vec::new();
    for seg in &plan.segments {
        for l in 0..seg.slots() {
            t += seg.slot_s[l];
            out.push((
                t,
                seg.speed_mps(l),
                best_rate_bps(
                    seg.midpoint(l),
                    &scenario.stations,
                    &scenario.uav,
                    &scenario.channel,
                ),
            ));
        }
    }
    out
}

/// Writes the full artifact set for one run into `dir` and returns the
/// created paths.
pub fn emit_outputs(
    scenario: &Scenario,
    plans: &[MissionPlan],
    report: &EnergyReport,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();

    let traj = dir.join("trajectories.csv");
    write_trajectories_csv(scenario, plans, &traj)?;
    written.push(traj);

    let rep = dir.join("report.csv");
    write_report_csv(report, &rep)?;
    written.push(rep);

    let svg_path = dir.join("trajectories.svg");
    let paths: Vec<(usize, Vec<Point2>)> = plans
        .iter()
        .map(|p| (p.uav_id, mission_path(p)))
        .collect();
    std::fs::write(&svg_path, trajectories_svg(scenario, &paths)).map_err(io_err(&svg_path))?;
    written.push(svg_path);

    for plan in plans {
        let path = dir.join(format!("speed_rate_uav{}.svg", plan.uav_id));
        let series = mission_series(scenario, plan);
        std::fs::write(&path, speed_rate_svg(plan.uav_id, &series)).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}
