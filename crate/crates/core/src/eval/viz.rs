use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use super::record::{EpisodeRecord, StepEntry};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::scan::{PooledScan, D_MAX, N_GROUPS};
use crate::nn::N_SECTORS;

const PX_PER_M: f64 = 60.0;
const MARGIN_PX: f64 = 20.0;

/// Weight scaled to `[0, 1]` by the largest weight of its stream.
pub fn intensities(weights: &[f64]) -> Vec<f64> {
    let max = weights.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return vec![0.0; weights.len()];
    }
    weights.iter().map(|w| w / max).collect()
}

/// Low intensity renders blue, high renders red.
fn color(intensity: f64) -> String {
    let i = intensity.clamp(0.0, 1.0);
    format!(
        "rgb({},{},{})",
        (40.0 + 215.0 * i).round(),
        (80.0 * (1.0 - i)).round() + 40.0,
        (255.0 * (1.0 - i)).round()
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Visualization {
    pub svg: String,
    /// `step,stream,index,weight,intensity` rows.
    pub weight_table: String,
}

struct Canvas {
    min: Point2,
    height_px: f64,
}

impl Canvas {
    fn px(&self, p: Point2) -> (f64, f64) {
        (
            MARGIN_PX + (p.x - self.min.x) * PX_PER_M,
            self.height_px - MARGIN_PX - (p.y - self.min.y) * PX_PER_M,
        )
    }
}

fn has_weights(s: &StepEntry) -> bool {
    !(s.spatial_weights.is_empty() && s.temporal_weights.is_empty() && s.previous_spatial_weights.is_empty())
}

/// Renders the scene at the last step of `range` (walls, pedestrians,
/// trajectory, beams tinted by spatial weight, TAGD rays tinted by temporal
/// weight) and tabulates the weights of every step in `range`.
pub fn export_visualization(record: &EpisodeRecord, range: Range<usize>) -> Result<Visualization> {
    let steps: Vec<&StepEntry> = record.steps.iter().filter(|s| range.contains(&s.step)).collect();
    let Some(&focus) = steps.last() else {
        return Err(Error::Usage(format!(
            "record has no steps in {}..{} (it holds {})",
            range.start,
            range.end,
            record.steps.len()
        )));
    };
    if !steps.iter().all(|s| has_weights(s)) {
        return Err(Error::Usage(
            "record carries no attention weights; re-run the evaluation with a network policy".into(),
        ));
    }

    let weight_table = weight_table(&steps);
    let svg = render_svg(record, &steps, focus);
    Ok(Visualization { svg, weight_table })
}

fn weight_table(steps: &[&StepEntry]) -> String {
    let mut out = String::from("step,stream,index,weight,intensity\n");
    for s in steps {
        for (name, w) in [
            ("spatial", &s.spatial_weights),
            ("temporal", &s.temporal_weights),
            ("previous_spatial", &s.previous_spatial_weights),
        ] {
            for (i, (wi, ii)) in w.iter().zip(intensities(w)).enumerate() {
                let _ = writeln!(out, "{},{name},{i},{wi:e},{ii:e}", s.step);
            }
        }
    }
    out
}

fn render_svg(record: &EpisodeRecord, steps: &[&StepEntry], focus: &StepEntry) -> String {
    let mut pts: Vec<Point2> = record.walls.iter().flat_map(|w| [w.min, w.max]).collect();
    pts.extend(record.robot_path.iter().copied());
    pts.extend(steps.iter().map(|s| s.pose.position));
    let reach = Point2::new(D_MAX, D_MAX);
    pts.push(focus.pose.position - reach);
    pts.push(focus.pose.position + reach);
    let min = pts.iter().fold(Point2::new(f64::INFINITY, f64::INFINITY), |a, p| Point2::new(a.x.min(p.x), a.y.min(p.y)));
    let max = pts.iter().fold(Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY), |a, p| {
        Point2::new(a.x.max(p.x), a.y.max(p.y))
    });
    let width_px = (max.x - min.x) * PX_PER_M + 2.0 * MARGIN_PX;
    let height_px = (max.y - min.y) * PX_PER_M + 2.0 * MARGIN_PX;
    let c = Canvas { min, height_px };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width_px:.0}" height="{height_px:.0}" viewBox="0 0 {width_px:.1} {height_px:.1}">"##
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="white"/>"##);
    let _ = writeln!(s, r##"<g id="walls" fill="#555">"##);
    for w in &record.walls {
        let (x0, y1) = c.px(w.min);
        let (x1, y0) = c.px(w.max);
        let _ = writeln!(s, r##"<rect x="{x0:.1}" y="{y0:.1}" width="{:.1}" height="{:.1}"/>"##, x1 - x0, y1 - y0);
    }
    let _ = writeln!(s, "</g>");

    let path: Vec<String> = record.robot_path.iter().map(|p| {
        let (x, y) = c.px(*p);
        format!("{x:.1},{y:.1}")
    }).collect();
    let _ = writeln!(s, r##"<polyline id="plan" points="{}" fill="none" stroke="#8c8" stroke-dasharray="4 3"/>"##, path.join(" "));

    let origin = focus.pose.position;
    let (ox, oy) = c.px(origin);
    if !focus.spatial_weights.is_empty() {
        let inten = intensities(&focus.spatial_weights);
        let per_sector = 180 / N_SECTORS;
        let _ = writeln!(s, r##"<g id="beams" stroke-width="1.5" stroke-opacity="0.8">"##);
        for beam in 0..180 {
            let r = focus.scan_ranges.as_ref().map_or(D_MAX, |rs| rs[beam]);
            let theta = focus.pose.heading + PooledScan::block_angle(beam);
            let end = origin + Point2::new(theta.cos(), theta.sin()) * r;
            let (x, y) = c.px(end);
            let _ = writeln!(
                s,
                r##"<line data-sector="{}" x1="{ox:.1}" y1="{oy:.1}" x2="{x:.1}" y2="{y:.1}" stroke="{}"/>"##,
                beam / per_sector,
                color(inten[beam / per_sector])
            );
        }
        let _ = writeln!(s, "</g>");
    }
    if !focus.temporal_weights.is_empty() {
        let inten = intensities(&focus.temporal_weights);
        let _ = writeln!(s, r##"<g id="tagd" stroke-width="3">"##);
        for i in 0..N_GROUPS {
            let end = match &focus.tagd_centroids {
                Some(c_list) => focus.pose.local_to_world(c_list[i].1),
                None => {
                    let theta = focus.pose.heading + std::f64::consts::TAU * i as f64 / N_GROUPS as f64;
                    origin + Point2::new(theta.cos(), theta.sin()) * D_MAX
                }
            };
            let (x, y) = c.px(end);
            let _ = writeln!(
                s,
                r##"<line data-group="{i}" x1="{ox:.1}" y1="{oy:.1}" x2="{x:.1}" y2="{y:.1}" stroke="{}" stroke-opacity="{:.3}"/>"##,
                color(inten[i]),
                0.25 + 0.75 * inten[i]
            );
        }
        let _ = writeln!(s, "</g>");
    }

    let (hx, hy) = record.pedestrian_half_extent;
    let _ = writeln!(s, r##"<g id="pedestrians" fill="#e90">"##);
    for p in &focus.pedestrians {
        let (x0, y1) = c.px(*p - Point2::new(hx, hy));
        let (x1, y0) = c.px(*p + Point2::new(hx, hy));
        let _ = writeln!(s, r##"<rect x="{x0:.1}" y="{y0:.1}" width="{:.1}" height="{:.1}"/>"##, x1 - x0, y1 - y0);
    }
    let _ = writeln!(s, "</g>");

    let traj: Vec<String> = steps.iter().map(|st| {
        let (x, y) = c.px(st.pose.position);
        format!("{x:.1},{y:.1}")
    }).collect();
    let _ = writeln!(s, r##"<polyline id="trajectory" points="{}" fill="none" stroke="#06c" stroke-width="2"/>"##, traj.join(" "));
    let _ = writeln!(
        s,
        r##"<circle id="robot" cx="{ox:.1}" cy="{oy:.1}" r="{:.1}" fill="#06c" stroke="black"/>"##,
        record.robot_radius * PX_PER_M
    );
    if let Some(goal) = record.robot_path.last() {
        let (gx, gy) = c.px(*goal);
        let _ = writeln!(s, r##"<circle id="goal" cx="{gx:.1}" cy="{gy:.1}" r="6" fill="none" stroke="green" stroke-width="2"/>"##);
    }
    let _ = writeln!(s, "</svg>");
    s
}

/// Writes `<stem>.svg` and `<stem>.csv` under `dir`.
pub fn write_visualization(viz: &Visualization, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let svg = dir.join(format!("{stem}.svg"));
    let csv = dir.join(format!("{stem}.csv"));
    fs::write(&svg, &viz.svg)?;
    fs::write(&csv, &viz.weight_table)?;
    Ok((svg, csv))
}
