//! Deterministic SVG renderers: top-down trajectory figures and the reward
//! landscape heatmap.
//!
//! Colors follow the documented convention: drone path blue, pad path red,
//! impeller position green. Rendering is a pure function of its inputs, so
//! re-rendering identical data produces byte-identical files.

use crate::eval::EpisodeRecord;
use crate::reward::RewardLandscape;

const SIZE: f64 = 600.0;
const MARGIN: f64 = 40.0;

struct Frame {
    min_x: f64,
    min_y: f64,
    scale: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Frame {
        let mut min_x = f64::INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let mut min_y = f64::INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        for (x, y) in points {
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(y);
            max_y = max_y.max(y);
        }
        if !min_x.is_finite() {
            (min_x, max_x, min_y, max_y) = (-1.0, 1.0, -1.0, 1.0);
        }
        // Keep degenerate extents plottable (static pads are single points).
        let span = (max_x - min_x).max(max_y - min_y).max(0.2);
        let scale = (SIZE - 2.0 * MARGIN) / span;
        Frame {
            min_x: 0.5 * (min_x + max_x) - 0.5 * span,
            min_y: 0.5 * (min_y + max_y) - 0.5 * span,
            scale,
        }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (
            MARGIN + (x - self.min_x) * self.scale,
            // SVG y grows downward.
            SIZE - MARGIN - (y - self.min_y) * self.scale,
        )
    }
}

fn polyline(frame: &Frame, pts: &[(f64, f64)], color: &str, width: f64) -> String {
    if pts.is_empty() {
        return String::new();
    }
    if pts.len() == 1 || pts.iter().all(|p| *p == pts[0]) {
        let (cx, cy) = frame.map(pts[0].0, pts[0].1);
        return format!("<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"4\" fill=\"{color}\"/>\n");
    }
    let coords: Vec<String> = pts
        .iter()
        .map(|&(x, y)| {
            let (sx, sy) = frame.map(x, y);
            format!("{sx:.2},{sy:.2}")
        })
        .collect();
    format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"/>\n",
        coords.join(" ")
    )
}

/// Top-down (XY) figure of one episode: drone path in blue, pad path in red,
/// impeller position in green.
pub fn trajectory_svg(record: &EpisodeRecord) -> String {
    let drone: Vec<(f64, f64)> = record
        .rows
        .iter()
        .map(|r| (r.drone_pos[0], r.drone_pos[1]))
        .collect();
    let pad: Vec<(f64, f64)> = record
        .rows
        .iter()
        .map(|r| (r.pad_pos[0], r.pad_pos[1]))
        .collect();
    let impeller: Vec<(f64, f64)> = match record.impeller_offset {
        Some(off) => record
            .rows
            .iter()
            .map(|r| (r.pad_pos[0] + off[0], r.pad_pos[1] + off[1]))
            .collect(),
        None => Vec::new(),
    };

    let frame = Frame::fit(
        drone
            .iter()
            .chain(pad.iter())
            .chain(impeller.iter())
            .copied(),
    );

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n\
         <rect width=\"{SIZE}\" height=\"{SIZE}\" fill=\"white\"/>\n"
    );
    svg.push_str(&polyline(&frame, &pad, "red", 2.0));
    svg.push_str(&polyline(&frame, &drone, "blue", 1.5));
    if !impeller.is_empty() {
        svg.push_str(&polyline(&frame, &impeller, "green", 2.0));
    }
    // Touchdown marker.
    if let Some(last) = record.rows.last() {
        if record.landed() {
            let (cx, cy) = frame.map(last.drone_pos[0], last.drone_pos[1]);
            svg.push_str(&format!(
                "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"5\" fill=\"none\" stroke=\"blue\" stroke-width=\"1.5\"/>\n"
            ));
        }
    }
    svg.push_str(&format!(
        "<text x=\"{MARGIN}\" y=\"24\" font-family=\"monospace\" font-size=\"14\">{} episode {} — {}</text>\n",
        record.scenario,
        record.episode_index,
        record.outcome.as_str()
    ));
    let legend = [
        ("blue", "drone"),
        ("red", "landing pad"),
        ("green", "impeller"),
    ];
    for (i, (color, label)) in legend.iter().enumerate() {
        let y = 44.0 + 18.0 * i as f64;
        svg.push_str(&format!(
            "<rect x=\"{MARGIN}\" y=\"{:.1}\" width=\"12\" height=\"4\" fill=\"{color}\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"12\">{label}</text>\n",
            y,
            MARGIN + 18.0,
            y + 5.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Map a reward in (−1, 1) onto a dark-purple → teal → yellow ramp.
fn ramp(value: f64) -> String {
    let t = ((value + 1.0) * 0.5).clamp(0.0, 1.0);
    let stops = [(68u8, 1u8, 84u8), (33u8, 145u8, 140u8), (253u8, 231u8, 37u8)];
    let (lo, hi, frac) = if t < 0.5 {
        (stops[0], stops[1], t * 2.0)
    } else {
        (stops[1], stops[2], (t - 0.5) * 2.0)
    };
    let lerp = |a: u8, b: u8| -> u8 { (a as f64 + (b as f64 - a as f64) * frac).round() as u8 };
    format!("#{:02x}{:02x}{:02x}", lerp(lo.0, hi.0), lerp(lo.1, hi.1), lerp(lo.2, hi.2))
}

/// Reward landscape as a colored-cell heatmap.
pub fn landscape_svg(land: &RewardLandscape) -> String {
    let n = land.xs.len();
    let cell = (SIZE - 2.0 * MARGIN) / n as f64;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n\
         <rect width=\"{SIZE}\" height=\"{SIZE}\" fill=\"white\"/>\n"
    );
    for (iy, _) in land.ys.iter().enumerate() {
        for (ix, _) in land.xs.iter().enumerate() {
            let v = land.values[iy * n + ix];
            let x = MARGIN + ix as f64 * cell;
            // Row 0 is the smallest y; draw it at the bottom.
            let y = SIZE - MARGIN - (iy + 1) as f64 * cell;
            svg.push_str(&format!(
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>\n",
                cell + 0.05,
                cell + 0.05,
                ramp(v)
            ));
        }
    }
    svg.push_str(&format!(
        "<text x=\"{MARGIN}\" y=\"24\" font-family=\"monospace\" font-size=\"14\">reward landscape (XY, stationary contexts)</text>\n"
    ));
    svg.push_str("</svg>\n");
    svg
}

/// Landscape sample grid as `x,y,reward` CSV.
pub fn landscape_csv(land: &RewardLandscape) -> String {
    let n = land.xs.len();
    let mut out = String::from("x,y,reward\n");
    for (iy, y) in land.ys.iter().enumerate() {
        for (ix, x) in land.xs.iter().enumerate() {
            out.push_str(&format!("{x},{y},{}\n", land.values[iy * n + ix]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{run_episode, scenario_by_name, Controller};
    use crate::reward::{export_reward_landscape, LandscapeGrid, RewardParams};

    fn sample_record() -> EpisodeRecord {
        let scenario = scenario_by_name("SPL-WD-4500").unwrap();
        let base = crate::eval::tests::base_setup();
        run_episode(&Controller::ScriptedOracle, &scenario, &base, 0).unwrap()
    }

    #[test]
    fn trajectory_render_is_byte_stable() {
        let record = sample_record();
        let a = trajectory_svg(&record);
        let b = trajectory_svg(&record);
        assert_eq!(a, b);
        assert!(a.contains("\"blue\""));
        assert!(a.contains("\"red\""));
        assert!(a.contains("\"green\""), "impeller scenario must draw green");
        assert!(a.starts_with("<svg"));
        assert!(a.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn static_pad_renders_as_point() {
        let scenario = scenario_by_name("SPL").unwrap();
        let base = crate::eval::tests::base_setup();
        let record = run_episode(&Controller::ZeroAction, &scenario, &base, 0).unwrap();
        let svg = trajectory_svg(&record);
        // The pad polyline collapses to a circle marker.
        assert!(svg.contains("<circle") && svg.contains("fill=\"red\""), "{svg}");
    }

    #[test]
    fn landscape_outputs_are_deterministic_and_bounded() {
        let params = RewardParams::default();
        let grid = LandscapeGrid {
            half_extent: 2.0,
            resolution: 21,
        };
        let land = export_reward_landscape(&params, &grid).unwrap();
        assert_eq!(landscape_svg(&land), landscape_svg(&land));
        let csv = landscape_csv(&land);
        assert_eq!(csv.lines().count(), 21 * 21 + 1);
        let reparsed: Vec<f64> = csv
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
            .collect();
        assert_eq!(reparsed.len(), land.values.len());
        for (a, b) in reparsed.iter().zip(&land.values) {
            assert_eq!(a, b, "CSV must round-trip reward values exactly");
        }
    }

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp(-1.0), "#440154");
        assert_eq!(ramp(1.0), "#fde725");
    }
}
