//! Static SVG figure: ground track over the polygon, then SoC and power traces.

use std::fmt::Write as _;

use crate::geometry::Polygon;

use super::{Telemetry, TelemetryRow};

type Trace = (&'static str, fn(&TelemetryRow) -> f64, &'static str);

const W: f64 = 640.0;
const MAP_H: f64 = 480.0;
const TRACE_H: f64 = 160.0;
const PAD: f64 = 20.0;

fn polyline(points: impl Iterator<Item = (f64, f64)>, color: &str) -> String {
    let mut s = String::from("<polyline fill=\"none\" stroke-width=\"1\" stroke=\"");
    s.push_str(color);
    s.push_str("\" points=\"");
    for (x, y) in points {
        let _ = write!(s, "{x:.2},{y:.2} ");
    }
    s.push_str("\"/>\n");
    s
}

/// Renders the run. Vertical axes of the traces are scaled to their data range.
pub fn render(polygon: &Polygon, telemetry: &Telemetry) -> String {
    let (lo, hi) = polygon.bounding_box();
    let (mut x0, mut y0, mut x1, mut y1) = (lo.x, lo.y, hi.x, hi.y);
    for r in &telemetry.rows {
        x0 = x0.min(r.x);
        x1 = x1.max(r.x);
        y0 = y0.min(r.y);
        y1 = y1.max(r.y);
    }
    let scale = ((W - 2.0 * PAD) / (x1 - x0).max(1e-9)).min((MAP_H - 2.0 * PAD) / (y1 - y0).max(1e-9));
    let map = |x: f64, y: f64| (PAD + (x - x0) * scale, MAP_H - PAD - (y - y0) * scale);

    let total_h = MAP_H + 2.0 * TRACE_H;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{total_h}\" viewBox=\"0 0 {W} {total_h}\">"
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let mut poly = polygon.vertices().iter().map(|v| map(v.x, v.y)).collect::<Vec<_>>();
    poly.push(poly[0]);
    out.push_str(&polyline(poly.into_iter(), "gray"));
    out.push_str(&polyline(telemetry.rows.iter().map(|r| map(r.x, r.y)), "steelblue"));

    let t_end = telemetry.rows.last().map(|r| r.t).unwrap_or(1.0).max(1e-9);
    let traces: [Trace; 2] = [("SoC", |r| r.soc, "green"), ("power [W]", |r| r.upsilon_w, "darkred")];
    for (k, (label, get, color)) in traces.iter().enumerate() {
        let top = MAP_H + k as f64 * TRACE_H;
        let (mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY);
        for r in &telemetry.rows {
            v0 = v0.min(get(r));
            v1 = v1.max(get(r));
        }
        if !(v1 > v0) {
            v1 = v0 + 1.0;
        }
        let _ = writeln!(
            out,
            "<text x=\"{PAD}\" y=\"{:.1}\" font-size=\"12\">{label} [{v0:.3}, {v1:.3}]</text>",
            top + 14.0
        );
        let pts = telemetry.rows.iter().map(|r| {
            let x = PAD + r.t / t_end * (W - 2.0 * PAD);
            let y = top + TRACE_H - PAD - (get(r) - v0) / (v1 - v0) * (TRACE_H - 2.0 * PAD);
            (x, y)
        });
        out.push_str(&polyline(pts, color));
    }
    out.push_str("</svg>\n");
    out
}
