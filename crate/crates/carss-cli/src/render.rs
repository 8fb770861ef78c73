//! SVG rendering of a solved instance: solid colored subpaths per agent,
//! dashed merge edges, red start markers, hollow isolated markers.

use crate::{AppError, AppResult};
use carss_core::env::trace::RolloutTrace;
use carss_core::Instance;
use std::fmt::Write as _;

/// Drawing options.
#[derive(Debug, Clone)]
pub struct RenderSpec {
    pub size: f64,
    pub margin: f64,
    pub vertex_radius: f64,
    pub marker_radius: f64,
    /// One stroke color per agent; extended by HSL rotation when K exceeds
    /// the palette.
    pub palette: Vec<String>,
}

impl Default for RenderSpec {
    fn default() -> Self {
        Self {
            size: 800.0,
            margin: 24.0,
            vertex_radius: 3.5,
            marker_radius: 6.0,
            palette: vec![
                "#1f77b4".into(),
                "#2ca02c".into(),
                "#9467bd".into(),
                "#ff7f0e".into(),
                "#17becf".into(),
                "#8c564b".into(),
            ],
        }
    }
}

impl RenderSpec {
    fn color(&self, agent: usize) -> String {
        if agent < self.palette.len() {
            self.palette[agent].clone()
        } else {
            format!("hsl({}, 70%, 42%)", (agent * 47) % 360)
        }
    }
}

/// Render a terminal rollout trace. The drawn edge count always equals the
/// vertex count: `K*T'` solid subpath edges plus `K+|I|` dashed merge
/// edges.
pub fn render_svg(inst: &Instance, trace: &RolloutTrace, spec: &RenderSpec) -> AppResult<String> {
    if trace.tour.len() != inst.n() {
        return Err(AppError::Data(format!(
            "trace is not terminal: tour has {} of {} vertices",
            trace.tour.len(),
            inst.n()
        )));
    }
    let total = spec.size + 2.0 * spec.margin;
    // instances may exceed the unit square; scale to the bounding box
    let (mut min_x, mut min_y, mut max_x, mut max_y) = (0.0f64, 0.0f64, 1.0f64, 1.0f64);
    if !inst.in_unit_square() {
        min_x = f64::INFINITY;
        min_y = f64::INFINITY;
        max_x = f64::NEG_INFINITY;
        max_y = f64::NEG_INFINITY;
        for p in inst.coords() {
            min_x = min_x.min(p[0]);
            max_x = max_x.max(p[0]);
            min_y = min_y.min(p[1]);
            max_y = max_y.max(p[1]);
        }
    }
    let span_x = (max_x - min_x).max(1e-12);
    let span_y = (max_y - min_y).max(1e-12);
    let place = |v: usize| -> (f64, f64) {
        let p = inst.point(v);
        (
            spec.margin + (p[0] - min_x) / span_x * spec.size,
            // SVG y grows downward; flip so the drawing matches the plane
            spec.margin + (1.0 - (p[1] - min_y) / span_y) * spec.size,
        )
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{total}" height="{total}" fill="white"/>"#
    );

    // solid subpath edges, one color per agent
    for (agent, path) in trace.subpaths.iter().enumerate() {
        let color = spec.color(agent);
        for w in path.windows(2) {
            let (x1, y1) = place(w[0]);
            let (x2, y2) = place(w[1]);
            let _ = writeln!(
                s,
                r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{color}" stroke-width="2.5" class="subpath"/>"#
            );
        }
    }
    // dashed merge edges
    for edge in &trace.merge_edges {
        let (x1, y1) = place(edge.p_orig);
        let (x2, y2) = place(edge.q_orig);
        let _ = writeln!(
            s,
            r##"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="#444444" stroke-width="1.8" stroke-dasharray="7 5" class="merge"/>"##
        );
    }
    // vertices: plain dots, hollow isolated markers, red start markers
    for v in 0..inst.n() {
        let (x, y) = place(v);
        if trace.starts.contains(&v) {
            let _ = writeln!(
                s,
                r##"<circle cx="{x:.2}" cy="{y:.2}" r="{}" fill="#d62728" class="start"/>"##,
                spec.marker_radius
            );
        } else if trace.isolated.contains(&v) {
            let _ = writeln!(
                s,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="{}" fill="white" stroke="black" stroke-width="1.8" class="isolated"/>"#,
                spec.marker_radius
            );
        } else {
            let _ = writeln!(
                s,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="{}" fill="black" class="vertex"/>"#,
                spec.vertex_radius
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="monospace" font-size="14">{} n={} K={} length={:.4}</text>"#,
        spec.margin,
        total - 6.0,
        xml_escape(&trace.instance_id),
        trace.n,
        trace.k,
        trace.length
    );
    let _ = writeln!(s, "</svg>");
    Ok(s)
}

fn xml_escape(raw: &str) -> String {
    raw.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
