//! Minimal SVG line plots with axes.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f5fa8", "#c0392b", "#2e8b57", "#8e44ad", "#d35400", "#555555"];

pub struct Polyline {
    pub points: Vec<[f64; 2]>,
    pub color: usize,
    pub label: Option<String>,
    /// Thin, translucent stroke for background data.
    pub faint: bool,
}

impl Polyline {
    pub fn new(points: Vec<[f64; 2]>, color: usize) -> Self {
        Self { points, color, label: None, faint: false }
    }

    pub fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn faint(mut self) -> Self {
        self.faint = true;
        self
    }
}

/// Grayscale cells, `values[row][col]` in `[0, 1]`, row 0 at the bottom.
pub struct Heatmap {
    pub values: Vec<Vec<f64>>,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub lines: Vec<Polyline>,
    pub heatmap: Option<Heatmap>,
    /// Fixed data bounds; fitted to the data when absent.
    pub bounds: Option<([f64; 2], [f64; 2])>,
}

impl Figure {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            lines: Vec::new(),
            heatmap: None,
            bounds: None,
        }
    }

    fn data_bounds(&self) -> ([f64; 2], [f64; 2]) {
        if let Some(b) = self.bounds {
            return b;
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut grow = |p: [f64; 2]| {
            for a in 0..2 {
                if p[a].is_finite() {
                    lo[a] = lo[a].min(p[a]);
                    hi[a] = hi[a].max(p[a]);
                }
            }
        };
        for p in self.lines.iter().flat_map(|l| &l.points) {
            grow(*p);
        }
        if let Some(h) = &self.heatmap {
            grow([h.x_range.0, h.y_range.0]);
            grow([h.x_range.1, h.y_range.1]);
        }
        for a in 0..2 {
            if !(lo[a] < hi[a]) {
                let c = if lo[a].is_finite() { lo[a] } else { 0.0 };
                lo[a] = c - 0.5;
                hi[a] = c + 0.5;
            }
        }
        (lo, hi)
    }

    pub fn render(&self) -> String {
        let (lo, hi) = self.data_bounds();
        let plot_w = WIDTH - 2.0 * MARGIN;
        let plot_h = HEIGHT - 2.0 * MARGIN;
        let px = |x: f64| MARGIN + (x - lo[0]) / (hi[0] - lo[0]) * plot_w;
        let py = |y: f64| HEIGHT - MARGIN - (y - lo[1]) / (hi[1] - lo[1]) * plot_h;

        let mut out = String::new();
        let w = &mut out;
        writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#).unwrap();
        writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
        writeln!(w, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(&self.title)).unwrap();
        writeln!(w, r#"<clipPath id="plot"><rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}"/></clipPath>"#).unwrap();

        if let Some(h) = &self.heatmap {
            let rows = h.values.len();
            let cols = h.values.first().map_or(0, Vec::len);
            let cw = (h.x_range.1 - h.x_range.0) / cols.max(1) as f64;
            let ch = (h.y_range.1 - h.y_range.0) / rows.max(1) as f64;
            writeln!(w, r#"<g clip-path="url(#plot)" shape-rendering="crispEdges">"#).unwrap();
            for (r, row) in h.values.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    let level = (255.0 * (1.0 - v.clamp(0.0, 1.0))).round() as u8;
                    let (x0, x1) = (px(h.x_range.0 + c as f64 * cw), px(h.x_range.0 + (c + 1) as f64 * cw));
                    let (y0, y1) = (py(h.y_range.0 + (r + 1) as f64 * ch), py(h.y_range.0 + r as f64 * ch));
                    writeln!(
                        w,
                        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({level},{level},{level})"/>"#,
                        x0,
                        y0,
                        x1 - x0,
                        y1 - y0
                    )
                    .unwrap();
                }
            }
            writeln!(w, "</g>").unwrap();
        }

        // Axes, ticks and grid.
        writeln!(w, r##"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#000"/>"##).unwrap();
        for t in ticks(lo[0], hi[0]) {
            let x = px(t);
            writeln!(w, r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000"/>"##, HEIGHT - MARGIN, HEIGHT - MARGIN + 4.0).unwrap();
            writeln!(w, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, HEIGHT - MARGIN + 16.0, tick_label(t)).unwrap();
        }
        for t in ticks(lo[1], hi[1]) {
            let y = py(t);
            writeln!(w, r##"<line x1="{:.2}" y1="{y:.2}" x2="{MARGIN}" y2="{y:.2}" stroke="#000"/>"##, MARGIN - 4.0).unwrap();
            writeln!(w, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, MARGIN - 6.0, y + 4.0, tick_label(t)).unwrap();
        }
        writeln!(w, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 14.0, escape(&self.x_label)).unwrap();
        writeln!(w, r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#, HEIGHT / 2.0, escape(&self.y_label)).unwrap();

        writeln!(w, r#"<g clip-path="url(#plot)" fill="none" stroke-width="1.2">"#).unwrap();
        for line in &self.lines {
            let color = PALETTE[line.color % PALETTE.len()];
            // Break the path at non-finite vertices.
            let mut d = String::new();
            let mut pen_down = false;
            for p in &line.points {
                if !(p[0].is_finite() && p[1].is_finite()) {
                    pen_down = false;
                    continue;
                }
                write!(d, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, px(p[0]), py(p[1])).unwrap();
                pen_down = true;
            }
            if !d.is_empty() {
                let style = if line.faint { r#" stroke-width="0.6" stroke-opacity="0.35""# } else { "" };
                writeln!(w, r#"<path d="{}" stroke="{color}"{style}/>"#, d.trim_end()).unwrap();
            }
        }
        writeln!(w, "</g>").unwrap();

        let legend: Vec<&Polyline> = self.lines.iter().filter(|l| l.label.is_some()).collect();
        if !legend.is_empty() {
            writeln!(
                w,
                r##"<rect x="{}" y="{}" width="116" height="{}" fill="white" fill-opacity="0.85" stroke="#999"/>"##,
                WIDTH - MARGIN - 124.0,
                MARGIN + 2.0,
                14.0 * legend.len() as f64 + 6.0
            )
            .unwrap();
        }
        let mut legend_y = MARGIN + 14.0;
        for line in self.lines.iter().filter(|l| l.label.is_some()) {
            let color = PALETTE[line.color % PALETTE.len()];
            let x = WIDTH - MARGIN - 120.0;
            writeln!(w, r#"<line x1="{x}" y1="{0}" x2="{1}" y2="{0}" stroke="{color}" stroke-width="2"/>"#, legend_y - 4.0, x + 18.0).unwrap();
            writeln!(w, r#"<text x="{}" y="{legend_y}">{}</text>"#, x + 22.0, escape(line.label.as_deref().unwrap_or(""))).unwrap();
            legend_y += 14.0;
        }
        writeln!(w, "</svg>").unwrap();
        out
    }
}

/// Round tick positions (steps of 1, 2 or 5 times a power of ten).
pub fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0 && span.is_finite()) {
        return vec![lo];
    }
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 8.0).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let v = if v.abs() < 1e-12 { 0.0 } else { v };
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
