//! Static SVG of a 2D configuration space: CDF heatmap, collision region,
//! trajectories with start dots and goal stars.

use std::fmt::Write as _;
use std::path::Path;

use base64::Engine as _;

use crate::cdf::CdfField;
use crate::error::{Error, Result};
use crate::robot::{in_collision, Configuration, Scene};

/// Stroke colors, cycled in overlay order.
pub const PALETTE: [&str; 6] = [
    "#ff3b30", "#ffffff", "#ff9500", "#ff2d95", "#ffe600", "#00e5ff",
];

// Viridis control points.
const RAMP: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

const COLLISION_RGB: [u8; 3] = [24, 24, 24];
const PLOT_PX: f64 = 600.0;
const MARGIN: f64 = 60.0;
const BAR_W: f64 = 18.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOptions {
    /// Heatmap samples per axis.
    pub resolution: usize,
    /// Colormap bounds; defaults to `[0, max sampled value]`.
    pub value_range: Option<(f64, f64)>,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions {
            resolution: 400,
            value_range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Overlay {
    pub label: String,
    pub path: Vec<Configuration>,
    pub goal: Option<Configuration>,
}

/// Field value and collision state at one drawn trajectory vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexAudit {
    pub overlay: usize,
    pub vertex: usize,
    pub cdf_value: f64,
    pub in_collision: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub svg: String,
    pub audit: Vec<VertexAudit>,
}

impl Figure {
    /// Vertices drawn inside the collision region.
    pub fn colliding_vertices(&self) -> impl Iterator<Item = &VertexAudit> {
        self.audit.iter().filter(|a| a.in_collision)
    }
}

pub fn colormap(t: f64) -> [u8; 3] {
    let t = if t.is_finite() {
        t.clamp(0.0, 1.0)
    } else {
        1.0
    };
    let x = t * (RAMP.len() - 1) as f64;
    let i = (x.floor() as usize).min(RAMP.len() - 2);
    let f = x - i as f64;
    let mut out = [0u8; 3];
    for (c, o) in out.iter_mut().enumerate() {
        *o = (RAMP[i][c] + f * (RAMP[i + 1][c] - RAMP[i][c])).round() as u8;
    }
    out
}

fn hex([r, g, b]: [u8; 3]) -> String {
    format!("#{r:02x}{g:02x}{b:02x}")
}

struct Frame {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Frame {
    fn x(&self, q0: f64) -> f64 {
        MARGIN + (q0 - self.lo[0]) / (self.hi[0] - self.lo[0]) * PLOT_PX
    }

    fn y(&self, q1: f64) -> f64 {
        MARGIN + (self.hi[1] - q1) / (self.hi[1] - self.lo[1]) * PLOT_PX
    }
}

fn heatmap_png(
    field: &CdfField,
    scene: &Scene,
    frame: &Frame,
    opts: &PlotOptions,
) -> Result<(Vec<u8>, (f64, f64))> {
    let n = opts.resolution;
    let mut values = Vec::with_capacity(n * n);
    let mut hits = Vec::with_capacity(n * n);
    for row in 0..n {
        let q1 = frame.hi[1] - (row as f64 + 0.5) / n as f64 * (frame.hi[1] - frame.lo[1]);
        for col in 0..n {
            let q0 = frame.lo[0] + (col as f64 + 0.5) / n as f64 * (frame.hi[0] - frame.lo[0]);
            let q = [q0, q1];
            values.push(field.value(&q));
            hits.push(in_collision(scene, &q));
        }
    }
    let (vmin, vmax) = opts.value_range.unwrap_or_else(|| {
        let top = values
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max);
        (0.0, top)
    });
    let span = if vmax > vmin { vmax - vmin } else { 1.0 };
    let mut rgb = Vec::with_capacity(n * n * 3);
    for (v, hit) in values.iter().zip(&hits) {
        let c = if *hit {
            COLLISION_RGB
        } else {
            colormap((v - vmin) / span)
        };
        rgb.extend_from_slice(&c);
    }

    let mut png_bytes = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut png_bytes, n as u32, n as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc
            .write_header()
            .map_err(|e| Error::InvalidParameter(format!("png encoding: {e}")))?;
        w.write_image_data(&rgb)
            .map_err(|e| Error::InvalidParameter(format!("png encoding: {e}")))?;
    }
    Ok((png_bytes, (vmin, vmax)))
}

fn star(cx: f64, cy: f64, r: f64) -> String {
    (0..10)
        .map(|k| {
            let rad = if k % 2 == 0 { r } else { r * 0.45 };
            let a = -std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI / 5.0;
            format!("{:.2},{:.2}", cx + rad * a.cos(), cy + rad * a.sin())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders the field over the joint box with `overlays` on top. Every
/// drawn vertex is audited against the field and the scene.
pub fn render_config_space(
    field: &CdfField,
    scene: &Scene,
    overlays: &[Overlay],
    opts: &PlotOptions,
) -> Result<Figure> {
    if field.dim() != 2 {
        return Err(Error::UnsupportedDimension(field.dim()));
    }
    field.ensure_compatible(scene)?;
    if opts.resolution == 0 {
        return Err(Error::InvalidParameter(
            "plot resolution must be positive".into(),
        ));
    }
    if let Some((lo, hi)) = opts.value_range {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "colormap bounds [{lo}, {hi}] are not an interval"
            )));
        }
    }
    let b = field.bounds();
    let frame = Frame {
        lo: [b.min[0], b.min[1]],
        hi: [b.max[0], b.max[1]],
    };
    let (png_bytes, (vmin, vmax)) = heatmap_png(field, scene, &frame, opts)?;

    let width = MARGIN * 2.0 + PLOT_PX + BAR_W + 60.0;
    let height = MARGIN * 2.0 + PLOT_PX;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<image x="{MARGIN}" y="{MARGIN}" width="{PLOT_PX}" height="{PLOT_PX}" preserveAspectRatio="none" style="image-rendering:pixelated" href="data:image/png;base64,{}"/>"#,
        base64::engine::general_purpose::STANDARD.encode(&png_bytes)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{PLOT_PX}" height="{PLOT_PX}" fill="none" stroke="black"/>"#
    );

    // Axes.
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let q0 = frame.lo[0] + f * (frame.hi[0] - frame.lo[0]);
        let q1 = frame.lo[1] + f * (frame.hi[1] - frame.lo[1]);
        let (x, y) = (frame.x(q0), frame.y(q1));
        let bottom = MARGIN + PLOT_PX;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{bottom}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{q0:.2}</text>"#,
            bottom + 5.0,
            bottom + 20.0
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{MARGIN}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{q1:.2}</text>"#,
            MARGIN - 5.0,
            MARGIN - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">q0 (rad)</text>"#,
        MARGIN + PLOT_PX / 2.0,
        height - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">q1 (rad)</text>"#,
        MARGIN + PLOT_PX / 2.0,
        MARGIN + PLOT_PX / 2.0
    );

    // Colorbar, top = vmax.
    let bar_x = MARGIN + PLOT_PX + 20.0;
    let _ = writeln!(
        s,
        r#"<defs><linearGradient id="cdf" x1="0" y1="1" x2="0" y2="0">"#
    );
    for k in 0..=10 {
        let t = k as f64 / 10.0;
        let _ = writeln!(
            s,
            r#"<stop offset="{t:.1}" stop-color="{}"/>"#,
            hex(colormap(t))
        );
    }
    let _ = writeln!(s, "</linearGradient></defs>");
    let _ = writeln!(
        s,
        r#"<rect x="{bar_x}" y="{MARGIN}" width="{BAR_W}" height="{PLOT_PX}" fill="url(#cdf)" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}">{vmax:.2}</text><text x="{:.2}" y="{:.2}">{vmin:.2}</text>"#,
        bar_x + BAR_W + 4.0,
        MARGIN + 10.0,
        bar_x + BAR_W + 4.0,
        MARGIN + PLOT_PX
    );

    let mut audit = Vec::new();
    for (i, o) in overlays.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<g class="trajectory"><title>{}</title>"#,
            escape(&o.label)
        );
        for (v, q) in o.path.iter().enumerate() {
            if q.len() != 2 {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    actual: q.len(),
                });
            }
            audit.push(VertexAudit {
                overlay: i,
                vertex: v,
                cdf_value: field.value(q.as_slice()),
                in_collision: in_collision(scene, q.as_slice()),
            });
        }
        if !o.path.is_empty() {
            let pts = o
                .path
                .iter()
                .map(|q| format!("{:.2},{:.2}", frame.x(q[0]), frame.y(q[1])))
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(
                s,
                r#"<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2" stroke-linejoin="round"/>"#
            );
            let q = &o.path[0];
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="5" fill="{color}" stroke="black"/>"#,
                frame.x(q[0]),
                frame.y(q[1])
            );
        }
        if let Some(g) = &o.goal {
            if g.len() != 2 {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    actual: g.len(),
                });
            }
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{color}" stroke="black"/>"#,
                star(frame.x(g[0]), frame.y(g[1]), 9.0)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}" stroke="black" stroke-width="0.3">{}</text></g>"#,
            MARGIN + 8.0,
            MARGIN + 18.0 + 16.0 * i as f64,
            escape(&o.label)
        );
    }
    s.push_str("</svg>\n");
    Ok(Figure { svg: s, audit })
}

pub fn write_svg(figure: &Figure, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, &figure.svg).map_err(|e| Error::io(path, e))
}
