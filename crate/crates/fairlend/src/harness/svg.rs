//! Minimal static SVG line charts, written directly without a plotting
//! dependency.

use std::path::Path;

use crate::error::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

/// One polyline on a chart.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    /// CSS color.
    pub color: String,
    pub stroke_width: f64,
    pub opacity: f64,
    /// Whether the label appears in the legend.
    pub in_legend: bool,
    pub points: Vec<(f64, f64)>,
}

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let magnitude = v.abs();
    if magnitude >= 1000.0 || magnitude < 0.01 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Render one chart with shared axes for all series.
pub fn render_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if !x_min.is_finite() {
        x_min = 0.0;
        x_max = 1.0;
    }
    if !y_min.is_finite() {
        y_min = 0.0;
        y_max = 1.0;
    }
    if (x_max - x_min).abs() < 1e-12 {
        x_max = x_min + 1.0;
    }
    if (y_max - y_min).abs() < 1e-12 {
        y_max = y_min + 1.0;
        y_min -= 1.0;
    } else {
        let pad = 0.05 * (y_max - y_min);
        y_min -= pad;
        y_max += pad;
    }

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = move |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = move |y: f64| MARGIN_TOP + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
         width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"16\">{title}</text>\n",
        MARGIN_LEFT + plot_w / 2.0
    ));

    // Axes.
    out.push_str(&format!(
        "<line x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
        l = fmt(MARGIN_LEFT),
        r = fmt(MARGIN_LEFT + plot_w),
        b = fmt(MARGIN_TOP + plot_h)
    ));
    out.push_str(&format!(
        "<line x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b}\" stroke=\"black\"/>\n",
        l = fmt(MARGIN_LEFT),
        t = fmt(MARGIN_TOP),
        b = fmt(MARGIN_TOP + plot_h)
    ));

    // Ticks and grid.
    const TICKS: usize = 5;
    for i in 0..=TICKS {
        let frac = i as f64 / TICKS as f64;
        let xv = x_min + frac * (x_max - x_min);
        let yv = y_min + frac * (y_max - y_min);
        let xp = sx(xv);
        let yp = sy(yv);
        out.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{b}\" x2=\"{x}\" y2=\"{b2}\" stroke=\"black\"/>\n",
            x = fmt(xp),
            b = fmt(MARGIN_TOP + plot_h),
            b2 = fmt(MARGIN_TOP + plot_h + 5.0)
        ));
        out.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"11\">{label}</text>\n",
            x = fmt(xp),
            y = fmt(MARGIN_TOP + plot_h + 18.0),
            label = tick_label(xv)
        ));
        out.push_str(&format!(
            "<line x1=\"{l}\" y1=\"{y}\" x2=\"{l2}\" y2=\"{y}\" stroke=\"black\"/>\n",
            l = fmt(MARGIN_LEFT - 5.0),
            l2 = fmt(MARGIN_LEFT),
            y = fmt(yp)
        ));
        out.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" text-anchor=\"end\" font-family=\"sans-serif\" \
             font-size=\"11\">{label}</text>\n",
            x = fmt(MARGIN_LEFT - 8.0),
            y = fmt(yp + 4.0),
            label = tick_label(yv)
        ));
        out.push_str(&format!(
            "<line x1=\"{l}\" y1=\"{y}\" x2=\"{r}\" y2=\"{y}\" stroke=\"#dddddd\" \
             stroke-width=\"0.5\"/>\n",
            l = fmt(MARGIN_LEFT),
            r = fmt(MARGIN_LEFT + plot_w),
            y = fmt(yp)
        ));
    }

    // Axis titles.
    out.push_str(&format!(
        "<text x=\"{x}\" y=\"{y}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\">{x_label}</text>\n",
        x = fmt(MARGIN_LEFT + plot_w / 2.0),
        y = fmt(HEIGHT - 12.0)
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{y}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\" transform=\"rotate(-90 18 {y})\">{y_label}</text>\n",
        y = fmt(MARGIN_TOP + plot_h / 2.0)
    ));

    // Series polylines.
    for s in series {
        if s.points.is_empty() {
            continue;
        }
        let points: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt(sx(x)), fmt(sy(y))))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"{w}\" \
             stroke-opacity=\"{o}\" points=\"{pts}\"/>\n",
            color = s.color,
            w = fmt(s.stroke_width),
            o = fmt(s.opacity),
            pts = points.join(" ")
        ));
    }

    // Legend.
    let mut slot = 0usize;
    for s in series.iter().filter(|s| s.in_legend) {
        let y = MARGIN_TOP + 10.0 + slot as f64 * 20.0;
        let x = MARGIN_LEFT + plot_w + 12.0;
        out.push_str(&format!(
            "<line x1=\"{x1}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"{color}\" \
             stroke-width=\"2.5\"/>\n",
            x1 = fmt(x),
            x2 = fmt(x + 22.0),
            y = fmt(y),
            color = s.color
        ));
        out.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"12\">{label}</text>\n",
            x = fmt(x + 28.0),
            y = fmt(y + 4.0),
            label = s.label
        ));
        slot += 1;
    }

    out.push_str("</svg>\n");
    out
}

/// Write a rendered chart to disk.
pub fn emit_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    path: &Path,
) -> Result<()> {
    let text = render_svg(title, x_label, y_label, series);
    std::fs::write(path, text)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
