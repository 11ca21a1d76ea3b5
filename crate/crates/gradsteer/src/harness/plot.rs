//! Minimal SVG emission for the two report figures: an overlaid histogram
//! with log-scaled counts, and a line plot with a +/- 2 std band.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn svg_header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n",
        WIDTH / 2.0
    )
}

fn axes(x_label: &str, y_label: &str) -> String {
    let x0 = MARGIN;
    let y0 = HEIGHT - MARGIN;
    let x1 = WIDTH - MARGIN;
    let y1 = MARGIN;
    format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{x_label}</text>\n\
         <text x=\"14\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" \
          transform=\"rotate(-90 14 {})\">{y_label}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    )
}

/// Overlaid histogram; bar heights use log10(1 + count).
pub fn histogram_svg(title: &str, x_label: &str, series: &[(String, Vec<f64>)]) -> String {
    let mut svg = svg_header(title);
    svg.push_str(&axes(x_label, "log10(1 + count)"));
    let all: Vec<f64> = series.iter().flat_map(|(_, v)| v.iter().copied()).collect();
    if all.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let lo = all.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-9);
    let bins = 30usize;
    let mut max_log = 0.0f64;
    let counts: Vec<Vec<f64>> = series
        .iter()
        .map(|(_, values)| {
            let mut c = vec![0.0f64; bins];
            for &v in values {
                let b = (((v - lo) / span) * bins as f64).floor().min(bins as f64 - 1.0) as usize;
                c[b] += 1.0;
            }
            for v in c.iter_mut() {
                *v = (1.0 + *v).log10();
                max_log = max_log.max(*v);
            }
            c
        })
        .collect();
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let bar_w = plot_w / bins as f64;
    for (si, ((label, _), c)) in series.iter().zip(&counts).enumerate() {
        let color = COLORS[si % COLORS.len()];
        for (b, &v) in c.iter().enumerate() {
            if v <= 0.0 {
                continue;
            }
            let h = v / max_log * plot_h;
            let x = MARGIN + b as f64 * bar_w;
            let y = HEIGHT - MARGIN - h;
            let _ = write!(
                svg,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{bar_w:.1}\" height=\"{h:.1}\" \
                 fill=\"{color}\" fill-opacity=\"0.45\"/>\n"
            );
        }
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{label}</text>\n",
            WIDTH - MARGIN - 120.0,
            MARGIN + 16.0 * (si + 1) as f64
        );
    }
    // x-axis extremes
    let _ = write!(
        svg,
        "<text x=\"{MARGIN}\" y=\"{}\" font-size=\"10\">{lo:.1}</text>\n\
         <text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{hi:.1}</text>\n",
        HEIGHT - MARGIN + 14.0,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 14.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// Line plot of (x, mean) with a shaded +/- 2 std band per series.
pub fn line_band_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64, f64)>)],
) -> String {
    let mut svg = svg_header(title);
    svg.push_str(&axes(x_label, y_label));
    let points: Vec<(f64, f64, f64)> = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().copied())
        .collect();
    if points.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let x_lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x_hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let y_lo = points.iter().map(|p| p.1 - 2.0 * p.2).fold(f64::INFINITY, f64::min);
    let y_hi = points.iter().map(|p| p.1 + 2.0 * p.2).fold(f64::NEG_INFINITY, f64::max);
    let x_span = (x_hi - x_lo).max(1e-9);
    let y_span = (y_hi - y_lo).max(1e-9);
    let to_x = |x: f64| MARGIN + (x - x_lo) / x_span * (WIDTH - 2.0 * MARGIN);
    let to_y = |y: f64| HEIGHT - MARGIN - (y - y_lo) / y_span * (HEIGHT - 2.0 * MARGIN);

    for (si, (label, pts)) in series.iter().enumerate() {
        let color = COLORS[si % COLORS.len()];
        let mut band = String::new();
        for p in pts {
            let _ = write!(band, "{:.1},{:.1} ", to_x(p.0), to_y(p.1 + 2.0 * p.2));
        }
        for p in pts.iter().rev() {
            let _ = write!(band, "{:.1},{:.1} ", to_x(p.0), to_y(p.1 - 2.0 * p.2));
        }
        let _ = write!(
            svg,
            "<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.15\"/>\n",
            band.trim_end()
        );
        let mut line = String::new();
        for p in pts {
            let _ = write!(line, "{:.1},{:.1} ", to_x(p.0), to_y(p.1));
        }
        let _ = write!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            line.trim_end()
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{label}</text>\n",
            WIDTH - MARGIN - 140.0,
            MARGIN + 16.0 * (si + 1) as f64
        );
    }
    let _ = write!(
        svg,
        "<text x=\"{MARGIN}\" y=\"{}\" font-size=\"10\">{x_lo:.0}</text>\n\
         <text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{x_hi:.0}</text>\n\
         <text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{y_hi:.1}</text>\n\
         <text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{y_lo:.1}</text>\n",
        HEIGHT - MARGIN + 14.0,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 14.0,
        MARGIN - 4.0,
        MARGIN + 4.0,
        MARGIN - 4.0,
        HEIGHT - MARGIN
    );
    svg.push_str("</svg>\n");
    svg
}
