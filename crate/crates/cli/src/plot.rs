//! Static SVG plot of residual against `ε` with the fitted rate overlaid.

use std::fmt::Write as _;

use optbal::diagnostics::{RateFit, RateModel, RESIDUAL_FLOOR};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct PlotSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub fit: Option<RateFit>,
}

/// Abscissa in fit coordinates: `ln ε` or `(T/ε)^{1/3}`.
fn abscissa(model: RateModel, eps: f64, t_ramp: f64) -> f64 {
    match model {
        RateModel::Algebraic => eps.ln(),
        RateModel::Exponential => (t_ramp / eps).cbrt(),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn rate_plot_svg(series: &[PlotSeries], model: RateModel, t_ramp: f64) -> String {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|p| p.0 > 0.0 && p.1.is_finite())
        .map(|&(e, r)| (abscissa(model, e, t_ramp), r.max(RESIDUAL_FLOOR).ln()))
        .collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if pts.is_empty() {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#, WIDTH / 2.0, HEIGHT / 2.0);
        svg.push_str("</svg>\n");
        return svg;
    }
    let pad = |lo: f64, hi: f64| {
        let d = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
        (lo - d, hi + d)
    };
    let (x0, x1) = pad(
        pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = pad(
        pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    );
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let _ = writeln!(
        svg,
        r#"<polyline fill="none" stroke="black" points="{m},{t} {m},{b} {r},{b}"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let (xlabel, xfmt): (&str, Box<dyn Fn(f64) -> String>) = match model {
        RateModel::Algebraic => ("ε (log scale)", Box::new(|x: f64| format!("{:.3e}", x.exp()))),
        RateModel::Exponential => ("(T/ε)^(1/3)", Box::new(|x: f64| format!("{x:.2}"))),
    };
    for (x, anchor) in [(x0, "start"), (x1, "end")] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="{anchor}">{}</text>"#,
            sx(x),
            HEIGHT - MARGIN + 18.0,
            xfmt(x)
        );
    }
    for y in [y0, y1] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="end">{:.1e}</text>"#,
            MARGIN - 6.0,
            sy(y) + 4.0,
            y.exp()
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0,
        escape(xlabel)
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 15 {:.1})">balance residual (log scale)</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut line = Vec::new();
        for &(e, r) in s.points.iter().filter(|p| p.0 > 0.0 && p.1.is_finite()) {
            let (x, y) = (sx(abscissa(model, e, t_ramp)), sy(r.max(RESIDUAL_FLOOR).ln()));
            let _ = writeln!(svg, r#"<circle cx="{x:.1}" cy="{y:.1}" r="4" fill="{color}"/>"#);
            line.push((x, y));
        }
        let mut legend = escape(&s.label);
        if let Some(fit) = &s.fit {
            let a = fit.slope * x0 + fit.intercept;
            let b = fit.slope * x1 + fit.intercept;
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-dasharray="6 4" points="{:.1},{:.1} {:.1},{:.1}"/>"#,
                sx(x0),
                sy(a),
                sx(x1),
                sy(b)
            );
            let _ = write!(legend, " fit {} {:.3}, r2 {:.3}", fit.model, fit.rate(), fit.r_squared);
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" fill="{color}">{legend}</text>"#,
            MARGIN + 10.0,
            MARGIN - 30.0 + 15.0 * k as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}
