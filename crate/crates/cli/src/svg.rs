//! Three-panel trajectory plot: planar path, states over time, controls over time.

use std::fmt::Write;

use gradflow_core::TrajectoryRow;

const PANEL_W: f64 = 400.0;
const PANEL_H: f64 = 320.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 15.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 45.0;
/// Points per series beyond which rows are strided.
const MAX_POINTS: usize = 4000;
const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

struct Series<'a> {
    label: &'a str,
    points: Vec<(f64, f64)>,
}

struct Panel<'a> {
    title: &'a str,
    x_label: &'a str,
    y_label: &'a str,
    series: Vec<Series<'a>>,
}

pub fn render(rows: &[TrajectoryRow]) -> String {
    let stride = rows.len().div_ceil(MAX_POINTS).max(1);
    let mut picked: Vec<&TrajectoryRow> = rows.iter().step_by(stride).collect();
    if let Some(last) = rows.last() {
        if !std::ptr::eq(*picked.last().unwrap(), last) {
            picked.push(last);
        }
    }
    let series = |label, f: fn(&TrajectoryRow) -> (f64, f64)| Series {
        label,
        points: picked.iter().map(|r| f(r)).collect(),
    };
    let panels = [
        Panel {
            title: "planar path",
            x_label: "x1 [m]",
            y_label: "x2 [m]",
            series: vec![series("path", |r| (r.state.x1, r.state.x2))],
        },
        Panel {
            title: "states",
            x_label: "t [s]",
            y_label: "x1, x2 [m], x3 [rad]",
            series: vec![
                series("x1 [m]", |r| (r.t, r.state.x1)),
                series("x2 [m]", |r| (r.t, r.state.x2)),
                series("x3 [rad]", |r| (r.t, r.state.x3)),
            ],
        },
        Panel {
            title: "controls",
            x_label: "t [s]",
            y_label: "u1 [m/s], u2 [rad/s]",
            series: vec![
                series("u1 [m/s]", |r| (r.t, r.control.u1)),
                series("u2 [rad/s]", |r| (r.t, r.control.u2)),
            ],
        },
    ];

    let mut out = String::new();
    let width = PANEL_W * panels.len() as f64;
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" viewBox="0 0 {width} {PANEL_H}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for (i, panel) in panels.iter().enumerate() {
        draw_panel(&mut out, panel, i as f64 * PANEL_W);
    }
    out.push_str("</svg>\n");
    out
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = lo.abs().max(1.0) * 0.05;
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

/// Roughly five ticks at 1, 2 or 5 times a power of ten.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn draw_panel(out: &mut String, panel: &Panel, x_off: f64) {
    let all = || panel.series.iter().flat_map(|s| s.points.iter());
    let (x_lo, x_hi) = extent(all().map(|p| p.0));
    let (y_lo, y_hi) = extent(all().map(|p| p.1));
    let (left, right) = (x_off + MARGIN_L, x_off + PANEL_W - MARGIN_R);
    let (top, bottom) = (MARGIN_T, PANEL_H - MARGIN_B);
    let sx = |x: f64| left + (x - x_lo) / (x_hi - x_lo) * (right - left);
    let sy = |y: f64| bottom - (y - y_lo) / (y_hi - y_lo) * (bottom - top);

    writeln!(out, r#"<g class="panel" id="{}">"#, panel.title.replace(' ', "-")).unwrap();
    writeln!(
        out,
        r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
        (left + right) / 2.0,
        panel.title
    )
    .unwrap();
    writeln!(
        out,
        r#"<rect x="{left:.1}" y="{top:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    )
    .unwrap();
    for t in ticks(x_lo, x_hi) {
        let x = sx(t);
        writeln!(
            out,
            r##"<line x1="{x:.1}" y1="{bottom:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            bottom + 4.0,
            bottom + 16.0,
            tick_label(t)
        )
        .unwrap();
    }
    for t in ticks(y_lo, y_hi) {
        let y = sy(t);
        writeln!(
            out,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{left:.1}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            left - 4.0,
            left - 6.0,
            y + 4.0,
            tick_label(t)
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        PANEL_H - 10.0,
        panel.x_label
    )
    .unwrap();
    writeln!(
        out,
        r#"<text transform="translate({:.1},{:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        x_off + 14.0,
        (top + bottom) / 2.0,
        panel.y_label
    )
    .unwrap();
    for (k, s) in panel.series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut pts = String::with_capacity(s.points.len() * 14);
        for (x, y) in &s.points {
            write!(pts, "{:.1},{:.1} ", sx(*x), sy(*y)).unwrap();
        }
        writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1" points="{}"/>"#,
            pts.trim_end()
        )
        .unwrap();
        if panel.series.len() > 1 {
            let ly = top + 14.0 + 14.0 * k as f64;
            writeln!(
                out,
                r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                right - 95.0,
                right - 80.0,
                right - 76.0,
                ly + 4.0,
                s.label
            )
            .unwrap();
        }
    }
    out.push_str("</g>\n");
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_steps() {
        assert_eq!(ticks(0.0, 1.0).len(), 6);
        assert_eq!(ticks(-0.52, 0.03), vec![-0.4, -0.2, 0.0]);
        assert_eq!(ticks(0.0, 600.0).last(), Some(&600.0));
        assert_eq!(tick_label(0.30000000000000004), "0.3");
        assert_eq!(tick_label(-2.0), "-2");
    }

    #[test]
    fn flat_extent_is_padded() {
        let (lo, hi) = extent([0.0, 0.0].into_iter());
        assert!(lo < 0.0 && hi > 0.0);
    }
}
