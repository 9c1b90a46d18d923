//! Minimal static SVG plots: line charts, heatmaps and empirical CDFs.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log10,
}

#[derive(Debug, Clone)]
pub struct Axes {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
}

impl Axes {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_scale: Scale::Linear,
        }
    }

    pub fn log_x(mut self) -> Self {
        self.x_scale = Scale::Log10;
        self
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn tx(scale: Scale, x: f64) -> f64 {
    match scale {
        Scale::Linear => x,
        Scale::Log10 => x.log10(),
    }
}

/// Data bounds with a small margin; degenerate spans are widened.
fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn header(out: &mut String, axes: &Axes) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(&axes.title)
    );
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut v = Vec::new();
    while t <= hi + 1e-9 * step {
        v.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    v
}

fn tick_label(v: f64, scale: Scale) -> String {
    match scale {
        Scale::Log10 => format!("1e{}", v.round() as i64),
        Scale::Linear => {
            if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
                format!("{v:.1e}")
            } else {
                let s = format!("{v:.3}");
                s.trim_end_matches('0').trim_end_matches('.').to_string()
            }
        }
    }
}

fn axes_frame(out: &mut String, f: &Frame, axes: &Axes) {
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        out,
        r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y1 - y0
    );
    let xt: Vec<f64> = match axes.x_scale {
        Scale::Log10 => (f.x.0.ceil() as i64..=f.x.1.floor() as i64)
            .map(|e| e as f64)
            .collect(),
        Scale::Linear => ticks(f.x.0, f.x.1),
    };
    for t in xt {
        let p = f.px(t);
        let _ = writeln!(
            out,
            r#"<line x1="{p:.2}" y1="{y1}" x2="{p:.2}" y2="{}" stroke="black"/><text x="{p:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y1 + 5.0,
            y1 + 18.0,
            tick_label(t, axes.x_scale)
        );
    }
    for t in ticks(f.y.0, f.y.1) {
        let p = f.py(t);
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{p:.2}" x2="{x0}" y2="{p:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            p + 4.0,
            tick_label(t, Scale::Linear)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 18.0,
        escape(&axes.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        (y0 + y1) / 2.0,
        escape(&axes.y_label)
    );
}

fn legend(out: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let y = TOP + 14.0 + 18.0 * i as f64;
        let x = WIDTH - RIGHT + 12.0;
        let c = COLORS[i % COLORS.len()];
        let _ = writeln!(
            out,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{c}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            x + 22.0,
            x + 28.0,
            y + 4.0,
            escape(name)
        );
    }
}

fn polyline(out: &mut String, pts: &[(f64, f64)], color: &str) {
    let mut s = String::new();
    for (x, y) in pts {
        let _ = write!(s, "{x:.2},{y:.2} ");
    }
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
        s.trim_end()
    );
}

/// Line chart; `y_floor` clips values from below (e.g. a dB floor).
pub fn line_plot(axes: &Axes, series: &[(&str, Vec<(f64, f64)>)], y_floor: Option<f64>) -> String {
    let clip = |y: f64| y_floor.map_or(y, |f| y.max(f));
    let valid = |x: f64, y: f64| {
        x.is_finite() && y.is_finite() && (axes.x_scale == Scale::Linear || x > 0.0)
    };
    let f = Frame {
        x: bounds(
            series
                .iter()
                .flat_map(|s| s.1.iter())
                .filter(|p| valid(p.0, p.1))
                .map(|p| tx(axes.x_scale, p.0)),
        ),
        y: bounds(
            series
                .iter()
                .flat_map(|s| s.1.iter())
                .filter(|p| valid(p.0, p.1))
                .map(|p| clip(p.1)),
        ),
    };
    let mut out = String::new();
    header(&mut out, axes);
    axes_frame(&mut out, &f, axes);
    for (i, (_, pts)) in series.iter().enumerate() {
        let mapped: Vec<(f64, f64)> = pts
            .iter()
            .filter(|p| valid(p.0, p.1))
            .map(|&(x, y)| (f.px(tx(axes.x_scale, x)), f.py(clip(y))))
            .collect();
        polyline(&mut out, &mapped, COLORS[i % COLORS.len()]);
    }
    legend(&mut out, &series.iter().map(|s| s.0).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

/// Empirical CDFs drawn as right-continuous steps.
pub fn cdf_plot(axes: &Axes, series: &[(&str, Vec<f64>)]) -> String {
    let steps: Vec<(&str, Vec<(f64, f64)>)> = series
        .iter()
        .map(|(name, samples)| {
            let mut s: Vec<f64> = samples.iter().copied().filter(|v| v.is_finite()).collect();
            s.sort_by(f64::total_cmp);
            let n = s.len() as f64;
            let mut pts = Vec::with_capacity(2 * s.len() + 1);
            if let Some(&first) = s.first() {
                pts.push((first, 0.0));
            }
            for (i, &x) in s.iter().enumerate() {
                pts.push((x, i as f64 / n));
                pts.push((x, (i + 1) as f64 / n));
            }
            (*name, pts)
        })
        .collect();
    line_plot(axes, &steps, None)
}

/// Heatmap of `values[row][col]` with columns along `x` and rows along `y`.
pub fn heatmap(
    axes: &Axes,
    x: &[f64],
    y: &[f64],
    values: &[f64],
    log_y: bool,
    floor: f64,
) -> String {
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let f = Frame {
        x: bounds(x.iter().copied()),
        y: bounds(y.iter().copied().map(ty)),
    };
    let (lo, hi) = bounds(values.iter().map(|v| v.max(floor)));
    let mut out = String::new();
    header(&mut out, axes);
    let edges = |c: &[f64], i: usize, t: &dyn Fn(f64) -> f64| {
        let v = t(c[i]);
        let prev = if i > 0 {
            t(c[i - 1])
        } else {
            v - (t(c[(i + 1).min(c.len() - 1)]) - v)
        };
        let next = if i + 1 < c.len() {
            t(c[i + 1])
        } else {
            v + (v - prev)
        };
        ((v + prev) / 2.0, (v + next) / 2.0)
    };
    let id = |v: f64| v;
    for (r, _) in y.iter().enumerate() {
        let (y0, y1) = edges(y, r, &ty);
        for (c, _) in x.iter().enumerate() {
            let (x0, x1) = edges(x, c, &id);
            let v = values[r * x.len() + c].max(floor);
            let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
            let (px0, px1) = (f.px(x0.max(f.x.0)), f.px(x1.min(f.x.1)));
            let (py0, py1) = (f.py(y1.min(f.y.1)), f.py(y0.max(f.y.0)));
            let _ = writeln!(
                out,
                r#"<rect x="{px0:.2}" y="{py0:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                (px1 - px0).max(0.0) + 0.3,
                (py1 - py0).max(0.0) + 0.3,
                colormap(t)
            );
        }
    }
    let mut ax = axes.clone();
    ax.x_scale = Scale::Linear;
    axes_frame(&mut out, &f, &ax);
    // color bar
    let bx = WIDTH - RIGHT + 20.0;
    for i in 0..50 {
        let t = i as f64 / 49.0;
        let y = HEIGHT - BOTTOM - t * (HEIGHT - TOP - BOTTOM);
        let _ = writeln!(
            out,
            r#"<rect x="{bx}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            y - 7.6,
            7.8,
            colormap(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}">{}</text>"#,
        bx + 22.0,
        TOP + 4.0,
        tick_label(hi, Scale::Linear)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}">{}</text>"#,
        bx + 22.0,
        HEIGHT - BOTTOM,
        tick_label(lo, Scale::Linear)
    );
    out.push_str("</svg>\n");
    out
}

/// Dark blue → yellow.
fn colormap(t: f64) -> String {
    let stops = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let s = t * (stops.len() - 1) as f64;
    let i = (s.floor() as usize).min(stops.len() - 2);
    let u = s - i as f64;
    let mix = |a: f64, b: f64| (a + (b - a) * u).round() as u8;
    let (a, b) = (stops[i], stops[i + 1]);
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(a.0, b.0),
        mix(a.1, b.1),
        mix(a.2, b.2)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_plot_is_well_formed() {
        let s = line_plot(
            &Axes::new("a < b", "x", "y").log_x(),
            &[
                ("one", vec![(1.0, 0.0), (10.0, 1.0), (100.0, f64::NAN)]),
                ("two", vec![(0.0, 5.0)]),
            ],
            Some(-80.0),
        );
        assert!(s.starts_with("<?xml"));
        assert!(s.trim_end().ends_with("</svg>"));
        assert!(s.contains("a &lt; b"));
        assert_eq!(s.matches("<polyline").count(), 2);
        assert!(!s.contains("NaN"));
    }

    #[test]
    fn cdf_and_heatmap() {
        let s = cdf_plot(&Axes::new("cdf", "x", "F"), &[("s", vec![3.0, 1.0, 2.0])]);
        assert!(s.contains("<polyline"));
        let h = heatmap(
            &Axes::new("map", "x", "y"),
            &[0.0, 1.0],
            &[1.0, 10.0, 100.0],
            &[0.0, -1.0, -2.0, -3.0, -4.0, -90.0],
            true,
            -40.0,
        );
        assert_eq!(h.matches("<rect").count(), 1 + 6 + 1 + 50);
        assert_eq!(colormap(0.0), "#440154");
        assert_eq!(colormap(1.0), "#fde725");
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(0.0, 10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(ticks(-1.0, 1.0), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }
}
