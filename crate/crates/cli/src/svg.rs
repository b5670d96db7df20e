//! Minimal SVG emitters: tornado charts with optional uncertainty marks and
//! line charts with standard-error bands. Output is plain text with fixed
//! number formatting, so identical inputs give identical files.

use std::fmt::Write;

use uncertain_attr::propagate::DensityEstimate;

const WIDTH: f64 = 640.0;
const LEFT: f64 = 150.0;
const RIGHT: f64 = 40.0;
const TOP: f64 = 48.0;
const ROW: f64 = 38.0;
const BAR: f64 = 22.0;
const BOTTOM: f64 = 44.0;
const POSITIVE: &str = "#3b7dd8";
const NEGATIVE: &str = "#d8553b";
const MARK: &str = "#222222";

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum UncertaintyStyle {
    Violin,
    Ci,
}

/// Spread drawn on top of a bar, in the same units as the bar.
#[derive(Debug, Clone)]
pub enum Spread {
    Interval(f64),
    Density(DensityEstimate),
}

impl Spread {
    fn extent(&self, value: f64) -> (f64, f64) {
        match self {
            Spread::Interval(h) => (value - h, value + h),
            Spread::Density(DensityEstimate::Point { value: v }) => (*v, *v),
            Spread::Density(DensityEstimate::Smooth(d)) => {
                (*d.grid.first().unwrap_or(&value), *d.grid.last().unwrap_or(&value))
            }
        }
    }
}

pub struct Tornado<'a> {
    pub title: &'a str,
    pub features: &'a [String],
    pub values: &'a [f64],
    pub spreads: Option<&'a [Spread]>,
    /// Caption under the axis, e.g. the predicted score.
    pub caption: &'a str,
}

impl Tornado<'_> {
    /// Largest absolute coordinate the chart needs.
    pub fn extent(&self) -> f64 {
        let mut m: f64 = 0.0;
        for (i, &v) in self.values.iter().enumerate() {
            m = m.max(v.abs());
            if let Some(s) = self.spreads {
                let (lo, hi) = s[i].extent(v);
                m = m.max(lo.abs()).max(hi.abs());
            }
        }
        m
    }

    /// Draws on a symmetric axis `[-half_range, half_range]`.
    pub fn render(&self, half_range: f64) -> String {
        let half_range = if half_range > 0.0 { half_range } else { 1.0 };
        let height = TOP + ROW * self.features.len() as f64 + BOTTOM;
        let plot_w = WIDTH - LEFT - RIGHT;
        let x = |v: f64| LEFT + plot_w * (v + half_range) / (2.0 * half_range);
        let zero = x(0.0);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="24" font-size="15" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(self.title));
        for (i, (name, &v)) in self.features.iter().zip(self.values).enumerate() {
            let y = TOP + ROW * i as f64 + (ROW - BAR) / 2.0;
            let yc = y + BAR / 2.0;
            let (x0, x1) = if v >= 0.0 { (zero, x(v)) } else { (x(v), zero) };
            let fill = if v >= 0.0 { POSITIVE } else { NEGATIVE };
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
                LEFT - 10.0,
                yc,
                escape(name)
            );
            let _ = writeln!(
                s,
                r#"<rect class="bar" x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{BAR:.2}" fill="{fill}"><title>{}: {v:.1}</title></rect>"#,
                x1 - x0,
                escape(name)
            );
            if let Some(spreads) = self.spreads {
                s.push_str(&spread_mark(&spreads[i], v, yc, &x));
            }
        }
        let axis_y = TOP + ROW * self.features.len() as f64;
        let _ = writeln!(s, r#"<line class="zero" x1="{zero:.2}" y1="{:.2}" x2="{zero:.2}" y2="{axis_y:.2}" stroke="{MARK}"/>"#, TOP - 4.0);
        let _ = writeln!(s, r#"<line class="axis" x1="{LEFT:.2}" y1="{axis_y:.2}" x2="{:.2}" y2="{axis_y:.2}" stroke="{MARK}"/>"#, WIDTH - RIGHT);
        for t in [-half_range, -half_range / 2.0, 0.0, half_range / 2.0, half_range] {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{t:.1}</text>"#, x(t), axis_y + 16.0);
        }
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, axis_y + 34.0, escape(self.caption));
        s.push_str("</svg>\n");
        s
    }
}

fn spread_mark(spread: &Spread, value: f64, yc: f64, x: &dyn Fn(f64) -> f64) -> String {
    match spread {
        Spread::Interval(h) => {
            let (a, b) = (x(value - h), x(value + h));
            let cap = BAR / 3.0;
            format!(
                concat!(
                    r#"<g class="whisker" stroke="{m}" stroke-width="1.5">"#,
                    r#"<line x1="{a:.2}" y1="{yc:.2}" x2="{b:.2}" y2="{yc:.2}"/>"#,
                    r#"<line x1="{a:.2}" y1="{t:.2}" x2="{a:.2}" y2="{u:.2}"/>"#,
                    r#"<line x1="{b:.2}" y1="{t:.2}" x2="{b:.2}" y2="{u:.2}"/></g>"#,
                    "\n"
                ),
                m = MARK,
                a = a,
                b = b,
                yc = yc,
                t = yc - cap,
                u = yc + cap
            )
        }
        Spread::Density(DensityEstimate::Point { value: v }) => {
            let px = x(*v);
            format!(
                "<line class=\"violin\" x1=\"{px:.2}\" y1=\"{:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"{MARK}\"/>\n",
                yc - BAR / 2.0,
                yc + BAR / 2.0
            )
        }
        Spread::Density(DensityEstimate::Smooth(d)) => {
            let peak = d.density.iter().cloned().fold(0.0, f64::max);
            let scale = if peak > 0.0 { (BAR / 2.0 + 4.0) / peak } else { 0.0 };
            let mut path = String::new();
            for (k, (g, p)) in d.grid.iter().zip(&d.density).enumerate() {
                let _ = write!(path, "{}{:.2},{:.2} ", if k == 0 { "M" } else { "L" }, x(*g), yc - p * scale);
            }
            for (g, p) in d.grid.iter().zip(&d.density).rev() {
                let _ = write!(path, "L{:.2},{:.2} ", x(*g), yc + p * scale);
            }
            path.push('Z');
            format!("<path class=\"violin\" d=\"{path}\" fill=\"none\" stroke=\"{MARK}\" stroke-width=\"1.2\"/>\n")
        }
    }
}

pub struct Curve<'a> {
    pub title: &'a str,
    pub x_labels: &'a [String],
    pub y: &'a [f64],
    pub se: &'a [f64],
    pub x_caption: &'a str,
    pub y_caption: &'a str,
}

/// Points at evenly spaced positions with a `y +- se` band, y in `[0, 1]`.
pub fn line_chart(c: &Curve<'_>) -> String {
    let (w, h) = (WIDTH, 360.0);
    let (l, r, t, b) = (70.0, 30.0, 40.0, 70.0);
    let n = c.y.len().max(1);
    let px = |i: usize| if n == 1 { (l + w - r) / 2.0 } else { l + (w - l - r) * i as f64 / (n - 1) as f64 };
    let py = |v: f64| t + (h - t - b) * (1.0 - v.clamp(0.0, 1.0));
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<text x="{:.2}" y="22" font-size="15" text-anchor="middle">{}</text>"#, w / 2.0, escape(c.title));
    let _ = writeln!(s, r#"<line class="axis" x1="{l:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{MARK}"/>"#, h - b, w - r, h - b);
    let _ = writeln!(s, r#"<line class="axis" x1="{l:.2}" y1="{t:.2}" x2="{l:.2}" y2="{:.2}" stroke="{MARK}"/>"#, h - b);
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end" dominant-baseline="middle">{tick:.2}</text>"#, l - 6.0, py(tick));
    }
    if !c.y.is_empty() {
        let mut band = String::new();
        for (i, (v, e)) in c.y.iter().zip(c.se).enumerate() {
            let _ = write!(band, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, px(i), py(v + e));
        }
        for (i, (v, e)) in c.y.iter().zip(c.se).enumerate().rev() {
            let _ = write!(band, "L{:.2},{:.2} ", px(i), py(v - e));
        }
        band.push('Z');
        let _ = writeln!(s, r#"<path class="band" d="{band}" fill="{POSITIVE}" fill-opacity="0.2" stroke="none"/>"#);
        let points: Vec<String> = c.y.iter().enumerate().map(|(i, v)| format!("{:.2},{:.2}", px(i), py(*v))).collect();
        let _ = writeln!(s, r#"<polyline class="curve" points="{}" fill="none" stroke="{POSITIVE}" stroke-width="2"/>"#, points.join(" "));
        for (i, v) in c.y.iter().enumerate() {
            let _ = writeln!(s, r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="3" fill="{POSITIVE}"/>"#, px(i), py(*v));
        }
    }
    for (i, label) in c.x_labels.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" transform="rotate(-35 {:.2} {:.2})">{}</text>"#,
            px(i),
            h - b + 16.0,
            px(i),
            h - b + 16.0,
            escape(label)
        );
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, w / 2.0, h - 8.0, escape(c.x_caption));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (t + h - b) / 2.0,
        (t + h - b) / 2.0,
        escape(c.y_caption)
    );
    s.push_str("</svg>\n");
    s
}
