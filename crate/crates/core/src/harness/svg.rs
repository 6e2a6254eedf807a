//! A minimal SVG figure writer: one plot area with linear axes.

use std::fmt::Write;

pub(crate) const WIDTH: f64 = 640.0;
pub(crate) const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Self {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            let mid = if lo.is_finite() { lo } else { 0.0 };
            return Range {
                lo: mid - 0.5,
                hi: mid + 0.5,
            };
        }
        Range { lo, hi }
    }

    /// Covers `values` (and zero when `include_zero`), padded by `pad` of the
    /// span on each side.
    pub fn covering(values: impl IntoIterator<Item = f64>, include_zero: bool, pad: f64) -> Self {
        let (mut lo, mut hi) = if include_zero {
            (0.0, 0.0)
        } else {
            (f64::INFINITY, f64::NEG_INFINITY)
        };
        for v in values.into_iter().filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo > hi {
            return Range::new(0.0, 1.0);
        }
        let span = if hi > lo { hi - lo } else { 1.0 };
        Range::new(
            if include_zero && lo >= 0.0 {
                lo
            } else {
                lo - pad * span
            },
            hi + pad * span,
        )
    }

    fn span(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Roughly `n` round-valued ticks inside the range.
fn ticks(r: Range, n: usize) -> Vec<f64> {
    let raw = r.span() / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (r.lo / step).ceil() as i64;
    let last = (r.hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub(crate) struct Figure {
    x: Range,
    y: Range,
    body: String,
    title: String,
    x_label: String,
    y_label: String,
    legend: Vec<(String, String)>,
}

impl Figure {
    pub fn new(title: &str, x: Range, y: Range) -> Self {
        Figure {
            x,
            y,
            body: String::new(),
            title: title.into(),
            x_label: String::new(),
            y_label: String::new(),
            legend: Vec::new(),
        }
    }

    /// Widens one of the ranges so a data unit has the same length on both
    /// axes.
    pub fn equal_aspect(mut self) -> Self {
        let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
        let (sx, sy) = (self.x.span() / pw, self.y.span() / ph);
        if sx > sy {
            let extra = (sx * ph - self.y.span()) / 2.0;
            self.y = Range::new(self.y.lo - extra, self.y.hi + extra);
        } else {
            let extra = (sy * pw - self.x.span()) / 2.0;
            self.x = Range::new(self.x.lo - extra, self.x.hi + extra);
        }
        self
    }

    pub fn labels(mut self, x: &str, y: &str) -> Self {
        self.x_label = x.into();
        self.y_label = y.into();
        self
    }

    pub fn x_range(&self) -> Range {
        self.x
    }

    pub fn y_range(&self) -> Range {
        self.y
    }

    pub fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.lo) / self.x.span() * (WIDTH - LEFT - RIGHT)
    }

    pub fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.lo) / self.y.span() * (HEIGHT - TOP - BOTTOM)
    }

    /// Pixels per data unit along x.
    pub fn scale_x(&self) -> f64 {
        (WIDTH - LEFT - RIGHT) / self.x.span()
    }

    pub fn add_legend(&mut self, label: &str, color: &str) {
        self.legend.push((label.into(), color.into()));
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], color: &str, width: f64, class: &str) {
        if pts.is_empty() {
            return;
        }
        let mut d = String::new();
        for (x, y) in pts {
            let _ = write!(d, "{:.2},{:.2} ", self.px(*x), self.py(*y));
        }
        let _ = writeln!(
            self.body,
            r#"<polyline class="{class}" points="{}" fill="none" stroke="{color}" stroke-width="{width}"/>"#,
            d.trim_end()
        );
    }

    pub fn segment(&mut self, a: (f64, f64), b: (f64, f64), color: &str, width: f64, class: &str) {
        let _ = writeln!(
            self.body,
            r#"<line class="{class}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="{width}"/>"#,
            self.px(a.0),
            self.py(a.1),
            self.px(b.0),
            self.py(b.1)
        );
    }

    /// Closed polygon in data coordinates.
    pub fn polygon(
        &mut self,
        pts: &[(f64, f64)],
        stroke: &str,
        fill: &str,
        opacity: f64,
        class: &str,
    ) {
        let mut d = String::new();
        for (x, y) in pts {
            let _ = write!(d, "{:.2},{:.2} ", self.px(*x), self.py(*y));
        }
        let _ = writeln!(
            self.body,
            r#"<polygon class="{class}" points="{}" stroke="{stroke}" fill="{fill}" fill-opacity="{opacity}"/>"#,
            d.trim_end()
        );
    }

    /// Circle with a radius in data units.
    pub fn data_circle(&mut self, c: (f64, f64), r: f64, stroke: &str, fill: &str, class: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle class="{class}" cx="{:.2}" cy="{:.2}" r="{:.2}" stroke="{stroke}" fill="{fill}" fill-opacity="0.15"/>"#,
            self.px(c.0),
            self.py(c.1),
            r * self.scale_x()
        );
    }

    /// Marker with a radius in pixels.
    pub fn dot(&mut self, c: (f64, f64), r_px: f64, stroke: &str, fill: &str, class: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle class="{class}" cx="{:.2}" cy="{:.2}" r="{r_px:.2}" stroke="{stroke}" fill="{fill}"/>"#,
            self.px(c.0),
            self.py(c.1)
        );
    }

    pub fn rect(&mut self, lo: (f64, f64), hi: (f64, f64), stroke: &str, fill: &str, class: &str) {
        let (x0, x1) = (self.px(lo.0), self.px(hi.0));
        let (y0, y1) = (self.py(hi.1), self.py(lo.1));
        let _ = writeln!(
            self.body,
            r#"<rect class="{class}" x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" stroke="{stroke}" fill="{fill}" fill-opacity="0.5"/>"#,
            (x1 - x0).max(0.0),
            (y1 - y0).max(0.0)
        );
    }

    pub fn text(&mut self, at: (f64, f64), s: &str, class: &str) {
        let _ = writeln!(
            self.body,
            r#"<text class="{class}" x="{:.2}" y="{:.2}" font-size="12">{}</text>"#,
            self.px(at.0) + 6.0,
            self.py(at.1) - 6.0,
            esc(s)
        );
    }

    pub fn finish(self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" font-size="15" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            esc(&self.title)
        );
        let (x0, x1) = (LEFT, WIDTH - RIGHT);
        let (y0, y1) = (HEIGHT - BOTTOM, TOP);
        let _ = writeln!(s, r#"<g class="axes" stroke="black" stroke-width="1">"#);
        let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/>"#);
        let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/>"#);
        for t in ticks(self.x, 6) {
            let p = self.px(t);
            let _ = writeln!(
                s,
                r#"<line x1="{p:.2}" y1="{y0}" x2="{p:.2}" y2="{:.2}"/>"#,
                y0 + 5.0
            );
        }
        for t in ticks(self.y, 6) {
            let p = self.py(t);
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{p:.2}" x2="{x0}" y2="{p:.2}"/>"#,
                x0 - 5.0
            );
        }
        let _ = writeln!(s, "</g>");
        let _ = writeln!(s, r#"<g class="tick-labels" font-size="11">"#);
        for t in ticks(self.x, 6) {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                self.px(t),
                y0 + 18.0,
                tick_label(t)
            );
        }
        for t in ticks(self.y, 6) {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                x0 - 8.0,
                self.py(t) + 4.0,
                tick_label(t)
            );
        }
        let _ = writeln!(s, "</g>");
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 12.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            esc(&self.y_label)
        );
        let _ = writeln!(
            s,
            r#"<clipPath id="plot-area"><rect x="{x0}" y="{y1}" width="{}" height="{}"/></clipPath>"#,
            x1 - x0,
            y0 - y1
        );
        let _ = writeln!(s, r#"<g clip-path="url(#plot-area)">"#);
        s.push_str(&self.body);
        let _ = writeln!(s, "</g>");
        for (i, (label, color)) in self.legend.iter().enumerate() {
            let y = TOP + 14.0 + 16.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<g class="legend"><rect x="{:.2}" y="{:.2}" width="12" height="12" fill="{color}"/><text x="{:.2}" y="{:.2}" font-size="12">{}</text></g>"#,
                LEFT + 12.0,
                y - 10.0,
                LEFT + 30.0,
                y,
                esc(label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Color at fraction `f ∈ [0, 1]` between two RGB endpoints.
pub(crate) fn gradient(from: (u8, u8, u8), to: (u8, u8, u8), f: f64) -> String {
    let f = f.clamp(0.0, 1.0);
    let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * f).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(from.0, to.0),
        mix(from.1, to.1),
        mix(from.2, to.2)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_and_inside() {
        let t = ticks(Range::new(0.0, 2000.0), 6);
        assert_eq!(t.first(), Some(&0.0));
        assert_eq!(t.last(), Some(&2000.0));
        assert!(t.windows(2).all(|w| (w[1] - w[0] - 500.0).abs() < 1e-9));
    }

    #[test]
    fn degenerate_range_is_widened() {
        let r = Range::new(1.0, 1.0);
        assert!(r.hi > r.lo);
        let c = Range::covering(std::iter::empty(), true, 0.05);
        assert!(c.hi > c.lo);
    }

    #[test]
    fn gradient_endpoints() {
        assert_eq!(gradient((255, 215, 0), (200, 0, 0), 0.0), "#ffd700");
        assert_eq!(gradient((255, 215, 0), (200, 0, 0), 1.0), "#c80000");
    }

    #[test]
    fn empty_figure_has_axes() {
        let svg = Figure::new("t", Range::new(0.0, 1.0), Range::new(0.0, 1.0)).finish();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains(r#"class="axes""#));
    }
}
