//! Minimal hand-written SVG plots.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 56.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Pads a degenerate or non-finite range.
fn span(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-300 {
        let pad = if lo.abs() > 0.0 { 0.5 * lo.abs() } else { 0.5 };
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn min_max(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)))
}

/// Linear axes mapping data space onto the plot area.
pub struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    log_y: bool,
    body: String,
}

impl Frame {
    pub fn new(xs: &[f64], ys: &[f64], log_y: bool) -> Self {
        let tr = |v: f64| if log_y { v.log10() } else { v };
        let (x0, x1) = min_max(xs.iter().copied());
        let (y0, y1) = min_max(ys.iter().copied().filter(|&v| !log_y || v > 0.0).map(tr));
        Frame {
            x: span(x0, x1),
            y: span(y0, y1),
            log_y,
            body: String::new(),
        }
    }

    /// Same scale on both axes, for geometry.
    pub fn equal(xs: &[f64], ys: &[f64]) -> Self {
        let mut f = Frame::new(xs, ys, false);
        let (sx, sy) = (f.x.1 - f.x.0, f.y.1 - f.y.0);
        let (aw, ah) = (W - 2.0 * MARGIN, H - 2.0 * MARGIN);
        let scale = (sx / aw).max(sy / ah);
        let (cx, cy) = (0.5 * (f.x.0 + f.x.1), 0.5 * (f.y.0 + f.y.1));
        f.x = (cx - 0.5 * scale * aw, cx + 0.5 * scale * aw);
        f.y = (cy - 0.5 * scale * ah, cy + 0.5 * scale * ah);
        f
    }

    pub fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * MARGIN)
    }

    pub fn py(&self, y: f64) -> f64 {
        let y = if self.log_y { y.log10() } else { y };
        H - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * MARGIN)
    }

    pub fn point(&mut self, x: f64, y: f64, fill: &str) {
        if x.is_finite() && y.is_finite() && (!self.log_y || y > 0.0) {
            let _ = writeln!(
                self.body,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{fill}" stroke="black" stroke-width="0.5"/>"#,
                self.px(x),
                self.py(y)
            );
        }
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, dashed: bool) {
        let coords: Vec<String> = pts
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite() && (!self.log_y || p.1 > 0.0))
            .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="1.5"{dash}/>"#,
            coords.join(" ")
        );
    }

    pub fn triangle(&mut self, p: [[f64; 2]; 3], fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{fill}" stroke="{fill}" stroke-width="0.3"/>"#,
            self.px(p[0][0]),
            self.py(p[0][1]),
            self.px(p[1][0]),
            self.py(p[1][1]),
            self.px(p[2][0]),
            self.py(p[2][1])
        );
    }

    pub fn legend(&mut self, row: usize, label: &str, fill: &str) {
        let y = MARGIN + 8.0 + 16.0 * row as f64;
        let x = W - MARGIN - 120.0;
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{fill}"/><text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            y - 9.0,
            x + 14.0,
            y,
            escape(label)
        );
    }

    pub fn finish(self, title: &str, xlabel: &str, ylabel: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - 2.0 * MARGIN,
            H - 2.0 * MARGIN
        );
        for i in 0..=4 {
            let t = i as f64 / 4.0;
            let xv = self.x.0 + t * (self.x.1 - self.x.0);
            let yv = self.y.0 + t * (self.y.1 - self.y.0);
            let px = MARGIN + t * (W - 2.0 * MARGIN);
            let py = H - MARGIN - t * (H - 2.0 * MARGIN);
            let ylab = if self.log_y { format!("1e{yv:.1}") } else { tick(yv) };
            let _ = writeln!(
                s,
                r#"<text x="{px:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#,
                H - MARGIN + 14.0,
                tick(xv)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{ylab}</text>"#,
                MARGIN - 4.0,
                py + 3.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="24" font-size="14" text-anchor="middle">{}</text>"#,
            W / 2.0,
            escape(title)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
            W / 2.0,
            H - 16.0,
            escape(xlabel)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            escape(ylabel)
        );
        s.push_str(&self.body);
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

/// Blue-white-red ramp over `t` in [0, 1].
pub fn ramp(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
    let (r, g, b) = if t < 0.5 {
        let u = t / 0.5;
        (u, u, 1.0)
    } else {
        let u = (t - 0.5) / 0.5;
        (1.0, 1.0 - u, 1.0 - u)
    };
    format!("#{:02x}{:02x}{:02x}", (255.0 * r) as u8, (255.0 * g) as u8, (255.0 * b) as u8)
}

/// Scatter of labelled points, one colour per label.
pub fn scatter(points: &[(f64, f64, usize)], title: &str, xlabel: &str, ylabel: &str) -> String {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let mut f = Frame::new(&xs, &ys, false);
    let mut labels: Vec<usize> = points.iter().map(|p| p.2).collect();
    labels.sort_unstable();
    labels.dedup();
    for &(x, y, l) in points {
        f.point(x, y, color(l));
    }
    for (row, &l) in labels.iter().enumerate().take(12) {
        f.legend(row, &format!("cluster {l}"), color(l));
    }
    f.finish(title, xlabel, ylabel)
}

/// Name, points and whether the line is dashed.
pub type Series = (String, Vec<(f64, f64)>, bool);

/// Named series of (x, y) lines with markers; dashed series drawn without markers.
pub fn lines(series: &[Series], log_y: bool, title: &str, xlabel: &str, ylabel: &str) -> String {
    let xs: Vec<f64> = series.iter().flat_map(|s| s.1.iter().map(|p| p.0)).collect();
    let ys: Vec<f64> = series.iter().flat_map(|s| s.1.iter().map(|p| p.1)).collect();
    let mut f = Frame::new(&xs, &ys, log_y);
    for (i, (name, pts, dashed)) in series.iter().enumerate() {
        f.polyline(pts, color(i), *dashed);
        if !dashed {
            for &(x, y) in pts {
                f.point(x, y, color(i));
            }
        }
        f.legend(i, name, color(i));
    }
    f.finish(title, xlabel, ylabel)
}
