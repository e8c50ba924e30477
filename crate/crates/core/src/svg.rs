//! Minimal self-contained SVG writer for the report plots.

use std::fmt::Write;

pub(crate) fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

/// Maps a data interval onto a pixel interval.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Scale {
    d0: f64,
    d1: f64,
    p0: f64,
    p1: f64,
}

impl Scale {
    pub(crate) fn new(domain: (f64, f64), pixels: (f64, f64)) -> Self {
        let (mut d0, mut d1) = domain;
        if (d1 - d0).abs() < 1e-12 {
            d0 -= 0.5;
            d1 += 0.5;
        }
        Scale { d0, d1, p0: pixels.0, p1: pixels.1 }
    }

    pub(crate) fn at(&self, v: f64) -> f64 {
        self.p0 + (v - self.d0) / (self.d1 - self.d0) * (self.p1 - self.p0)
    }
}

pub(crate) struct Canvas {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    body: String,
}

impl Canvas {
    pub(crate) fn new(width: f64, height: f64, title: &str) -> Self {
        let mut c = Canvas { width, height, margin: 60.0, body: String::new() };
        c.text(width / 2.0, 24.0, title, "title", "middle");
        c
    }

    pub(crate) fn x_range(&self) -> (f64, f64) {
        (self.margin, self.width - self.margin / 2.0)
    }

    pub(crate) fn y_range(&self) -> (f64, f64) {
        (self.height - self.margin, self.margin / 1.5)
    }

    pub(crate) fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, class: &str) {
        let _ = writeln!(
            self.body,
            r#"<line class="{class}" x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}"/>"#
        );
    }

    pub(crate) fn circle(&mut self, cx: f64, cy: f64, r: f64, class: &str, tooltip: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle class="{class}" cx="{cx:.2}" cy="{cy:.2}" r="{r:.1}"><title>{}</title></circle>"#,
            escape(tooltip)
        );
    }

    pub(crate) fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, class: &str, tooltip: &str) {
        let (y, h) = if h < 0.0 { (y + h, -h) } else { (y, h) };
        let _ = writeln!(
            self.body,
            r#"<rect class="{class}" x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}"><title>{}</title></rect>"#,
            escape(tooltip)
        );
    }

    pub(crate) fn text(&mut self, x: f64, y: f64, text: &str, class: &str, anchor: &str) {
        let _ = writeln!(
            self.body,
            r#"<text class="{class}" x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#,
            escape(text)
        );
    }

    pub(crate) fn axes(&mut self, x_label: &str, y_label: &str) {
        let (x0, x1) = self.x_range();
        let (y0, y1) = self.y_range();
        self.line(x0, y0, x1, y0, "axis");
        self.line(x0, y0, x0, y1, "axis");
        self.text((x0 + x1) / 2.0, self.height - 15.0, x_label, "label", "middle");
        let _ = writeln!(
            self.body,
            r#"<text class="label" x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(y_label)
        );
    }

    pub(crate) fn finish(self) -> String {
        format!(
            concat!(
                r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
                "\n<style>",
                ".axis{{stroke:#333;stroke-width:1}} .diagonal{{stroke:#999;stroke-dasharray:4 3}} ",
                ".errorbar{{stroke:#555;stroke-width:1}} .point{{fill:#1f77b4}} .point.retro{{fill:#d62728}} ",
                ".bar{{fill:#1f77b4}} .star{{font-size:14px;fill:#000}} .title{{font:14px sans-serif}} ",
                ".label,.tick{{font:11px sans-serif}}",
                "</style>\n{body}</svg>\n"
            ),
            w = self.width,
            h = self.height,
            body = self.body
        )
    }
}
