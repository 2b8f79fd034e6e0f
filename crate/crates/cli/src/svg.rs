//! Minimal SVG writer for plots in world coordinates.

use std::fmt::Write;

use sdtdg_core::Vec2;

pub struct Canvas {
    min: Vec2,
    max: Vec2,
    body: String,
}

impl Canvas {
    /// Canvas covering `points` with a margin.
    pub fn fitting<'a>(points: impl IntoIterator<Item = &'a Vec2>, margin: f64) -> Self {
        let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            if p.is_finite() {
                min = Vec2::new(min.x.min(p.x), min.y.min(p.y));
                max = Vec2::new(max.x.max(p.x), max.y.max(p.y));
            }
        }
        if !min.is_finite() {
            min = Vec2::new(-1.0, -1.0);
            max = Vec2::new(1.0, 1.0);
        }
        let m = Vec2::new(margin, margin);
        Canvas {
            min: min - m,
            max: max + m,
            body: String::new(),
        }
    }

    fn stroke(&self) -> f64 {
        (self.max - self.min).norm() / 400.0
    }

    pub fn background(&mut self, fill: &str) {
        let size = self.max - self.min;
        let _ = writeln!(
            self.body,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{fill}"/>"#,
            self.min.x, self.min.y, size.x, size.y
        );
    }

    /// Polyline as a path element; closed paths end with `Z`.
    pub fn path(&mut self, points: &[Vec2], closed: bool, stroke: &str, fill: Option<&str>, id: &str) {
        let mut d = String::new();
        for (i, p) in points.iter().enumerate() {
            let _ = write!(d, "{}{:.6},{:.6} ", if i == 0 { "M" } else { "L" }, p.x, p.y);
        }
        if closed {
            d.push('Z');
        }
        let _ = writeln!(
            self.body,
            r#"<path id="{id}" d="{}" stroke="{stroke}" stroke-width="{}" fill="{}"/>"#,
            d.trim_end(),
            self.stroke(),
            fill.unwrap_or("none")
        );
    }

    pub fn circle(&mut self, c: Vec2, radius: f64, stroke: &str, fill: Option<&str>) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{:.6}" cy="{:.6}" r="{}" stroke="{stroke}" stroke-width="{}" fill="{}"/>"#,
            c.x,
            c.y,
            radius,
            self.stroke(),
            fill.unwrap_or("none")
        );
    }

    pub fn marker(&mut self, c: Vec2, fill: &str) {
        let radius = 2.0 * self.stroke();
        let _ = writeln!(
            self.body,
            r#"<circle cx="{:.6}" cy="{:.6}" r="{radius}" fill="{fill}"/>"#,
            c.x, c.y
        );
    }

    pub fn finish(self) -> String {
        let size = self.max - self.min;
        // flip y so the plot reads with y up
        format!(
            concat!(
                r#"<?xml version="1.0" encoding="UTF-8"?>"#,
                "\n",
                r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="800" height="{}">"#,
                "\n",
                r#"<g transform="translate(0,{}) scale(1,-1)">"#,
                "\n{}</g>\n</svg>\n"
            ),
            self.min.x,
            self.min.y,
            size.x,
            size.y,
            (800.0 * size.y / size.x).round(),
            self.min.y + self.max.y,
            self.body
        )
    }
}
