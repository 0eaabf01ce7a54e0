//! Log-log scatter plots with an optional fitted power-law line, as SVG,
//! plus a TSV table of the plotted numbers.
//!
//! Layout: 800×600 canvas, 60 px margins, base-10 axes spanning whole
//! decades with a tick per decade. A power law is a straight line in these
//! coordinates, so the fit is drawn as a single segment across the data's
//! x-range.

use std::fmt::Write;

use thiserror::Error;

use crate::corpus::RatingSnapshot;
use crate::powerfit::{relation_pairs, PowerLawFit, Relation};

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
pub const MARGIN: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitLine {
    pub exponent: f64,
    pub prefactor: f64,
}

impl FitLine {
    pub fn eval(&self, x: f64) -> f64 {
        self.prefactor * x.powf(self.exponent)
    }
}

impl From<&PowerLawFit> for FitLine {
    fn from(fit: &PowerLawFit) -> Self {
        Self {
            exponent: fit.exponent,
            prefactor: fit.prefactor,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
    pub fit_line: Option<FitLine>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlotError {
    #[error("nothing to plot: no points")]
    Empty,
    #[error("point {index} ({x}, {y}) is not strictly positive and finite")]
    Domain { index: usize, x: f64, y: f64 },
    #[error("fit line must have a positive prefactor and finite exponent")]
    BadFitLine,
}

impl PlotSpec {
    /// Plot of one relation of a snapshot. Sites with a zero coordinate
    /// cannot sit on log axes and are left out.
    pub fn for_relation(
        snapshot: &RatingSnapshot,
        relation: Relation,
        fit: Option<&PowerLawFit>,
    ) -> Self {
        let (x_label, y_label) = match relation {
            Relation::HostsVsRank => ("rank", "hosts"),
            Relation::HitsVsRank => ("rank", "hits"),
            Relation::HitsVsHosts => ("hosts", "hits"),
        };
        let title = if snapshot.category().is_empty() {
            relation.to_string()
        } else {
            format!("{}: {}", snapshot.category(), relation)
        };
        Self {
            title,
            x_label: x_label.into(),
            y_label: y_label.into(),
            points: relation_pairs(snapshot, relation)
                .into_iter()
                .filter(|&(x, y)| x > 0.0 && y > 0.0)
                .collect(),
            fit_line: fit.map(FitLine::from),
        }
    }

    pub fn validate(&self) -> Result<(), PlotError> {
        if self.points.is_empty() {
            return Err(PlotError::Empty);
        }
        for (index, &(x, y)) in self.points.iter().enumerate() {
            if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
                return Err(PlotError::Domain { index, x, y });
            }
        }
        if let Some(line) = self.fit_line {
            if !(line.prefactor > 0.0 && line.prefactor.is_finite() && line.exponent.is_finite()) {
                return Err(PlotError::BadFitLine);
            }
        }
        Ok(())
    }

    fn x_extent(&self) -> (f64, f64) {
        extent(self.points.iter().map(|p| p.0))
    }
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// Whole-decade exponent range covering `[lo, hi]`, at least one decade wide.
fn decades(lo: f64, hi: f64) -> (i32, i32) {
    let a = lo.log10().floor() as i32;
    let mut b = hi.log10().ceil() as i32;
    if b <= a {
        b = a + 1;
    }
    (a, b)
}

/// Maps data coordinates to canvas pixels.
#[derive(Debug, Clone, Copy)]
pub struct Axes {
    pub x_decades: (i32, i32),
    pub y_decades: (i32, i32),
}

impl Axes {
    pub fn for_spec(spec: &PlotSpec) -> Self {
        let (x_lo, x_hi) = spec.x_extent();
        let (mut y_lo, mut y_hi) = extent(spec.points.iter().map(|p| p.1));
        if let Some(line) = spec.fit_line {
            for y in [line.eval(x_lo), line.eval(x_hi)] {
                if y > 0.0 && y.is_finite() {
                    y_lo = y_lo.min(y);
                    y_hi = y_hi.max(y);
                }
            }
        }
        Self {
            x_decades: decades(x_lo, x_hi),
            y_decades: decades(y_lo, y_hi),
        }
    }

    pub fn px(&self, x: f64) -> f64 {
        let (a, b) = self.x_decades;
        MARGIN + (x.log10() - a as f64) / (b - a) as f64 * (WIDTH - 2.0 * MARGIN)
    }

    pub fn py(&self, y: f64) -> f64 {
        let (a, b) = self.y_decades;
        HEIGHT - MARGIN - (y.log10() - a as f64) / (b - a) as f64 * (HEIGHT - 2.0 * MARGIN)
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

pub fn render_svg(spec: &PlotSpec) -> Result<String, PlotError> {
    spec.validate()?;
    let axes = Axes::for_spec(spec);
    let (left, right) = (MARGIN, WIDTH - MARGIN);
    let (top, bottom) = (MARGIN, HEIGHT - MARGIN);

    let mut s = String::new();
    // write! into a String cannot fail
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        MARGIN / 2.0,
        escape(&spec.title)
    );

    let _ = writeln!(
        s,
        r#"<g class="axes" stroke="black" stroke-width="1" fill="none">"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{bottom}" x2="{left}" y2="{top}"/>"#
    );
    let _ = writeln!(s, "</g>");

    let _ = writeln!(
        s,
        r#"<g class="ticks" font-family="sans-serif" font-size="12">"#
    );
    for d in axes.x_decades.0..=axes.x_decades.1 {
        let x = axes.px(10f64.powi(d));
        let _ = writeln!(
            s,
            r#"<line x1="{x:.3}" y1="{bottom}" x2="{x:.3}" y2="{}" stroke="black"/><text x="{x:.3}" y="{}" text-anchor="middle">1e{d}</text>"#,
            bottom + 6.0,
            bottom + 20.0
        );
    }
    for d in axes.y_decades.0..=axes.y_decades.1 {
        let y = axes.py(10f64.powi(d));
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y:.3}" x2="{left}" y2="{y:.3}" stroke="black"/><text x="{}" y="{:.3}" text-anchor="end">1e{d}</text>"#,
            left - 6.0,
            left - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(
        s,
        r#"<text class="x-label" x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text class="y-label" x="20" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14" transform="rotate(-90 20 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(&spec.y_label)
    );

    if let Some(line) = spec.fit_line {
        let (x_lo, x_hi) = spec.x_extent();
        let _ = writeln!(
            s,
            r#"<line class="fit" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="crimson" stroke-width="1.5"/>"#,
            axes.px(x_lo),
            axes.py(line.eval(x_lo)),
            axes.px(x_hi),
            axes.py(line.eval(x_hi))
        );
    }

    let _ = writeln!(s, r#"<g class="points" fill="steelblue">"#);
    for &(x, y) in &spec.points {
        let _ = writeln!(
            s,
            r#"<circle class="point" cx="{:.3}" cy="{:.3}" r="3"/>"#,
            axes.px(x),
            axes.py(y)
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    Ok(s)
}

/// TSV with header `x\ty\ty_fit`, one row per point in input order.
/// Numbers use shortest round-trip formatting; `y_fit` is blank without a
/// fit line.
pub fn emit_table(spec: &PlotSpec) -> Result<String, PlotError> {
    spec.validate()?;
    let mut s = String::from("x\ty\ty_fit\n");
    for &(x, y) in &spec.points {
        let fit = spec
            .fit_line
            .map(|l| l.eval(x).to_string())
            .unwrap_or_default();
        let _ = writeln!(s, "{x}\t{y}\t{fit}");
    }
    Ok(s)
}
