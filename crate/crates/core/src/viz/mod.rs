//! Static SVG figures with sidecar plot-data documents.
//!
//! Every mark in an SVG carries a `data-id` attribute naming the record in the
//! data document it was drawn from. Output is deterministic: numbers are
//! printed with fixed precision and nothing depends on hash order or time.

mod choropleth;
mod lollipop;
mod scatter;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use choropleth::{
    emit_choropleth, load_geometry, parse_geometry, ChoroplethMode, GeometryLoadError,
    WorldGeometry, NO_DATA_FILL,
};
pub use lollipop::{emit_lollipop, ABOVE_COLOR, BELOW_COLOR};
pub use scatter::{emit_scatter_map, region_color};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    ScatterMap,
    Lollipop,
    Choropleth,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::ScatterMap => "scatter-map",
            PlotKind::Lollipop => "lollipop",
            PlotKind::Choropleth => "choropleth",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub label: String,
    pub min: f64,
    pub max: f64,
}

/// One drawn mark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkRecord {
    pub id: String,
    pub label: String,
    /// Legend group or series the mark belongs to.
    pub group: String,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub value: Option<f64>,
    pub color: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flagged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub kind: String,
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendEntry {
    pub label: String,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub kind: PlotKind,
    pub title: String,
    pub axes: Vec<Axis>,
    pub marks: Vec<MarkRecord>,
    pub legend: Vec<LegendEntry>,
    pub annotations: Vec<Annotation>,
    /// Inputs that could not be drawn, for example entities without geometry.
    pub unjoined: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotBundle {
    pub kind: PlotKind,
    pub svg: String,
    pub data: PlotData,
}

impl PlotBundle {
    pub fn data_json(&self) -> String {
        serde_json::to_string_pretty(&self.data).expect("plot data always serializes")
    }

    /// `data-id` values of the marks in the SVG, in document order.
    pub fn svg_mark_ids(&self) -> Vec<String> {
        let mut ids = Vec::new();
        let mut rest = self.svg.as_str();
        while let Some(at) = rest.find("data-id=\"") {
            rest = &rest[at + 9..];
            let end = rest.find('"').unwrap_or(rest.len());
            ids.push(unescape(&rest[..end]));
            rest = &rest[end..];
        }
        ids
    }
}

/// Fixed-precision number for SVG attributes.
pub(crate) fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

pub(crate) fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
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

fn unescape(text: &str) -> String {
    text.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&apos;", "'")
        .replace("&amp;", "&")
}

pub(crate) fn svg_open(width: f64, height: f64, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" font-family=\"sans-serif\">",
        num(width),
        num(height),
        num(width),
        num(height)
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(
        s,
        "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>",
        num(width),
        num(height)
    );
    s
}

/// Maps `[lo, hi]` onto `[a, b]`; a zero-width domain maps to the midpoint.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LinearScale {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl LinearScale {
    pub(crate) fn new(lo: f64, hi: f64, a: f64, b: f64) -> Self {
        LinearScale { lo, hi, a, b }
    }

    pub(crate) fn map(&self, v: f64) -> f64 {
        if self.hi == self.lo {
            return (self.a + self.b) / 2.0;
        }
        self.a + (v - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }
}

/// Padded data extent; a single value gets a unit window around it.
pub(crate) fn extent(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-9 {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = (hi - lo) * 0.08;
    (lo - pad, hi + pad)
}

/// Five evenly spaced tick values across `[lo, hi]`.
pub(crate) fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    (0..5).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub(crate) fn hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.0, self.1, self.2)
    }

    /// Linear blend, `t` clamped to `[0, 1]`.
    pub(crate) fn mix(self, other: Rgb, t: f64) -> Rgb {
        let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 1.0 };
        let ch = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * t).round() as u8;
        Rgb(ch(self.0, other.0), ch(self.1, other.1), ch(self.2, other.2))
    }

    /// Relative luminance proxy used for monotonicity checks.
    #[cfg(test)]
    pub(crate) fn lightness(self) -> u32 {
        self.0 as u32 + self.1 as u32 + self.2 as u32
    }

    #[cfg(test)]
    pub(crate) fn parse(hex: &str) -> Option<Rgb> {
        let h = hex.strip_prefix('#')?;
        if h.len() != 6 {
            return None;
        }
        let p = |i: usize| u8::from_str_radix(&h[i..i + 2], 16).ok();
        Some(Rgb(p(0)?, p(2)?, p(4)?))
    }
}

pub(crate) const WHITE: Rgb = Rgb(255, 255, 255);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_is_fixed() {
        assert_eq!(num(1.0), "1.00");
        assert_eq!(num(-0.001), "0.00");
        assert_eq!(num(2.345678), "2.35");
    }

    #[test]
    fn escaping_round_trips() {
        let s = "Côte d'Ivoire & <Bosnia> \"x\"";
        assert_eq!(unescape(&escape(s)), s);
    }

    #[test]
    fn color_mix_endpoints() {
        let red = Rgb(178, 24, 43);
        assert_eq!(WHITE.mix(red, 0.0), WHITE);
        assert_eq!(WHITE.mix(red, 1.0), red);
        assert_eq!(Rgb::parse(&red.hex()), Some(red));
    }

    #[test]
    fn extent_handles_degenerate_input() {
        assert_eq!(extent([0.5]), (-0.5, 1.5));
        assert_eq!(extent(std::iter::empty()), (-1.0, 1.0));
        let (lo, hi) = extent([0.0, 1.0]);
        assert!(lo < 0.0 && hi > 1.0);
    }
}
