//! World choropleth of entity differences.
//!
//! Geometry input is a GeoJSON FeatureCollection in lon/lat degrees. Each
//! feature names its country with an ISO 3166-1 alpha-3 code in one of the
//! properties `iso3`, `ISO3`, `iso_a3`, `ISO_A3` or `ADM0_A3`. Codes pass
//! through the catalog's code synonyms before joining. Coordinates are drawn
//! equirectangularly.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use geojson::{GeoJson, Value};
use thiserror::Error;

use super::{escape, num, svg_open, Annotation, LegendEntry, MarkRecord, PlotBundle, PlotData, PlotKind, Rgb, WHITE};
use crate::catalog::{Catalog, Dimension};
use crate::compare::EntityDiff;
use crate::scalar::Scalar;

pub const NO_DATA_FILL: &str = "#d9d9d9";
const POSITIVE: Rgb = Rgb(178, 24, 43);
const NEGATIVE: Rgb = Rgb(33, 102, 172);
const DARK: Rgb = Rgb(8, 48, 107);
/// Smallest blend toward the end color for a nonzero value, so tiny
/// differences never quantize to the zero color.
const MIN_TINT: f64 = 0.05;

const WIDTH: f64 = 1000.0;
const MAP_HEIGHT: f64 = 500.0;
const HEIGHT: f64 = 580.0;

const CODE_KEYS: [&str; 5] = ["iso3", "ISO3", "iso_a3", "ISO_A3", "ADM0_A3"];

#[derive(Debug, Error)]
pub enum GeometryLoadError {
    #[error("geometry file not found: {0}")]
    Missing(PathBuf),
    #[error("geometry {0}: {1}")]
    Invalid(String, String),
}

/// Rings per iso3 code, in feature order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorldGeometry {
    shapes: BTreeMap<String, Vec<Vec<(f64, f64)>>>,
}

impl WorldGeometry {
    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.shapes.keys().map(String::as_str)
    }

    pub fn contains(&self, code: &str) -> bool {
        self.shapes.contains_key(code)
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }
}

fn rings_of(value: &Value, out: &mut Vec<Vec<(f64, f64)>>) {
    let ring = |r: &Vec<Vec<f64>>| -> Vec<(f64, f64)> {
        r.iter().filter(|p| p.len() >= 2).map(|p| (p[0], p[1])).collect()
    };
    match value {
        Value::Polygon(poly) => out.extend(poly.iter().map(ring)),
        Value::MultiPolygon(polys) => {
            for poly in polys {
                out.extend(poly.iter().map(ring));
            }
        }
        Value::GeometryCollection(geoms) => {
            for g in geoms {
                rings_of(&g.value, out);
            }
        }
        _ => {}
    }
}

pub fn parse_geometry(text: &str, label: &str, catalog: &Catalog) -> Result<WorldGeometry, GeometryLoadError> {
    let invalid = |m: String| GeometryLoadError::Invalid(label.to_string(), m);
    let geojson: GeoJson = text.parse().map_err(|e: geojson::Error| invalid(e.to_string()))?;
    let GeoJson::FeatureCollection(collection) = geojson else {
        return Err(invalid("expected a FeatureCollection".into()));
    };
    let mut shapes: BTreeMap<String, Vec<Vec<(f64, f64)>>> = BTreeMap::new();
    for (i, feature) in collection.features.iter().enumerate() {
        let code = CODE_KEYS
            .iter()
            .find_map(|k| feature.property(k).and_then(|v| v.as_str()))
            .map(|c| catalog.canonical_code(c.trim()).to_string());
        let Some(code) = code else {
            return Err(invalid(format!("feature {i} has no iso3 property")));
        };
        let Some(geometry) = &feature.geometry else {
            continue;
        };
        rings_of(&geometry.value, shapes.entry(code).or_default());
    }
    if shapes.is_empty() {
        return Err(invalid("no features".into()));
    }
    Ok(WorldGeometry { shapes })
}

pub fn load_geometry(path: &Path, catalog: &Catalog) -> Result<WorldGeometry, GeometryLoadError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => GeometryLoadError::Missing(path.to_path_buf()),
        _ => GeometryLoadError::Invalid(path.display().to_string(), e.to_string()),
    })?;
    parse_geometry(&text, &path.display().to_string(), catalog)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChoroplethMode {
    Signed,
    Absolute,
}

impl ChoroplethMode {
    pub fn name(self) -> &'static str {
        match self {
            ChoroplethMode::Signed => "signed",
            ChoroplethMode::Absolute => "absolute",
        }
    }
}

/// Fill for a difference. Signed: red above zero, blue below, white at zero,
/// saturating at `±max`. Absolute: white at zero to dark at `max`.
pub(crate) fn fill(mode: ChoroplethMode, value: f64, max: f64) -> Rgb {
    let t = if max > 0.0 { value.abs() / max } else { 0.0 };
    let t = if value != 0.0 { MIN_TINT + (1.0 - MIN_TINT) * t } else { 0.0 };
    match mode {
        ChoroplethMode::Signed if value > 0.0 => WHITE.mix(POSITIVE, t),
        ChoroplethMode::Signed if value < 0.0 => WHITE.mix(NEGATIVE, t),
        ChoroplethMode::Signed => WHITE,
        ChoroplethMode::Absolute => WHITE.mix(DARK, t),
    }
}

fn project((lon, lat): (f64, f64)) -> (f64, f64) {
    ((lon + 180.0) / 360.0 * WIDTH, (90.0 - lat) / 180.0 * MAP_HEIGHT)
}

fn path_data(rings: &[Vec<(f64, f64)>]) -> String {
    let mut d = String::new();
    for ring in rings.iter().filter(|r| !r.is_empty()) {
        for (i, p) in ring.iter().enumerate() {
            let (x, y) = project(*p);
            let _ = write!(d, "{}{},{}", if i == 0 { "M" } else { "L" }, num(x), num(y));
        }
        d.push('Z');
    }
    d
}

/// One filled polygon per joined entity; unmatched geometry is drawn in the
/// no-data fill; entities with no iso3 code or no geometry are listed in
/// `data.unjoined`.
pub fn emit_choropleth<T: Scalar>(
    diffs: &[EntityDiff<T>],
    mode: ChoroplethMode,
    dimension: Dimension,
    geometry: &WorldGeometry,
    catalog: &Catalog,
) -> PlotBundle {
    let title = format!("{} difference, {}", capitalize(mode.name()), dimension.label());
    let values: Vec<(&str, f64)> = diffs
        .iter()
        .filter(|d| d.dimension == dimension)
        .map(|d| (d.entity.as_str(), d.signed.to_f64_lossy()))
        .collect();
    let max = values.iter().fold(0.0f64, |m, (_, v)| m.max(v.abs()));

    let mut by_code: HashMap<String, (&str, f64)> = HashMap::new();
    let mut unjoined = Vec::new();
    for (entity, v) in &values {
        let code = catalog
            .entity(entity)
            .and_then(|e| e.iso3_code.as_deref())
            .map(|c| catalog.canonical_code(c).to_string());
        match code {
            Some(c) if geometry.contains(&c) && !by_code.contains_key(&c) => {
                by_code.insert(c, (entity, *v));
            }
            _ => unjoined.push(entity.to_string()),
        }
    }

    let mut svg = svg_open(WIDTH, HEIGHT, &title);
    let _ = writeln!(
        svg,
        "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#f4f8fb\"/>",
        num(WIDTH),
        num(MAP_HEIGHT)
    );
    let mut marks = Vec::new();
    let _ = writeln!(svg, "<g class=\"no-data\">");
    for (code, rings) in &geometry.shapes {
        if !by_code.contains_key(code) {
            let _ = writeln!(
                svg,
                "<path class=\"no-data\" data-code=\"{}\" d=\"{}\" fill=\"{NO_DATA_FILL}\" stroke=\"#ffffff\" stroke-width=\"0.4\"/>",
                escape(code),
                path_data(rings)
            );
        }
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, "<g class=\"marks\">");
    for (code, rings) in &geometry.shapes {
        let Some((entity, v)) = by_code.get(code) else { continue };
        let color = fill(mode, *v, max).hex();
        let shown = match mode {
            ChoroplethMode::Signed => *v,
            ChoroplethMode::Absolute => v.abs(),
        };
        let _ = writeln!(
            svg,
            "<path class=\"mark\" data-id=\"{}\" data-code=\"{}\" d=\"{}\" fill=\"{color}\" stroke=\"#555555\" stroke-width=\"0.4\"><title>{}: {}</title></path>",
            escape(entity),
            escape(code),
            path_data(rings),
            escape(entity),
            num(shown)
        );
        marks.push(MarkRecord {
            id: entity.to_string(),
            label: code.clone(),
            group: mode.name().to_string(),
            x: None,
            y: None,
            value: Some(shown),
            color,
            flagged: None,
        });
    }
    let _ = writeln!(svg, "</g>");

    let (legend, domain) = legend(mode, max);
    let _ = writeln!(svg, "<g class=\"legend\">");
    for (i, entry) in legend.iter().enumerate() {
        let x = 40.0 + i as f64 * 110.0;
        let _ = writeln!(
            svg,
            "<rect x=\"{}\" y=\"{}\" width=\"18\" height=\"12\" fill=\"{}\" stroke=\"#555555\" stroke-width=\"0.4\"/><text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>",
            num(x),
            num(MAP_HEIGHT + 30.0),
            entry.color,
            num(x + 24.0),
            num(MAP_HEIGHT + 40.0),
            escape(&entry.label)
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
        num(WIDTH / 2.0),
        num(HEIGHT - 12.0),
        escape(&title)
    );
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");

    unjoined.sort();
    PlotBundle {
        kind: PlotKind::Choropleth,
        svg,
        data: PlotData {
            kind: PlotKind::Choropleth,
            title,
            axes: vec![],
            marks,
            legend,
            annotations: vec![
                Annotation { kind: "domain-min".into(), label: "scale minimum".into(), value: domain.0 },
                Annotation { kind: "domain-max".into(), label: "scale maximum".into(), value: domain.1 },
            ],
            unjoined,
        },
    }
}

fn legend(mode: ChoroplethMode, max: f64) -> (Vec<LegendEntry>, (f64, f64)) {
    let stops: Vec<f64> = match mode {
        ChoroplethMode::Signed => vec![-max, -max / 2.0, 0.0, max / 2.0, max],
        ChoroplethMode::Absolute => vec![0.0, max / 4.0, max / 2.0, 3.0 * max / 4.0, max],
    };
    let mut entries: Vec<LegendEntry> = stops
        .iter()
        .map(|v| LegendEntry {
            label: num(*v),
            color: fill(mode, *v, max).hex(),
        })
        .collect();
    entries.push(LegendEntry {
        label: "no data".into(),
        color: NO_DATA_FILL.into(),
    });
    let domain = match mode {
        ChoroplethMode::Signed => (-max, max),
        ChoroplethMode::Absolute => (0.0, max),
    };
    (entries, domain)
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}
