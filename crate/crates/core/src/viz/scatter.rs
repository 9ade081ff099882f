use std::fmt::Write as _;

use super::{
    escape, extent, num, svg_open, ticks, Axis, LegendEntry, LinearScale, MarkRecord, PlotBundle,
    PlotData, PlotKind,
};
use crate::catalog::{Catalog, CulturalRegion};
use crate::index::CulturalMap;
use crate::scalar::Scalar;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 720.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 210.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;

pub fn region_color(region: CulturalRegion) -> &'static str {
    match region {
        CulturalRegion::AfricanIslamic => "#e69f00",
        CulturalRegion::Confucian => "#56b4e9",
        CulturalRegion::LatinAmerica => "#009e73",
        CulturalRegion::CatholicEurope => "#cc79a7",
        CulturalRegion::EnglishSpeaking => "#0072b2",
        CulturalRegion::OrthodoxEurope => "#d55e00",
        CulturalRegion::ProtestantEurope => "#6a3d9a",
        CulturalRegion::WestSouthAsia => "#8c6d31",
    }
}

const UNASSIGNED: &str = "#7f7f7f";

/// Survival/self-expression on x, traditional/secular-rational on y, one
/// labeled point per entity colored by region.
pub fn emit_scatter_map<T: Scalar>(map: &CulturalMap<T>, catalog: &Catalog) -> PlotBundle {
    let title = "Cultural value map";
    let xs: Vec<f64> = map.points.iter().map(|p| p.surv_self.to_f64_lossy()).collect();
    let ys: Vec<f64> = map.points.iter().map(|p| p.trad_sec.to_f64_lossy()).collect();
    let (x_lo, x_hi) = extent(xs.iter().copied());
    let (y_lo, y_hi) = extent(ys.iter().copied());
    let sx = LinearScale::new(x_lo, x_hi, LEFT, WIDTH - RIGHT);
    let sy = LinearScale::new(y_lo, y_hi, HEIGHT - BOTTOM, TOP);

    let x_label = "Survival vs. Self-Expression values";
    let y_label = "Traditional vs. Secular-Rational values";
    let mut svg = svg_open(WIDTH, HEIGHT, title);
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"28\" font-size=\"18\" text-anchor=\"middle\">{title}</text>",
        num((LEFT + WIDTH - RIGHT) / 2.0)
    );
    axes(&mut svg, &sx, &sy, (x_lo, x_hi), (y_lo, y_hi), x_label, y_label);

    let mut marks = Vec::with_capacity(map.points.len());
    let _ = writeln!(svg, "<g class=\"marks\">");
    for (i, p) in map.points.iter().enumerate() {
        let (x, y) = (xs[i], ys[i]);
        let region = catalog.region_of(&p.entity).ok();
        let color = region.map_or(UNASSIGNED, region_color);
        let (cx, cy) = (sx.map(x), sy.map(y));
        let _ = writeln!(
            svg,
            "<circle class=\"mark\" data-id=\"{}\" cx=\"{}\" cy=\"{}\" r=\"4.5\" fill=\"{color}\" stroke=\"#333333\" stroke-width=\"0.5\"/>",
            escape(&p.entity),
            num(cx),
            num(cy)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"8\" fill=\"#333333\">{}</text>",
            num(cx + 6.0),
            num(cy + 3.0),
            escape(&p.entity)
        );
        marks.push(MarkRecord {
            id: p.entity.clone(),
            label: p.entity.clone(),
            group: region.map_or_else(|| "unassigned".to_string(), |r| r.name().to_string()),
            x: Some(x),
            y: Some(y),
            value: None,
            color: color.to_string(),
            flagged: None,
        });
    }
    let _ = writeln!(svg, "</g>");

    let legend: Vec<LegendEntry> = CulturalRegion::ALL
        .iter()
        .map(|r| LegendEntry {
            label: r.name().to_string(),
            color: region_color(*r).to_string(),
        })
        .collect();
    let lx = WIDTH - RIGHT + 20.0;
    let _ = writeln!(svg, "<g class=\"legend\">");
    for (i, entry) in legend.iter().enumerate() {
        let ly = TOP + 10.0 + i as f64 * 22.0;
        let _ = writeln!(
            svg,
            "<circle class=\"legend-key\" cx=\"{}\" cy=\"{}\" r=\"6\" fill=\"{}\"/><text x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>",
            num(lx),
            num(ly),
            entry.color,
            num(lx + 12.0),
            num(ly + 4.0),
            escape(&entry.label)
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");

    PlotBundle {
        kind: PlotKind::ScatterMap,
        svg,
        data: PlotData {
            kind: PlotKind::ScatterMap,
            title: title.to_string(),
            axes: vec![
                Axis { label: x_label.into(), min: x_lo, max: x_hi },
                Axis { label: y_label.into(), min: y_lo, max: y_hi },
            ],
            marks,
            legend,
            annotations: vec![],
            unjoined: vec![],
        },
    }
}

fn axes(
    svg: &mut String,
    sx: &LinearScale,
    sy: &LinearScale,
    (x_lo, x_hi): (f64, f64),
    (y_lo, y_hi): (f64, f64),
    x_label: &str,
    y_label: &str,
) {
    let (left, right) = (LEFT, WIDTH - RIGHT);
    let (top, bottom) = (TOP, HEIGHT - BOTTOM);
    let _ = writeln!(svg, "<g class=\"axes\" stroke=\"#444444\" stroke-width=\"1\">");
    let _ = writeln!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/><line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>",
        num(left), num(bottom), num(right), num(bottom),
        num(left), num(bottom), num(left), num(top)
    );
    let _ = writeln!(svg, "</g>");
    for t in ticks(x_lo, x_hi) {
        let x = sx.map(t);
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{}</text>",
            num(x),
            num(bottom + 16.0),
            num(t)
        );
    }
    for t in ticks(y_lo, y_hi) {
        let y = sy.map(t);
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>",
            num(left - 6.0),
            num(y + 3.0),
            num(t)
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{}</text>",
        num((left + right) / 2.0),
        num(HEIGHT - 15.0),
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        "<text x=\"18\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>",
        num((top + bottom) / 2.0),
        num((top + bottom) / 2.0),
        escape(y_label)
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::shipped_catalog;
    use crate::index::{CulturalIndexPoint, Projection};

    fn map(points: &[(&str, f64, f64)]) -> CulturalMap<f64> {
        CulturalMap {
            points: points
                .iter()
                .map(|(e, t, s)| CulturalIndexPoint {
                    entity: e.to_string(),
                    trad_sec: *t,
                    surv_self: *s,
                    contributions: vec![],
                })
                .collect(),
            projection: Projection::default(),
        }
    }

    #[test]
    fn full_map_has_one_mark_per_entity_and_full_legend() {
        let catalog = shipped_catalog();
        let points: Vec<(&str, f64, f64)> = catalog
            .entities
            .iter()
            .enumerate()
            .map(|(i, e)| (e.display_name.as_str(), (i as f64).sin(), (i as f64).cos()))
            .collect();
        let bundle = emit_scatter_map(&map(&points), &catalog);
        assert_eq!(bundle.data.marks.len(), 126);
        assert_eq!(bundle.svg_mark_ids().len(), 126);
        assert_eq!(bundle.data.legend.len(), 8);
        assert_eq!(bundle.svg.matches("class=\"legend-key\"").count(), 8);
        let ids: Vec<String> = bundle.data.marks.iter().map(|m| m.id.clone()).collect();
        assert_eq!(bundle.svg_mark_ids(), ids);
        let colors: std::collections::HashSet<_> =
            bundle.data.marks.iter().map(|m| m.color.clone()).collect();
        assert_eq!(colors.len(), 8);
    }

    #[test]
    fn degenerate_maps() {
        let catalog = shipped_catalog();
        let one = emit_scatter_map(&map(&[("Japan", 1.0, 0.5)]), &catalog);
        assert_eq!(one.svg_mark_ids(), vec!["Japan".to_string()]);
        assert!(one.svg.contains("Survival vs. Self-Expression"));
        let twins = emit_scatter_map(&map(&[("Japan", 1.0, 0.5), ("China", 1.0, 0.5)]), &catalog);
        assert_eq!(twins.svg_mark_ids().len(), 2);
        assert_eq!(twins.data.marks.len(), 2);
    }

    #[test]
    fn emission_is_deterministic() {
        let catalog = shipped_catalog();
        let m = map(&[("Japan", 1.0, 0.5), ("Nigeria", -1.0, -0.5)]);
        let a = emit_scatter_map(&m, &catalog);
        let b = emit_scatter_map(&m, &catalog);
        assert_eq!(a.svg, b.svg);
        assert_eq!(a.data_json(), b.data_json());
    }
}
