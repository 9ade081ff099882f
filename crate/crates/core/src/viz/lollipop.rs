use std::fmt::Write as _;

use super::{
    escape, num, svg_open, ticks, Annotation, Axis, LegendEntry, LinearScale, MarkRecord,
    PlotBundle, PlotData, PlotKind,
};
use crate::catalog::Dimension;
use crate::compare::RegionMetrics;
use crate::scalar::Scalar;

pub const BELOW_COLOR: &str = "#2166ac";
pub const ABOVE_COLOR: &str = "#b2182b";

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 120.0;

/// Regional MSE as stems sorted ascending, with the benchmark threshold as a
/// dashed line. Marker color follows each region's `flagged` field.
pub fn emit_lollipop<T: Scalar>(
    metrics: &[RegionMetrics<T>],
    threshold: T,
    dimension: Dimension,
) -> PlotBundle {
    let threshold = threshold.to_f64_lossy();
    let mut sorted: Vec<&RegionMetrics<T>> = metrics.iter().collect();
    sorted.sort_by(|a, b| {
        a.mse
            .partial_cmp(&b.mse)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.region.name().cmp(b.region.name()))
    });

    let title = format!("Regional MSE, {}", dimension.label());
    let y_max = sorted
        .iter()
        .map(|m| m.mse.to_f64_lossy())
        .fold(threshold, f64::max)
        .max(1e-9)
        * 1.1;
    let sy = LinearScale::new(0.0, y_max, HEIGHT - BOTTOM, TOP);
    let band = (WIDTH - LEFT - RIGHT) / sorted.len().max(1) as f64;
    let (left, right, bottom) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM);

    let mut svg = svg_open(WIDTH, HEIGHT, &title);
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"28\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
        num(WIDTH / 2.0),
        escape(&title)
    );
    let _ = writeln!(
        svg,
        "<g class=\"axes\" stroke=\"#444444\"><line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/><line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/></g>",
        num(left), num(bottom), num(right), num(bottom),
        num(left), num(bottom), num(left), num(TOP)
    );
    for t in ticks(0.0, y_max) {
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>",
            num(left - 6.0),
            num(sy.map(t) + 3.0),
            num(t)
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"18\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">MSE</text>",
        num((TOP + bottom) / 2.0),
        num((TOP + bottom) / 2.0)
    );

    let mut marks = Vec::with_capacity(sorted.len());
    let _ = writeln!(svg, "<g class=\"marks\">");
    for (i, m) in sorted.iter().enumerate() {
        let mse = m.mse.to_f64_lossy();
        let cx = left + band * (i as f64 + 0.5);
        let cy = sy.map(mse);
        let color = if m.flagged { ABOVE_COLOR } else { BELOW_COLOR };
        let name = m.region.name();
        let _ = writeln!(
            svg,
            "<line class=\"stem\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#888888\" stroke-width=\"2\"/>",
            num(cx), num(bottom), num(cx), num(cy)
        );
        let _ = writeln!(
            svg,
            "<circle class=\"mark\" data-id=\"{}\" cx=\"{}\" cy=\"{}\" r=\"7\" fill=\"{color}\"/>",
            escape(name),
            num(cx),
            num(cy)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\" transform=\"rotate(-40 {} {})\">{}</text>",
            num(cx), num(bottom + 14.0), num(cx), num(bottom + 14.0),
            escape(name)
        );
        marks.push(MarkRecord {
            id: name.to_string(),
            label: name.to_string(),
            group: if m.flagged { "above" } else { "at-or-below" }.to_string(),
            x: None,
            y: Some(mse),
            value: Some(mse),
            color: color.to_string(),
            flagged: Some(m.flagged),
        });
    }
    let _ = writeln!(svg, "</g>");

    let ty = sy.map(threshold);
    let _ = writeln!(
        svg,
        "<line class=\"threshold\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#000000\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>",
        num(left), num(ty), num(right), num(ty)
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">threshold {}</text>",
        num(right),
        num(ty - 5.0),
        num(threshold)
    );
    svg.push_str("</svg>\n");

    PlotBundle {
        kind: PlotKind::Lollipop,
        svg,
        data: PlotData {
            kind: PlotKind::Lollipop,
            title,
            axes: vec![
                Axis { label: "Region".into(), min: 0.0, max: sorted.len() as f64 },
                Axis { label: "MSE".into(), min: 0.0, max: y_max },
            ],
            marks,
            legend: vec![
                LegendEntry { label: "at or below threshold".into(), color: BELOW_COLOR.into() },
                LegendEntry { label: "above threshold".into(), color: ABOVE_COLOR.into() },
            ],
            annotations: vec![Annotation {
                kind: "threshold".into(),
                label: "benchmark threshold".into(),
                value: threshold,
            }],
            unjoined: vec![],
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::CulturalRegion;
    use crate::compare::{benchmark_threshold, flag_regions};

    fn metrics(mses: &[f64]) -> Vec<RegionMetrics<f64>> {
        CulturalRegion::ALL
            .iter()
            .zip(mses)
            .map(|(r, m)| RegionMetrics {
                region: *r,
                dimension: Dimension::TraditionalSecular,
                mse: *m,
                mae: m.sqrt(),
                n: 3,
                flagged: false,
            })
            .collect()
    }

    #[test]
    fn colors_follow_flags() {
        let raw = metrics(&[0.9, 0.1, 0.45, 0.3, 0.2, 0.7, 0.5, 0.6]);
        let flagged = flag_regions(&raw, 0.5).unwrap();
        let bundle = emit_lollipop(&flagged, 0.5, Dimension::TraditionalSecular);
        assert_eq!(bundle.svg.matches(ABOVE_COLOR).count(), 3);
        assert_eq!(bundle.svg.matches(&format!("fill=\"{BELOW_COLOR}\"")).count(), 5);
        assert_eq!(bundle.svg.matches("class=\"stem\"").count(), 8);
        assert!(bundle.svg.contains("stroke-dasharray"));
        for m in &bundle.data.marks {
            let expected = if m.flagged == Some(true) { ABOVE_COLOR } else { BELOW_COLOR };
            assert_eq!(m.color, expected);
        }
        let values: Vec<f64> = bundle.data.marks.iter().map(|m| m.value.unwrap()).collect();
        assert!(values.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(bundle.data.annotations[0].value, 0.5);
    }

    #[test]
    fn threshold_from_metrics_matches_flags() {
        let raw = metrics(&[0.1, 0.2, 0.4, 0.6, 0.9, 1.1, 1.3, 2.0]);
        let t = benchmark_threshold(&raw, 3, 4).unwrap();
        let bundle = emit_lollipop(&flag_regions(&raw, t).unwrap(), t, Dimension::TraditionalSecular);
        let red = bundle.data.marks.iter().filter(|m| m.color == ABOVE_COLOR).count();
        assert_eq!(red, 5);
    }

    #[test]
    fn all_below_has_no_red() {
        let raw = metrics(&[0.1; 8]);
        let bundle = emit_lollipop(&flag_regions(&raw, 0.5).unwrap(), 0.5, Dimension::TraditionalSecular);
        assert!(!bundle.svg.contains(ABOVE_COLOR));
        assert!(bundle.data.marks.iter().all(|m| m.color == BELOW_COLOR));
    }

    #[test]
    fn input_order_does_not_change_output() {
        let raw = flag_regions(&metrics(&[0.9, 0.1, 0.45, 0.3, 0.2, 0.7, 0.5, 0.6]), 0.5).unwrap();
        let mut reversed = raw.clone();
        reversed.reverse();
        let a = emit_lollipop(&raw, 0.5, Dimension::TraditionalSecular);
        let b = emit_lollipop(&reversed, 0.5, Dimension::TraditionalSecular);
        assert_eq!(a.svg, b.svg);
        assert_eq!(a.data, b.data);
    }
}
