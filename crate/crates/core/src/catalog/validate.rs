use std::collections::{BTreeSet, HashSet};

use serde::Serialize;

use super::{
    AimClass, Catalog, CulturalRegion, ResponseSchema, SurveyItem, REFERENCE_ENTITY_COUNT,
    REFERENCE_ITEM_COUNT, REFERENCE_POLITY_COUNT,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionCount {
    pub region: CulturalRegion,
    pub count: usize,
    pub expected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub total: usize,
    pub polities: usize,
    pub items: usize,
    pub region_counts: Vec<RegionCount>,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count_for(&self, region: CulturalRegion) -> usize {
        self.region_counts
            .iter()
            .find(|c| c.region == region)
            .map_or(0, |c| c.count)
    }
}

/// Checks a catalog against the reference taxonomy counts and the item/loading invariants.
pub fn validate_catalog(catalog: &Catalog) -> ValidationReport {
    let mut violations = Vec::new();

    let total = catalog.entities.len();
    if total != REFERENCE_ENTITY_COUNT {
        violations.push(format!("entity count {total} ≠ {REFERENCE_ENTITY_COUNT}"));
    }
    let polities = catalog.entities.iter().filter(|e| e.is_distinct_polity).count();
    if polities != REFERENCE_POLITY_COUNT {
        violations.push(format!("distinct polity count {polities} ≠ {REFERENCE_POLITY_COUNT}"));
    }

    let region_counts: Vec<RegionCount> = CulturalRegion::ALL
        .into_iter()
        .map(|region| RegionCount {
            region,
            count: catalog.entities_in(region).count(),
            expected: region.reference_count(),
        })
        .collect();
    for c in &region_counts {
        if c.count != c.expected {
            violations.push(format!("{} count {} ≠ {}", c.region, c.count, c.expected));
        }
    }

    let mut names = HashSet::new();
    for e in &catalog.entities {
        if e.display_name.trim().is_empty() {
            violations.push("entity with empty display name".to_string());
        } else if !names.insert(e.display_name.as_str()) {
            violations.push(format!("duplicate entity name {}", e.display_name));
        }
    }

    let items = catalog.items.len();
    if items != REFERENCE_ITEM_COUNT {
        violations.push(format!("item count {items} ≠ {REFERENCE_ITEM_COUNT}"));
    }
    let mut codes = HashSet::new();
    for item in &catalog.items {
        if !codes.insert(item.code.as_str()) {
            violations.push(format!("duplicate item code {}", item.code));
        }
        check_item(item, &mut violations);
    }

    check_loadings(catalog, &mut violations);

    ValidationReport {
        total,
        polities,
        items,
        region_counts,
        violations,
    }
}

fn check_item(item: &SurveyItem, out: &mut Vec<String>) {
    let code = &item.code;
    let (lo, hi) = item.bounds();
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        out.push(format!("{code}: bounds [{lo}, {hi}] must be finite with lo < hi"));
        return;
    }
    if item.dimensions.is_empty() {
        out.push(format!("{code}: no dimension assigned"));
    }
    let dims: BTreeSet<_> = item.dimensions.iter().collect();
    if dims.len() != item.dimensions.len() {
        out.push(format!("{code}: dimension listed twice"));
    }
    match &item.response {
        ResponseSchema::Likert { anchors, .. } => {
            for a in anchors {
                if a.value < lo || a.value > hi {
                    out.push(format!("{code}: anchor {} outside [{lo}, {hi}]", a.value));
                }
            }
        }
        ResponseSchema::MultiSelect {
            options, max_picks, ..
        } => {
            if *max_picks == 0 {
                out.push(format!("{code}: max_picks must be at least 1"));
            }
            if options.is_empty() || options.len() > 20 {
                out.push(format!("{code}: multi-select needs 1..=20 options"));
                return;
            }
            let (min_sum, max_sum) = rubric_range(options.iter().map(|o| o.weight), *max_picks);
            if min_sum < lo || max_sum > hi {
                out.push(format!(
                    "{code}: rubric range [{min_sum}, {max_sum}] exceeds bounds [{lo}, {hi}]"
                ));
            }
        }
        ResponseSchema::PickTwo { options, scores, .. } => {
            let numbers: BTreeSet<u8> = options.iter().map(|o| o.number).collect();
            if options.len() != 4 || numbers.len() != 4 {
                out.push(format!("{code}: pick-two needs 4 distinctly numbered options"));
            }
            for class in [AimClass::Materialist, AimClass::PostMaterialist] {
                if options.iter().filter(|o| o.class == class).count() < 2 {
                    out.push(format!("{code}: pick-two needs two options of class {class:?}"));
                }
            }
            for s in [scores.materialist, scores.mixed, scores.post_materialist] {
                if s < lo || s > hi {
                    out.push(format!("{code}: rubric score {s} outside [{lo}, {hi}]"));
                }
            }
        }
    }
}

/// Smallest and largest rubric sum over every non-empty pick set of at most `max_picks` options.
fn rubric_range(weights: impl Iterator<Item = f64>, max_picks: usize) -> (f64, f64) {
    let weights: Vec<f64> = weights.collect();
    let mut min_sum = f64::INFINITY;
    let mut max_sum = f64::NEG_INFINITY;
    for mask in 1u32..(1 << weights.len()) {
        if mask.count_ones() as usize > max_picks {
            continue;
        }
        let s: f64 = (0..weights.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| weights[i])
            .sum();
        min_sum = min_sum.min(s);
        max_sum = max_sum.max(s);
    }
    (min_sum, max_sum)
}

fn check_loadings(catalog: &Catalog, out: &mut Vec<String>) {
    for item in &catalog.items {
        for &dim in &item.dimensions {
            if catalog.loadings.get(&item.code, dim).is_none() {
                out.push(format!("{}: no factor loading for dimension {dim}", item.code));
            }
        }
    }
    for entry in catalog.loadings.entries() {
        let assigned = catalog
            .item(&entry.item)
            .is_some_and(|i| i.dimensions.contains(&entry.dimension));
        if !assigned {
            out.push(format!(
                "loading {}/{} has no matching item dimension",
                entry.item, entry.dimension
            ));
        }
        if !(entry.weight.is_finite() && entry.weight > 0.0) {
            out.push(format!("loading {}/{}: weight must be > 0", entry.item, entry.dimension));
        }
        if entry.sign != 1 && entry.sign != -1 {
            out.push(format!("loading {}/{}: sign must be ±1", entry.item, entry.dimension));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::shipped_catalog;

    #[test]
    fn shipped_catalog_matches_reference_counts() {
        let report = validate_catalog(&shipped_catalog());
        assert_eq!(report.violations, Vec::<String>::new());
        assert_eq!(report.total, 126);
        assert_eq!(report.polities, 123);
        assert_eq!(report.count_for(CulturalRegion::Confucian), 9);
        let counts: Vec<usize> = report.region_counts.iter().map(|c| c.count).collect();
        assert_eq!(counts, [26, 9, 19, 12, 8, 15, 17, 20]);
    }

    #[test]
    fn moving_an_entity_reports_both_regions() {
        let mut catalog = shipped_catalog();
        catalog
            .entities
            .iter_mut()
            .find(|e| e.display_name == "Japan")
            .unwrap()
            .region = CulturalRegion::LatinAmerica;
        let report = validate_catalog(&catalog);
        assert!(report.violations.contains(&"Confucian count 8 ≠ 9".to_string()));
        assert!(report.violations.contains(&"Latin America count 20 ≠ 19".to_string()));
    }

    #[test]
    fn rubric_overflow_is_a_violation() {
        let mut catalog = shipped_catalog();
        let y003 = catalog.items.iter_mut().find(|i| i.code == "Y003").unwrap();
        if let ResponseSchema::MultiSelect { options, .. } = &mut y003.response {
            options[0].weight = 3.0;
        }
        let report = validate_catalog(&catalog);
        assert!(report.violations.iter().any(|v| v.starts_with("Y003: rubric range")));
    }

    #[test]
    fn degenerate_likert_is_a_violation() {
        let mut catalog = shipped_catalog();
        catalog.items[0].response = ResponseSchema::Likert {
            min: 4.0,
            max: 4.0,
            anchors: vec![],
        };
        assert!(!validate_catalog(&catalog).is_valid());
    }

    #[test]
    fn missing_loading_is_a_violation() {
        let mut catalog = shipped_catalog();
        catalog.items[0].dimensions.push(crate::Dimension::SurvivalSelfExpression);
        let report = validate_catalog(&catalog);
        assert!(report
            .violations
            .contains(&"F063: no factor loading for dimension survival-self-expression".to_string()));
    }

    #[test]
    fn rubric_range_brute_force() {
        assert_eq!(rubric_range([1.0, -1.0, -1.0, 1.0, 0.0, 0.0].into_iter(), 5), (-2.0, 2.0));
        assert_eq!(rubric_range([1.0, 1.0, 1.0].into_iter(), 2), (1.0, 2.0));
    }
}
