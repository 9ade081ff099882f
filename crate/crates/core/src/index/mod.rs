//! Standardization, factor weighting, per-entity aggregation and the 2-D map.
//!
//! Every item value `x` on a scale `[lo, hi]` is standardized as
//! `z = (x - mu) / sigma` with `mu = (lo + hi) / 2` and `sigma = (hi - lo) / sqrt(12)`,
//! i.e. against a uniform distribution over the scale. Each dimension index is
//! the loading-weighted mean of the signed `z` scores of that dimension's items.

mod loadings;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, Dimension};
use crate::codec::EncodedResponse;
use crate::scalar::{sqrt_twelve, Scalar};

pub use loadings::{FactorLoadingTable, Loading};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IndexError {
    #[error("degenerate scale: lo ({lo}) must be below hi ({hi})")]
    DegenerateScale { lo: f64, hi: f64 },
    #[error("value {x} outside scale [{lo}, {hi}]")]
    OutOfBounds { x: f64, lo: f64, hi: f64 },
    #[error("no factor loading for item {item} on {dimension}")]
    MissingLoading { item: String, dimension: Dimension },
    #[error("{entity}: missing responses for items {}", .missing.join(", "))]
    IncompleteResponses { entity: String, missing: Vec<String> },
    #[error("{entity}: more than one response for item {item}")]
    DuplicateResponse { entity: String, item: String },
    #[error("{entity}: response for item {item} not in catalog")]
    UnknownItem { entity: String, item: String },
    #[error("{entity}: no responses contribute to {dimension}")]
    EmptyDimension { entity: String, dimension: Dimension },
    #[error("cannot build a map from zero points")]
    EmptyMap,
}

/// Standardizes `x` on the scale `[lo, hi]` against a uniform reference distribution.
pub fn standardize<T: Scalar>(x: T, lo: T, hi: T) -> Result<T, IndexError> {
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(IndexError::DegenerateScale {
            lo: lo.to_f64_lossy(),
            hi: hi.to_f64_lossy(),
        });
    }
    if !(x >= lo && x <= hi) {
        return Err(IndexError::OutOfBounds {
            x: x.to_f64_lossy(),
            lo: lo.to_f64_lossy(),
            hi: hi.to_f64_lossy(),
        });
    }
    let two = T::of(2.0);
    let mean = (lo + hi) / two;
    let sd = (hi - lo) / sqrt_twelve::<T>();
    Ok((x - mean) / sd)
}

/// `sign * weight * z`.
pub fn weight_contribution<T: Scalar>(z: T, loading: &Loading) -> T {
    T::of(f64::from(loading.sign)) * T::of(loading.weight) * z
}

/// Looks up the loading for `(item, dimension)` and applies it.
pub fn weighted(
    table: &FactorLoadingTable,
    item: &str,
    dimension: Dimension,
    z: f64,
) -> Result<f64, IndexError> {
    table
        .get(item, dimension)
        .map(|l| weight_contribution(z, l))
        .ok_or_else(|| IndexError::MissingLoading {
            item: item.to_string(),
            dimension,
        })
}

/// One item's share of a dimension index (audit trail).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemContribution<T> {
    pub item_code: String,
    pub dimension: Dimension,
    pub value: T,
    pub z: T,
    pub weight: T,
    pub sign: i8,
    pub contribution: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CulturalIndexPoint<T> {
    pub entity: String,
    /// Higher is more secular-rational.
    pub trad_sec: T,
    /// Higher is more self-expression.
    pub surv_self: T,
    pub contributions: Vec<ItemContribution<T>>,
}

impl<T: Scalar> CulturalIndexPoint<T> {
    pub fn coordinate(&self, dimension: Dimension) -> T {
        match dimension {
            Dimension::TraditionalSecular => self.trad_sec,
            Dimension::SurvivalSelfExpression => self.surv_self,
        }
    }

    /// Recomputes the raw (unprojected) index of `dimension` from the audit trail.
    pub fn reconstruct(&self, dimension: Dimension) -> T {
        let parts = self.contributions.iter().filter(|c| c.dimension == dimension);
        let (num, den) = parts.fold((T::zero(), T::zero()), |(n, d), c| {
            (n + c.contribution, d + c.weight)
        });
        num / den
    }
}

/// Whether missing items abort aggregation or are dropped with renormalized weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingItems {
    #[default]
    Fail,
    Renormalize,
}

/// Aggregates one entity's encoded responses into its two dimension indices.
pub fn aggregate_entity<T: Scalar>(
    entity: &str,
    responses: &[EncodedResponse],
    catalog: &Catalog,
    missing: MissingItems,
) -> Result<CulturalIndexPoint<T>, IndexError> {
    let mut by_item: BTreeMap<&str, &EncodedResponse> = BTreeMap::new();
    for r in responses {
        if catalog.item(&r.item_code).is_none() {
            return Err(IndexError::UnknownItem {
                entity: entity.to_string(),
                item: r.item_code.clone(),
            });
        }
        if by_item.insert(r.item_code.as_str(), r).is_some() {
            return Err(IndexError::DuplicateResponse {
                entity: entity.to_string(),
                item: r.item_code.clone(),
            });
        }
    }
    let absent: Vec<String> = catalog
        .items
        .iter()
        .filter(|i| !by_item.contains_key(i.code.as_str()))
        .map(|i| i.code.clone())
        .collect();
    if !absent.is_empty() {
        match missing {
            MissingItems::Fail => {
                return Err(IndexError::IncompleteResponses {
                    entity: entity.to_string(),
                    missing: absent,
                })
            }
            MissingItems::Renormalize => {
                log::warn!("{entity}: aggregating without items {}", absent.join(", "));
            }
        }
    }

    let mut contributions = Vec::new();
    for item in &catalog.items {
        let Some(response) = by_item.get(item.code.as_str()) else {
            continue;
        };
        let (lo, hi) = item.bounds();
        let value = T::of(response.value);
        let z = standardize(value, T::of(lo), T::of(hi))?;
        for &dimension in &item.dimensions {
            let loading =
                catalog
                    .loadings
                    .get(&item.code, dimension)
                    .ok_or_else(|| IndexError::MissingLoading {
                        item: item.code.clone(),
                        dimension,
                    })?;
            contributions.push(ItemContribution {
                item_code: item.code.clone(),
                dimension,
                value,
                z,
                weight: T::of(loading.weight),
                sign: loading.sign,
                contribution: weight_contribution(z, loading),
            });
        }
    }

    let mut point = CulturalIndexPoint {
        entity: entity.to_string(),
        trad_sec: T::zero(),
        surv_self: T::zero(),
        contributions,
    };
    for dimension in Dimension::ALL {
        if !point.contributions.iter().any(|c| c.dimension == dimension) {
            return Err(IndexError::EmptyDimension {
                entity: entity.to_string(),
                dimension,
            });
        }
        let index = point.reconstruct(dimension);
        match dimension {
            Dimension::TraditionalSecular => point.trad_sec = index,
            Dimension::SurvivalSelfExpression => point.surv_self = index,
        }
    }
    Ok(point)
}

/// Aggregates every catalog entity, in catalog order.
pub fn aggregate_all<T: Scalar>(
    responses: &[EncodedResponse],
    catalog: &Catalog,
    missing: MissingItems,
) -> Result<Vec<CulturalIndexPoint<T>>, IndexError> {
    let mut grouped: BTreeMap<&str, Vec<EncodedResponse>> = BTreeMap::new();
    for r in responses {
        grouped.entry(r.entity.as_str()).or_default().push(r.clone());
    }
    catalog
        .entities
        .iter()
        .map(|e| {
            let rs = grouped.get(e.display_name.as_str()).map_or(&[][..], Vec::as_slice);
            aggregate_entity(&e.display_name, rs, catalog, missing)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisTransform<T> {
    pub scale: T,
    pub offset: T,
}

impl<T: Scalar> AxisTransform<T> {
    pub fn identity() -> Self {
        AxisTransform {
            scale: T::one(),
            offset: T::zero(),
        }
    }

    pub fn apply(&self, v: T) -> T {
        self.scale * v + self.offset
    }
}

/// Per-axis affine projection from raw index units to map coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection<T> {
    pub trad_sec: AxisTransform<T>,
    pub surv_self: AxisTransform<T>,
}

impl<T: Scalar> Default for Projection<T> {
    fn default() -> Self {
        Projection {
            trad_sec: AxisTransform::identity(),
            surv_self: AxisTransform::identity(),
        }
    }
}

/// Projected points. Each point's audit trail still reconstructs the raw index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CulturalMap<T> {
    pub points: Vec<CulturalIndexPoint<T>>,
    pub projection: Projection<T>,
}

impl<T: Scalar> CulturalMap<T> {
    pub fn point(&self, entity: &str) -> Option<&CulturalIndexPoint<T>> {
        self.points.iter().find(|p| p.entity == entity)
    }
}

pub fn build_map<T: Scalar>(
    points: Vec<CulturalIndexPoint<T>>,
    projection: Projection<T>,
) -> Result<CulturalMap<T>, IndexError> {
    if points.is_empty() {
        return Err(IndexError::EmptyMap);
    }
    let points = points
        .into_iter()
        .map(|mut p| {
            p.trad_sec = projection.trad_sec.apply(p.trad_sec);
            p.surv_self = projection.surv_self.apply(p.surv_self);
            p
        })
        .collect();
    Ok(CulturalMap { points, projection })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::catalog::shipped_catalog;
    use crate::codec::EncodingMethod;

    fn response(entity: &str, item: &str, value: f64) -> EncodedResponse {
        EncodedResponse {
            entity: entity.into(),
            item_code: item.into(),
            value,
            method: EncodingMethod::ParsedNumeric,
            raw_text: value.to_string(),
        }
    }

    #[test]
    fn standardize_examples() {
        assert_eq!(standardize(2.5, 1.0, 4.0).unwrap(), 0.0);
        assert_abs_diff_eq!(standardize(4.0, 1.0, 4.0).unwrap(), 3f64.sqrt(), epsilon = 1e-12);
        // 1.5 / (9 / sqrt(12)), evaluated independently
        assert_abs_diff_eq!(standardize(7.0, 1.0, 10.0).unwrap(), 0.5773502691896257, epsilon = 1e-12);
    }

    #[test]
    fn standardize_errors() {
        assert!(matches!(standardize(1.0, 2.0, 2.0), Err(IndexError::DegenerateScale { .. })));
        assert!(matches!(standardize(1.0, 3.0, 2.0), Err(IndexError::DegenerateScale { .. })));
        assert!(matches!(standardize(11.0, 1.0, 10.0), Err(IndexError::OutOfBounds { .. })));
        assert!(matches!(standardize(f64::NAN, 1.0, 10.0), Err(IndexError::OutOfBounds { .. })));
    }

    #[test]
    fn standardize_in_f32() {
        let z: f32 = standardize(4.0f32, 1.0, 4.0).unwrap();
        assert!((z - 3f32.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn weighting_examples() {
        let l = |weight, sign| Loading {
            item: "X".into(),
            dimension: Dimension::TraditionalSecular,
            weight,
            sign,
        };
        assert_abs_diff_eq!(weight_contribution(1.0, &l(0.91, -1)), -0.91, epsilon = 1e-15);
        assert_eq!(weight_contribution(0.0, &l(0.7, 1)), 0.0);
        assert_eq!(weight_contribution(-2.0, &l(0.5, 1)), -1.0);
        let table = FactorLoadingTable::builtin();
        assert_abs_diff_eq!(
            weighted(&table, "F063", Dimension::TraditionalSecular, 1.0).unwrap(),
            -0.91
        );
        assert!(matches!(
            weighted(&table, "F063", Dimension::SurvivalSelfExpression, 1.0),
            Err(IndexError::MissingLoading { .. })
        ));
    }

    #[test]
    fn midpoints_aggregate_to_origin() {
        let catalog = shipped_catalog();
        let rs: Vec<_> = catalog
            .items
            .iter()
            .map(|i| response("Japan", &i.code, i.midrange()))
            .collect();
        let p: CulturalIndexPoint<f64> =
            aggregate_entity("Japan", &rs, &catalog, MissingItems::Fail).unwrap();
        assert_eq!((p.trad_sec, p.surv_self), (0.0, 0.0));
        assert_eq!(p.contributions.len(), 10);
    }

    fn toy_catalog(loadings: Vec<(&str, f64, i8)>) -> Catalog {
        let mut catalog = shipped_catalog();
        let keep: Vec<&str> = loadings.iter().map(|l| l.0).collect();
        catalog.items.retain(|i| keep.contains(&i.code.as_str()));
        for item in &mut catalog.items {
            item.dimensions = vec![Dimension::TraditionalSecular];
        }
        catalog.loadings = FactorLoadingTable::new(
            "toy",
            loadings
                .into_iter()
                .map(|(item, weight, sign)| Loading {
                    item: item.into(),
                    dimension: Dimension::TraditionalSecular,
                    weight,
                    sign,
                })
                .collect(),
        );
        // second dimension needs at least one item; give it a duplicate of the first
        let first = catalog.items[0].code.clone();
        catalog.items[0].dimensions.push(Dimension::SurvivalSelfExpression);
        let mut entries = catalog.loadings.entries().to_vec();
        entries.push(Loading {
            item: first,
            dimension: Dimension::SurvivalSelfExpression,
            weight: 1.0,
            sign: 1,
        });
        catalog.loadings = FactorLoadingTable::new("toy", entries);
        catalog
    }

    #[test]
    fn single_item_index_is_its_z() {
        let catalog = toy_catalog(vec![("F063", 1.0, 1)]);
        // z = 1.2 on a 1..10 scale: x = 5.5 + 1.2 * 9 / sqrt(12)
        let x = 5.5 + 1.2 * 9.0 / 12f64.sqrt();
        let p: CulturalIndexPoint<f64> =
            aggregate_entity("Japan", &[response("Japan", "F063", x)], &catalog, MissingItems::Fail)
                .unwrap();
        assert_abs_diff_eq!(p.trad_sec, 1.2, epsilon = 1e-12);
    }

    #[test]
    fn weighted_mean_of_two_items() {
        let catalog = toy_catalog(vec![("F063", 0.8, 1), ("F120", 0.2, -1)]);
        let x = 5.5 + 9.0 / 12f64.sqrt(); // z = +1
        let rs = [response("Japan", "F063", x), response("Japan", "F120", x)];
        let p: CulturalIndexPoint<f64> =
            aggregate_entity("Japan", &rs, &catalog, MissingItems::Fail).unwrap();
        assert_abs_diff_eq!(p.trad_sec, 0.6, epsilon = 1e-12);
    }

    #[test]
    fn incomplete_and_duplicate_responses() {
        let catalog = shipped_catalog();
        let rs = vec![response("Japan", "F063", 3.0)];
        match aggregate_entity::<f64>("Japan", &rs, &catalog, MissingItems::Fail) {
            Err(IndexError::IncompleteResponses { missing, .. }) => assert_eq!(missing.len(), 9),
            other => panic!("unexpected {other:?}"),
        }
        let mut rs: Vec<_> = catalog.items.iter().map(|i| response("Japan", &i.code, i.midrange())).collect();
        rs.push(response("Japan", "F063", 2.0));
        assert!(matches!(
            aggregate_entity::<f64>("Japan", &rs, &catalog, MissingItems::Fail),
            Err(IndexError::DuplicateResponse { .. })
        ));
    }

    #[test]
    fn renormalized_partial_aggregation() {
        let catalog = shipped_catalog();
        let rs: Vec<_> = catalog
            .items
            .iter()
            .filter(|i| i.code != "A165")
            .map(|i| {
                let (_, hi) = i.bounds();
                response("Japan", &i.code, hi)
            })
            .collect();
        let p: CulturalIndexPoint<f64> =
            aggregate_entity("Japan", &rs, &catalog, MissingItems::Renormalize).unwrap();
        assert_eq!(p.contributions.len(), 9);
        assert_abs_diff_eq!(p.surv_self, p.reconstruct(Dimension::SurvivalSelfExpression), epsilon = 1e-12);
    }

    #[test]
    fn projection_and_map() {
        let catalog = shipped_catalog();
        let points: Vec<CulturalIndexPoint<f64>> = ["Japan", "Nigeria"]
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let rs: Vec<_> = catalog
                    .items
                    .iter()
                    .map(|i| {
                        let (lo, hi) = i.bounds();
                        response(e, &i.code, if k == 0 { lo } else { hi })
                    })
                    .collect();
                aggregate_entity(e, &rs, &catalog, MissingItems::Fail).unwrap()
            })
            .collect();
        let identity = build_map(points.clone(), Projection::default()).unwrap();
        assert_eq!(identity.points, points);
        let scaled = build_map(
            points.clone(),
            Projection {
                trad_sec: AxisTransform { scale: 2.0, offset: 0.0 },
                surv_self: AxisTransform { scale: 2.0, offset: 0.0 },
            },
        )
        .unwrap();
        assert_eq!(scaled.points[0].trad_sec, 2.0 * points[0].trad_sec);
        assert!(matches!(build_map::<f64>(vec![], Projection::default()), Err(IndexError::EmptyMap)));
    }

    proptest! {
        #[test]
        fn endpoints_map_to_plus_minus_sqrt3(lo in -1e3f64..1e3, width in 1e-3f64..1e3) {
            let hi = lo + width;
            prop_assert!((standardize(lo, lo, hi).unwrap() + 3f64.sqrt()).abs() < 1e-9);
            prop_assert!((standardize(hi, lo, hi).unwrap() - 3f64.sqrt()).abs() < 1e-9);
            prop_assert_eq!(standardize((lo + hi) / 2.0, lo, hi).unwrap(), 0.0);
        }

        #[test]
        fn standardize_is_affine(lo in -100f64..100.0, width in 0.1f64..100.0, a in 0f64..1.0, b in 0f64..1.0) {
            let hi = lo + width;
            let (xa, xb) = (lo + a * width, lo + b * width);
            let (za, zb) = (standardize(xa, lo, hi).unwrap(), standardize(xb, lo, hi).unwrap());
            let slope = 12f64.sqrt() / width;
            prop_assert!((za - zb - slope * (xa - xb)).abs() < 1e-9);
        }

        #[test]
        fn indices_bounded_and_auditable(fracs in proptest::collection::vec(0f64..=1.0, 10)) {
            let catalog = shipped_catalog();
            let rs: Vec<_> = catalog.items.iter().zip(&fracs).map(|(i, f)| {
                let (lo, hi) = i.bounds();
                response("Chile", &i.code, lo + f * (hi - lo))
            }).collect();
            let p: CulturalIndexPoint<f64> = aggregate_entity("Chile", &rs, &catalog, MissingItems::Fail).unwrap();
            let bound = 3f64.sqrt() + 1e-12;
            prop_assert!(p.trad_sec.abs() <= bound && p.surv_self.abs() <= bound);
            for d in Dimension::ALL {
                prop_assert!((p.coordinate(d) - p.reconstruct(d)).abs() <= 1e-12);
            }
        }

        #[test]
        fn positive_projection_keeps_rankings(
            raw in proptest::collection::vec((-2f64..2.0, -2f64..2.0), 2..20),
            scale in 0.01f64..10.0, offset in -5f64..5.0,
        ) {
            let points: Vec<CulturalIndexPoint<f64>> = raw.iter().enumerate().map(|(k, (t, s))| CulturalIndexPoint {
                entity: format!("e{k}"), trad_sec: *t, surv_self: *s, contributions: vec![],
            }).collect();
            let t = AxisTransform { scale, offset };
            let map = build_map(points.clone(), Projection { trad_sec: t, surv_self: t }).unwrap();
            for i in 0..points.len() {
                for j in 0..points.len() {
                    if points[i].trad_sec < points[j].trad_sec {
                        prop_assert!(map.points[i].trad_sec <= map.points[j].trad_sec);
                    }
                    if points[i].surv_self < points[j].surv_self {
                        prop_assert!(map.points[i].surv_self <= map.points[j].surv_self);
                    }
                }
            }
        }
    }
}
