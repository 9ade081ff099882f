//! Model-versus-survey comparison: per-entity differences, per-region error
//! metrics, benchmark thresholds and high-deviation flags.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, CulturalRegion, Dimension};
use crate::index::CulturalMap;
use crate::scalar::Scalar;

pub const DEFAULT_THRESHOLD_RANKS: (usize, usize) = (3, 4);

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("benchmark file not found: {0}")]
    MissingFile(PathBuf),
    #[error("benchmark {file}: {message}")]
    Parse { file: String, message: String },
    #[error("benchmark {0} has no rows that join the catalog")]
    EmptyDataset(String),
    #[error("model map and benchmark share no entities")]
    NoOverlap,
    #[error("entity {0} has no region in the catalog")]
    UnknownEntity(String),
    #[error("threshold ranks ({a}, {b}) need {b} regions, only {available} present")]
    InsufficientRegions { a: usize, b: usize, available: usize },
    #[error("threshold ranks must satisfy 1 <= a <= b, got ({0}, {1})")]
    InvalidRanks(usize, usize),
    #[error("threshold input mixes dimensions")]
    MixedDimensions,
    #[error("threshold {0} is not finite")]
    NonFiniteThreshold(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPoint<T> {
    pub entity: String,
    pub trad_sec: T,
    pub surv_self: T,
}

impl<T: Scalar> BenchmarkPoint<T> {
    pub fn coordinate(&self, dimension: Dimension) -> T {
        match dimension {
            Dimension::TraditionalSecular => self.trad_sec,
            Dimension::SurvivalSelfExpression => self.surv_self,
        }
    }
}

/// Published survey index coordinates keyed by canonical entity name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkDataset<T> {
    pub source: String,
    pub points: Vec<BenchmarkPoint<T>>,
}

impl<T: Scalar> BenchmarkDataset<T> {
    pub fn point(&self, entity: &str) -> Option<&BenchmarkPoint<T>> {
        self.points.iter().find(|p| p.entity == entity)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JoinReport {
    /// Benchmark rows whose entity name did not resolve, as written in the file.
    pub unmatched_rows: Vec<String>,
    /// Catalog entities with no benchmark row.
    pub missing_entities: Vec<String>,
    /// Rows dropped because an earlier row resolved to the same entity.
    pub duplicate_rows: Vec<String>,
    /// Rows joined through a synonym: (as written, canonical).
    pub synonyms_used: Vec<(String, String)>,
}

impl JoinReport {
    pub fn is_complete(&self) -> bool {
        self.unmatched_rows.is_empty() && self.missing_entities.is_empty()
    }
}

#[derive(Debug, Deserialize)]
struct BenchmarkRow {
    entity: String,
    trad_sec: f64,
    surv_self: f64,
}

/// Reads `entity,trad_sec,surv_self` CSV text. Lines starting with `#` are
/// comments; a `# source: ...` comment sets the dataset label.
pub fn parse_benchmark<T: Scalar>(
    text: &str,
    label: &str,
    catalog: &Catalog,
) -> Result<(BenchmarkDataset<T>, JoinReport), CompareError> {
    let parse_err = |message: String| CompareError::Parse {
        file: label.to_string(),
        message,
    };
    let source = text
        .lines()
        .filter_map(|l| l.trim().strip_prefix('#'))
        .find_map(|c| c.trim().strip_prefix("source:").map(|s| s.trim().to_string()))
        .unwrap_or_else(|| label.to_string());

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut report = JoinReport::default();
    let mut seen = HashSet::new();
    let mut points = Vec::new();
    for (n, row) in reader.deserialize::<BenchmarkRow>().enumerate() {
        let row = row.map_err(|e| parse_err(format!("row {}: {e}", n + 1)))?;
        if !row.trad_sec.is_finite() || !row.surv_self.is_finite() {
            return Err(parse_err(format!("row {}: non-finite coordinate", n + 1)));
        }
        let Some(canonical) = catalog.resolve_entity_name(&row.entity) else {
            report.unmatched_rows.push(row.entity);
            continue;
        };
        let canonical = canonical.to_string();
        if !seen.insert(canonical.clone()) {
            report.duplicate_rows.push(row.entity);
            continue;
        }
        if canonical != row.entity.trim() {
            report.synonyms_used.push((row.entity.clone(), canonical.clone()));
        }
        points.push(BenchmarkPoint {
            entity: canonical,
            trad_sec: T::of(row.trad_sec),
            surv_self: T::of(row.surv_self),
        });
    }
    if points.is_empty() {
        return Err(CompareError::EmptyDataset(label.to_string()));
    }
    report.missing_entities = catalog
        .entities
        .iter()
        .filter(|e| !seen.contains(&e.display_name))
        .map(|e| e.display_name.clone())
        .collect();
    Ok((BenchmarkDataset { source, points }, report))
}

pub fn load_benchmark<T: Scalar>(
    path: &Path,
    catalog: &Catalog,
) -> Result<(BenchmarkDataset<T>, JoinReport), CompareError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(CompareError::MissingFile(path.to_path_buf()))
        }
        Err(e) => {
            return Err(CompareError::Parse {
                file: path.display().to_string(),
                message: e.to_string(),
            })
        }
    };
    parse_benchmark(&text, &path.display().to_string(), catalog)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityDiff<T> {
    pub entity: String,
    pub dimension: Dimension,
    /// Model minus survey.
    pub signed: T,
    pub absolute: T,
}

impl<T: Scalar> EntityDiff<T> {
    pub fn new(entity: &str, dimension: Dimension, model: T, survey: T) -> Self {
        let signed = model - survey;
        EntityDiff {
            entity: entity.to_string(),
            dimension,
            signed,
            absolute: signed.abs(),
        }
    }
}

pub const DIMENSIONS: [Dimension; 2] =
    [Dimension::TraditionalSecular, Dimension::SurvivalSelfExpression];

/// Diffs for every entity present in both, model order, both dimensions per entity.
pub fn entity_diffs<T: Scalar>(
    model: &CulturalMap<T>,
    bench: &BenchmarkDataset<T>,
) -> Result<Vec<EntityDiff<T>>, CompareError> {
    let diffs: Vec<EntityDiff<T>> = model
        .points
        .iter()
        .filter_map(|p| bench.point(&p.entity).map(|b| (p, b)))
        .flat_map(|(p, b)| {
            DIMENSIONS
                .into_iter()
                .map(move |d| EntityDiff::new(&p.entity, d, p.coordinate(d), b.coordinate(d)))
        })
        .collect();
    if diffs.is_empty() {
        return Err(CompareError::NoOverlap);
    }
    Ok(diffs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMetrics<T> {
    pub region: CulturalRegion,
    pub dimension: Dimension,
    pub mse: T,
    pub mae: T,
    pub n: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport<T> {
    /// Region-major (catalog region order), then dimension.
    pub metrics: Vec<RegionMetrics<T>>,
    /// Region and dimension pairs with no joined entity.
    pub empty: Vec<(CulturalRegion, Dimension)>,
}

/// Mean squared and mean absolute difference per region and dimension.
pub fn region_metrics<T: Scalar>(
    diffs: &[EntityDiff<T>],
    catalog: &Catalog,
) -> Result<RegionReport<T>, CompareError> {
    let mut groups: BTreeMap<(CulturalRegion, Dimension), Vec<T>> = BTreeMap::new();
    for d in diffs {
        let region = catalog
            .region_of(&d.entity)
            .map_err(|_| CompareError::UnknownEntity(d.entity.clone()))?;
        groups.entry((region, d.dimension)).or_default().push(d.signed);
    }
    let mut metrics = Vec::new();
    let mut empty = Vec::new();
    for region in CulturalRegion::ALL {
        for dimension in DIMENSIONS {
            match groups.get(&(region, dimension)) {
                Some(values) => {
                    let n = T::of(values.len() as f64);
                    let mse = values.iter().map(|v| *v * *v).sum::<T>() / n;
                    let mae = values.iter().map(|v| v.abs()).sum::<T>() / n;
                    metrics.push(RegionMetrics {
                        region,
                        dimension,
                        mse,
                        mae,
                        n: values.len(),
                        flagged: false,
                    });
                }
                None => empty.push((region, dimension)),
            }
        }
    }
    Ok(RegionReport { metrics, empty })
}

/// Mean of the `rank_a`-th and `rank_b`-th lowest regional MSE (1-indexed).
/// Equal MSEs are ordered by region name.
pub fn benchmark_threshold<T: Scalar>(
    metrics: &[RegionMetrics<T>],
    rank_a: usize,
    rank_b: usize,
) -> Result<T, CompareError> {
    if rank_a == 0 || rank_a > rank_b {
        return Err(CompareError::InvalidRanks(rank_a, rank_b));
    }
    if let Some(first) = metrics.first() {
        if metrics.iter().any(|m| m.dimension != first.dimension) {
            return Err(CompareError::MixedDimensions);
        }
    }
    if metrics.len() < rank_b {
        return Err(CompareError::InsufficientRegions {
            a: rank_a,
            b: rank_b,
            available: metrics.len(),
        });
    }
    let mut sorted: Vec<&RegionMetrics<T>> = metrics.iter().collect();
    sorted.sort_by(|x, y| {
        x.mse
            .partial_cmp(&y.mse)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| x.region.name().cmp(y.region.name()))
    });
    Ok((sorted[rank_a - 1].mse + sorted[rank_b - 1].mse) / T::of(2.0))
}

/// Sets `flagged` to `mse > threshold` (strict).
pub fn flag_regions<T: Scalar>(
    metrics: &[RegionMetrics<T>],
    threshold: T,
) -> Result<Vec<RegionMetrics<T>>, CompareError> {
    if !threshold.is_finite() {
        return Err(CompareError::NonFiniteThreshold(threshold.to_f64_lossy()));
    }
    Ok(metrics
        .iter()
        .map(|m| RegionMetrics {
            flagged: m.mse > threshold,
            ..m.clone()
        })
        .collect())
}

/// Qualitative labels for a region's MSE relative to the threshold. Each band
/// is an inclusive upper bound on `mse / threshold`; the last label covers the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentBands {
    pub bands: Vec<(f64, String)>,
    pub above: String,
}

impl Default for AlignmentBands {
    fn default() -> Self {
        AlignmentBands {
            bands: vec![
                (0.5, "Strong".into()),
                (0.9, "Good".into()),
                (1.25, "Mixed".into()),
                (2.0, "Moderate mismatch".into()),
            ],
            above: "Poor".into(),
        }
    }
}

impl AlignmentBands {
    pub fn label(&self, mse: f64, threshold: f64) -> &str {
        let ratio = if threshold > 0.0 {
            mse / threshold
        } else if mse == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        self.bands
            .iter()
            .find(|(upper, _)| ratio <= *upper)
            .map_or(self.above.as_str(), |(_, label)| label.as_str())
    }
}

/// Per-dimension threshold plus the flagged metrics for that dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionComparison<T> {
    pub dimension: Dimension,
    pub threshold: T,
    pub metrics: Vec<RegionMetrics<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison<T> {
    pub diffs: Vec<EntityDiff<T>>,
    pub dimensions: Vec<DimensionComparison<T>>,
    pub empty_regions: Vec<(CulturalRegion, Dimension)>,
}

pub fn compare<T: Scalar>(
    model: &CulturalMap<T>,
    bench: &BenchmarkDataset<T>,
    catalog: &Catalog,
    ranks: (usize, usize),
) -> Result<Comparison<T>, CompareError> {
    let diffs = entity_diffs(model, bench)?;
    let report = region_metrics(&diffs, catalog)?;
    let mut dimensions = Vec::new();
    for dimension in DIMENSIONS {
        let subset: Vec<RegionMetrics<T>> = report
            .metrics
            .iter()
            .filter(|m| m.dimension == dimension)
            .cloned()
            .collect();
        let threshold = benchmark_threshold(&subset, ranks.0, ranks.1)?;
        dimensions.push(DimensionComparison {
            dimension,
            threshold,
            metrics: flag_regions(&subset, threshold)?,
        });
    }
    Ok(Comparison {
        diffs,
        dimensions,
        empty_regions: report.empty,
    })
}
