//! Entity/region taxonomy and the survey item catalog.

mod file;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::index::FactorLoadingTable;

pub(crate) use file::parse_toml as file_parse_toml;
pub use file::{
    load_catalog, load_unvalidated, shipped_catalog, shipped_catalog_files, CATALOG_SCHEMA_VERSION,
};
pub use validate::{validate_catalog, ValidationReport};

/// Number of culturally distinct entities in the reference taxonomy.
pub const REFERENCE_ENTITY_COUNT: usize = 126;
/// Number of distinct political entities (SARs and Taiwan ROC excluded).
pub const REFERENCE_POLITY_COUNT: usize = 123;
/// Number of survey items.
pub const REFERENCE_ITEM_COUNT: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("catalog file not found: {0}")]
    MissingFile(PathBuf),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("catalog validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("unknown entity: {0}")]
    UnknownEntity(String),
    #[error("unknown survey item: {0}")]
    UnknownItem(String),
}

/// The eight cultural regions of the world cultural map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CulturalRegion {
    AfricanIslamic,
    Confucian,
    LatinAmerica,
    CatholicEurope,
    EnglishSpeaking,
    OrthodoxEurope,
    ProtestantEurope,
    WestSouthAsia,
}

impl CulturalRegion {
    pub const ALL: [CulturalRegion; 8] = [
        CulturalRegion::AfricanIslamic,
        CulturalRegion::Confucian,
        CulturalRegion::LatinAmerica,
        CulturalRegion::CatholicEurope,
        CulturalRegion::EnglishSpeaking,
        CulturalRegion::OrthodoxEurope,
        CulturalRegion::ProtestantEurope,
        CulturalRegion::WestSouthAsia,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CulturalRegion::AfricanIslamic => "African-Islamic",
            CulturalRegion::Confucian => "Confucian",
            CulturalRegion::LatinAmerica => "Latin America",
            CulturalRegion::CatholicEurope => "Catholic Europe",
            CulturalRegion::EnglishSpeaking => "English-Speaking",
            CulturalRegion::OrthodoxEurope => "Orthodox Europe",
            CulturalRegion::ProtestantEurope => "Protestant Europe",
            CulturalRegion::WestSouthAsia => "West & South Asia",
        }
    }

    /// Published member count for the region.
    pub fn reference_count(self) -> usize {
        match self {
            CulturalRegion::AfricanIslamic => 26,
            CulturalRegion::Confucian => 9,
            CulturalRegion::LatinAmerica => 19,
            CulturalRegion::CatholicEurope => 12,
            CulturalRegion::EnglishSpeaking => 8,
            CulturalRegion::OrthodoxEurope => 15,
            CulturalRegion::ProtestantEurope => 17,
            CulturalRegion::WestSouthAsia => 20,
        }
    }
}

impl fmt::Display for CulturalRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CulturalRegion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim();
        CulturalRegion::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(wanted))
            .ok_or_else(|| format!("unknown cultural region {wanted:?}"))
    }
}

impl Serialize for CulturalRegion {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for CulturalRegion {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The two value dimensions. Positive poles are secular-rational and self-expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dimension {
    TraditionalSecular,
    SurvivalSelfExpression,
}

impl Dimension {
    pub const ALL: [Dimension; 2] = [Dimension::TraditionalSecular, Dimension::SurvivalSelfExpression];

    /// Column-style key used in CSV headers and file names.
    pub fn key(self) -> &'static str {
        match self {
            Dimension::TraditionalSecular => "trad_sec",
            Dimension::SurvivalSelfExpression => "surv_self",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Dimension::TraditionalSecular => "Traditional vs. Secular-Rational Values",
            Dimension::SurvivalSelfExpression => "Survival vs. Self-Expression Values",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::TraditionalSecular => "traditional-secular",
            Dimension::SurvivalSelfExpression => "survival-self-expression",
        })
    }
}

impl FromStr for Dimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "traditional-secular" | "trad_sec" => Ok(Dimension::TraditionalSecular),
            "survival-self-expression" | "surv_self" => Ok(Dimension::SurvivalSelfExpression),
            other => Err(format!("unknown dimension {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CulturalEntity {
    pub display_name: String,
    pub region: CulturalRegion,
    pub iso3_code: Option<String>,
    pub is_distinct_polity: bool,
    /// Not part of the published region table; added to reach the published counts.
    #[serde(default)]
    pub supplemental: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub value: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricOption {
    pub label: String,
    pub weight: f64,
    #[serde(default)]
    pub aliases: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AimClass {
    Materialist,
    PostMaterialist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AimOption {
    pub number: u8,
    pub label: String,
    pub class: AimClass,
    #[serde(default)]
    pub aliases: Vec<String>,
}

/// Index table for a pick-two item: score by the classes of the two picks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PickTwoScores {
    pub materialist: f64,
    pub mixed: f64,
    pub post_materialist: f64,
}

impl Default for PickTwoScores {
    fn default() -> Self {
        PickTwoScores {
            materialist: 1.0,
            mixed: 2.0,
            post_materialist: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ResponseSchema {
    Likert {
        min: f64,
        max: f64,
        #[serde(default)]
        anchors: Vec<Anchor>,
    },
    MultiSelect {
        options: Vec<RubricOption>,
        max_picks: usize,
        bounds: [f64; 2],
    },
    PickTwo {
        options: Vec<AimOption>,
        #[serde(default)]
        scores: PickTwoScores,
        bounds: [f64; 2],
    },
}

impl ResponseSchema {
    /// Theoretical bounds `(lo, hi)` of an encoded value.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            ResponseSchema::Likert { min, max, .. } => (*min, *max),
            ResponseSchema::MultiSelect { bounds, .. } | ResponseSchema::PickTwo { bounds, .. } => {
                (bounds[0], bounds[1])
            }
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ResponseSchema::Likert { .. } => "likert",
            ResponseSchema::MultiSelect { .. } => "multi-select",
            ResponseSchema::PickTwo { .. } => "pick-two",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyItem {
    pub code: String,
    pub question: String,
    pub response: ResponseSchema,
    pub dimensions: Vec<Dimension>,
}

impl SurveyItem {
    pub fn bounds(&self) -> (f64, f64) {
        self.response.bounds()
    }

    pub fn midrange(&self) -> f64 {
        let (lo, hi) = self.bounds();
        (lo + hi) / 2.0
    }
}

/// Name and code synonyms used to join external files against the catalog.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GeoTable {
    #[serde(default)]
    pub name_synonyms: BTreeMap<String, String>,
    #[serde(default)]
    pub code_synonyms: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub entities: Vec<CulturalEntity>,
    pub items: Vec<SurveyItem>,
    pub loadings: FactorLoadingTable,
    pub geo: GeoTable,
}

impl Catalog {
    pub fn entity(&self, name: &str) -> Option<&CulturalEntity> {
        self.entities.iter().find(|e| e.display_name == name)
    }

    pub fn item(&self, code: &str) -> Option<&SurveyItem> {
        self.items.iter().find(|i| i.code == code)
    }

    pub fn region_of(&self, entity_name: &str) -> Result<CulturalRegion, CatalogError> {
        self.entity(entity_name.trim())
            .map(|e| e.region)
            .ok_or_else(|| CatalogError::UnknownEntity(entity_name.to_string()))
    }

    /// Resolves a possibly non-canonical entity name (exact, then synonym, then
    /// case-insensitive match) to the catalog's display name.
    pub fn resolve_entity_name(&self, name: &str) -> Option<&str> {
        let name = name.trim();
        if let Some(e) = self.entity(name) {
            return Some(&e.display_name);
        }
        if let Some(canonical) = self.geo.name_synonyms.get(name) {
            return self.entity(canonical).map(|e| e.display_name.as_str());
        }
        self.entities
            .iter()
            .find(|e| e.display_name.eq_ignore_ascii_case(name))
            .or_else(|| {
                self.geo
                    .name_synonyms
                    .iter()
                    .find(|(k, _)| k.eq_ignore_ascii_case(name))
                    .and_then(|(_, v)| self.entity(v))
            })
            .map(|e| e.display_name.as_str())
    }

    /// Canonical geometry code for a code found in an external geometry file.
    pub fn canonical_code<'a>(&'a self, code: &'a str) -> &'a str {
        self.geo
            .code_synonyms
            .get(code)
            .map(String::as_str)
            .unwrap_or(code)
    }

    /// Copy of the catalog keeping only the named entities, in catalog order.
    pub fn restrict_entities(&self, names: &[String]) -> Result<Catalog, CatalogError> {
        let mut keep = Vec::with_capacity(names.len());
        for name in names {
            let resolved = self
                .resolve_entity_name(name)
                .ok_or_else(|| CatalogError::UnknownEntity(name.clone()))?;
            keep.push(resolved.to_string());
        }
        Ok(Catalog {
            entities: self
                .entities
                .iter()
                .filter(|e| keep.contains(&e.display_name))
                .cloned()
                .collect(),
            ..self.clone()
        })
    }

    pub fn entities_in(&self, region: CulturalRegion) -> impl Iterator<Item = &CulturalEntity> {
        self.entities.iter().filter(move |e| e.region == region)
    }
}

/// Free-function form of [`Catalog::region_of`].
pub fn region_of(catalog: &Catalog, entity_name: &str) -> Result<CulturalRegion, CatalogError> {
    catalog.region_of(entity_name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_names_round_trip() {
        for r in CulturalRegion::ALL {
            assert_eq!(r.name().parse::<CulturalRegion>().unwrap(), r);
        }
        assert!("Atlantis".parse::<CulturalRegion>().is_err());
    }

    #[test]
    fn reference_counts_sum_to_entity_total() {
        let total: usize = CulturalRegion::ALL.iter().map(|r| r.reference_count()).sum();
        assert_eq!(total, REFERENCE_ENTITY_COUNT);
    }

    #[test]
    fn region_lookup() {
        let catalog = shipped_catalog();
        assert_eq!(catalog.region_of("Japan").unwrap(), CulturalRegion::Confucian);
        assert_eq!(catalog.region_of("Uruguay").unwrap(), CulturalRegion::LatinAmerica);
        assert!(matches!(
            catalog.region_of("Atlantis"),
            Err(CatalogError::UnknownEntity(name)) if name == "Atlantis"
        ));
    }

    #[test]
    fn region_of_is_total_over_entities() {
        let catalog = shipped_catalog();
        for e in &catalog.entities {
            assert_eq!(catalog.region_of(&e.display_name).unwrap(), e.region);
        }
    }

    #[test]
    fn synonyms_resolve() {
        let catalog = shipped_catalog();
        assert_eq!(catalog.resolve_entity_name("USA"), Some("United States"));
        assert_eq!(catalog.resolve_entity_name("taiwan"), Some("Taiwan ROC"));
        assert_eq!(catalog.resolve_entity_name("japan"), Some("Japan"));
        assert_eq!(catalog.resolve_entity_name("Atlantis"), None);
        assert_eq!(catalog.canonical_code("KOS"), "XKX");
        assert_eq!(catalog.canonical_code("FRA"), "FRA");
    }

    #[test]
    fn restrict_keeps_catalog_order() {
        let catalog = shipped_catalog();
        let small = catalog
            .restrict_entities(&["Japan".to_string(), "Nigeria".to_string()])
            .unwrap();
        let names: Vec<_> = small.entities.iter().map(|e| e.display_name.as_str()).collect();
        assert_eq!(names, ["Nigeria", "Japan"]);
        assert_eq!(small.items.len(), 10);
        assert!(catalog.restrict_entities(&["Atlantis".to_string()]).is_err());
    }

    #[test]
    fn midrange_lies_inside_bounds() {
        for item in &shipped_catalog().items {
            let (lo, hi) = item.bounds();
            assert!(lo.is_finite() && hi.is_finite() && lo < hi);
            let mid = item.midrange();
            assert!(lo < mid && mid < hi, "{}", item.code);
        }
    }
}
