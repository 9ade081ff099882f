use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{
    Catalog, CatalogError, CulturalEntity, CulturalRegion, GeoTable, SurveyItem,
};
use crate::index::FactorLoadingTable;

const SHIPPED_CATALOG: &str = include_str!("../../data/catalog.toml");
const SHIPPED_OVERRIDES: &str = include_str!("../../data/region_overrides.toml");
const SHIPPED_GEO: &str = include_str!("../../data/geo.toml");
const SHIPPED_LOADINGS: &str = include_str!("../../data/loadings.toml");

pub const CATALOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    schema_version: u32,
    overrides: Option<String>,
    geo: Option<String>,
    loadings: Option<String>,
    #[serde(default)]
    non_polities: Vec<String>,
    #[serde(default)]
    supplemental: Vec<String>,
    #[serde(default, rename = "region")]
    regions: Vec<RegionListing>,
    #[serde(default, rename = "item")]
    items: Vec<SurveyItem>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionListing {
    name: CulturalRegion,
    members: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OverrideFile {
    #[serde(default)]
    assign: BTreeMap<String, CulturalRegion>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeoFile {
    #[serde(default)]
    iso3: BTreeMap<String, String>,
    #[serde(default)]
    name_synonyms: BTreeMap<String, String>,
    #[serde(default)]
    code_synonyms: BTreeMap<String, String>,
}

pub(crate) fn parse_toml<T: serde::de::DeserializeOwned>(
    text: &str,
    file: &str,
) -> Result<T, CatalogError> {
    toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        CatalogError::Parse {
            file: file.to_string(),
            line,
            message: e.message().to_string(),
        }
    })
}

fn read(path: &Path) -> Result<String, CatalogError> {
    std::fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            CatalogError::MissingFile(path.to_path_buf())
        } else {
            CatalogError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })
}

struct Sources<'a> {
    catalog: (&'a str, String),
    overrides: Option<(String, String)>,
    geo: Option<(String, String)>,
    loadings: Option<(String, String)>,
}

/// Reads a catalog and its side files without checking the reference counts.
///
/// Structural problems that make the catalog unrepresentable (unknown names in
/// side files, duplicate iso3 codes) are still rejected here.
pub fn load_unvalidated(path: &Path) -> Result<Catalog, CatalogError> {
    let text = read(path)?;
    let name = path.display().to_string();
    let head: CatalogFile = parse_toml(&text, &name)?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let side = |rel: &Option<String>| -> Result<Option<(String, String)>, CatalogError> {
        match rel {
            None => Ok(None),
            Some(rel) => {
                let p: PathBuf = dir.join(rel);
                Ok(Some((read(&p)?, p.display().to_string())))
            }
        }
    };
    let overrides = side(&head.overrides)?;
    let geo = side(&head.geo)?;
    let loadings = side(&head.loadings)?;
    build(Sources {
        catalog: (&text, name),
        overrides,
        geo,
        loadings,
    })
}

/// Loads a catalog and rejects it unless every reference invariant holds.
pub fn load_catalog(path: &Path) -> Result<Catalog, CatalogError> {
    let catalog = load_unvalidated(path)?;
    let report = super::validate_catalog(&catalog);
    if report.violations.is_empty() {
        Ok(catalog)
    } else {
        Err(CatalogError::Validation(report.violations))
    }
}

/// The catalog compiled into the crate.
pub fn shipped_catalog() -> Catalog {
    build(Sources {
        catalog: (SHIPPED_CATALOG, "catalog.toml".into()),
        overrides: Some((SHIPPED_OVERRIDES.into(), "region_overrides.toml".into())),
        geo: Some((SHIPPED_GEO.into(), "geo.toml".into())),
        loadings: Some((SHIPPED_LOADINGS.into(), "loadings.toml".into())),
    })
    .expect("shipped catalog is well formed")
}

/// Raw text of the shipped catalog files, keyed by file name.
pub fn shipped_catalog_files() -> [(&'static str, &'static str); 4] {
    [
        ("catalog.toml", SHIPPED_CATALOG),
        ("region_overrides.toml", SHIPPED_OVERRIDES),
        ("geo.toml", SHIPPED_GEO),
        ("loadings.toml", SHIPPED_LOADINGS),
    ]
}

fn build(src: Sources<'_>) -> Result<Catalog, CatalogError> {
    let (text, name) = src.catalog;
    let head: CatalogFile = parse_toml(text, &name)?;
    if head.schema_version != CATALOG_SCHEMA_VERSION {
        return Err(CatalogError::Parse {
            file: name,
            line: 1,
            message: format!(
                "unsupported schema_version {} (expected {CATALOG_SCHEMA_VERSION})",
                head.schema_version
            ),
        });
    }
    let overrides: OverrideFile = match &src.overrides {
        Some((t, n)) => parse_toml(t, n)?,
        None => OverrideFile::default(),
    };
    let geo: GeoFile = match &src.geo {
        Some((t, n)) => parse_toml(t, n)?,
        None => GeoFile::default(),
    };
    let loadings = match &src.loadings {
        Some((t, n)) => FactorLoadingTable::builtin().merged(&FactorLoadingTable::parse(t, n)?),
        None => FactorLoadingTable::builtin(),
    };

    // Entity order = first appearance; region = override, else first listing.
    let mut order: Vec<String> = Vec::new();
    let mut first_listing: HashMap<String, CulturalRegion> = HashMap::new();
    for listing in &head.regions {
        for member in &listing.members {
            let member = member.trim().to_string();
            if !first_listing.contains_key(&member) {
                first_listing.insert(member.clone(), listing.name);
                order.push(member);
            }
        }
    }

    let mut problems = Vec::new();
    let unknown = |kind: &str, names: &mut dyn Iterator<Item = &String>, out: &mut Vec<String>| {
        for n in names {
            if !first_listing.contains_key(n.trim()) {
                out.push(format!("{kind} names unknown entity {n:?}"));
            }
        }
    };
    unknown("region override", &mut overrides.assign.keys(), &mut problems);
    unknown("non_polities", &mut head.non_polities.iter(), &mut problems);
    unknown("supplemental", &mut head.supplemental.iter(), &mut problems);
    unknown("geo iso3 table", &mut geo.iso3.keys(), &mut problems);
    for canonical in geo.name_synonyms.values() {
        if !first_listing.contains_key(canonical) {
            problems.push(format!("name synonym targets unknown entity {canonical:?}"));
        }
    }
    let mut seen_codes: HashMap<&str, &str> = HashMap::new();
    for (entity, code) in &geo.iso3 {
        if let Some(prev) = seen_codes.insert(code.as_str(), entity.as_str()) {
            problems.push(format!("iso3 code {code} assigned to both {prev:?} and {entity:?}"));
        }
    }
    if !problems.is_empty() {
        return Err(CatalogError::Validation(problems));
    }

    let entities = order
        .into_iter()
        .map(|name| {
            let region = overrides
                .assign
                .get(&name)
                .copied()
                .unwrap_or(first_listing[&name]);
            CulturalEntity {
                iso3_code: geo.iso3.get(&name).cloned(),
                is_distinct_polity: !head.non_polities.iter().any(|n| n.trim() == name),
                supplemental: head.supplemental.iter().any(|n| n.trim() == name),
                region,
                display_name: name,
            }
        })
        .collect();

    Ok(Catalog {
        entities,
        items: head.items,
        loadings,
        geo: GeoTable {
            name_synonyms: geo.name_synonyms,
            code_synonyms: geo.code_synonyms,
        },
    })
}
