use serde::{Deserialize, Serialize};

use crate::catalog::{file_parse_toml, CatalogError, Dimension};

const BUILTIN_LOADINGS: &str = include_str!("../../data/default_loadings.toml");

/// One factor loading: magnitude plus polarity toward the dimension's positive pole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Loading {
    pub item: String,
    pub dimension: Dimension,
    pub weight: f64,
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FactorLoadingTable {
    #[serde(default)]
    pub source: String,
    #[serde(default, rename = "loading")]
    entries: Vec<Loading>,
}

impl FactorLoadingTable {
    pub fn new(source: impl Into<String>, entries: Vec<Loading>) -> Self {
        FactorLoadingTable {
            source: source.into(),
            entries,
        }
    }

    /// The built-in table (externally sourced loadings, not estimated here).
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_LOADINGS, "default_loadings.toml")
            .expect("built-in loading table is well formed")
    }

    pub fn parse(text: &str, file: &str) -> Result<Self, CatalogError> {
        file_parse_toml(text, file)
    }

    pub fn entries(&self) -> &[Loading] {
        &self.entries
    }

    pub fn get(&self, item: &str, dimension: Dimension) -> Option<&Loading> {
        self.entries
            .iter()
            .find(|l| l.item == item && l.dimension == dimension)
    }

    pub fn for_dimension(&self, dimension: Dimension) -> impl Iterator<Item = &Loading> {
        self.entries.iter().filter(move |l| l.dimension == dimension)
    }

    /// Overrides replace matching (item, dimension) entries and append new ones.
    pub fn merged(mut self, overrides: &FactorLoadingTable) -> Self {
        for o in &overrides.entries {
            match self
                .entries
                .iter_mut()
                .find(|l| l.item == o.item && l.dimension == o.dimension)
            {
                Some(slot) => *slot = o.clone(),
                None => self.entries.push(o.clone()),
            }
        }
        if !overrides.entries.is_empty() && !overrides.source.is_empty() {
            self.source = format!("{} + {}", self.source, overrides.source);
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_table_covers_all_items_once() {
        let table = FactorLoadingTable::builtin();
        assert_eq!(table.entries().len(), 10);
        assert_eq!(table.for_dimension(Dimension::TraditionalSecular).count(), 5);
        assert_eq!(table.for_dimension(Dimension::SurvivalSelfExpression).count(), 5);
        let god = table.get("F063", Dimension::TraditionalSecular).unwrap();
        assert_eq!((god.weight, god.sign), (0.91, -1));
        assert!(table.entries().iter().all(|l| l.weight > 0.0));
    }

    #[test]
    fn merge_replaces_and_appends() {
        let base = FactorLoadingTable::builtin();
        let over = FactorLoadingTable::new(
            "local",
            vec![
                Loading {
                    item: "F063".into(),
                    dimension: Dimension::TraditionalSecular,
                    weight: 0.5,
                    sign: -1,
                },
                Loading {
                    item: "F063".into(),
                    dimension: Dimension::SurvivalSelfExpression,
                    weight: 0.3,
                    sign: -1,
                },
            ],
        );
        let merged = base.merged(&over);
        assert_eq!(merged.entries().len(), 11);
        assert_eq!(merged.get("F063", Dimension::TraditionalSecular).unwrap().weight, 0.5);
        assert!(merged.source.ends_with("+ local"));
    }
}
