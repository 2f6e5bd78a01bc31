//! Device capability declarations and the shipped feature catalog.
//!
//! A [`FeatureSet`] maps a feature key (e.g. `bandwidth_mhz`) to the set of
//! values a device supports. The catalog of well-known keys is a versioned
//! data file compiled into the library; unknown keys are accepted but
//! reported as warnings so typos surface early.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

const CATALOG_JSON: &str = include_str!("../data/feature_catalog.json");

#[derive(Debug, Clone, Deserialize)]
pub struct FeatureCatalog {
    pub version: u32,
    pub keys: Vec<String>,
    pub mandatory_for_iot: Vec<String>,
}

pub fn catalog() -> &'static FeatureCatalog {
    static CATALOG: OnceLock<FeatureCatalog> = OnceLock::new();
    CATALOG.get_or_init(|| serde_json::from_str(CATALOG_JSON).expect("embedded catalog is valid"))
}

/// Supported values per feature key, e.g. `bandwidth_mhz -> {"40", "100"}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureSet(pub BTreeMap<String, BTreeSet<String>>);

impl FeatureSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert<K, V, I>(&mut self, key: K, values: I)
    where
        K: Into<String>,
        V: Into<String>,
        I: IntoIterator<Item = V>,
    {
        self.0
            .entry(key.into())
            .or_default()
            .extend(values.into_iter().map(Into::into));
    }

    pub fn get(&self, key: &str) -> Option<&BTreeSet<String>> {
        self.0.get(key)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Keys not present in the shipped catalog. The caller decides how to
    /// surface them; registration logs them as warnings.
    pub fn unknown_keys(&self) -> Vec<String> {
        let known = &catalog().keys;
        self.0
            .keys()
            .filter(|k| !known.contains(k))
            .cloned()
            .collect()
    }
}

impl<K: Into<String>, V: Into<String>, I: IntoIterator<Item = V>> FromIterator<(K, I)>
    for FeatureSet
{
    fn from_iter<T: IntoIterator<Item = (K, I)>>(iter: T) -> Self {
        let mut set = FeatureSet::new();
        for (k, vs) in iter {
            set.insert(k, vs);
        }
        set
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_parses_and_has_mandatory_keys() {
        let cat = catalog();
        assert_eq!(cat.version, 1);
        for key in &cat.mandatory_for_iot {
            assert!(cat.keys.contains(key), "mandatory key {key} not in catalog");
        }
    }

    #[test]
    fn unknown_keys_are_reported() {
        let fs = FeatureSet::from_iter([
            ("bandwidth_mhz", ["100"]),
            ("beamforming_mode", ["static"]),
        ]);
        assert_eq!(fs.unknown_keys(), vec!["beamforming_mode".to_string()]);
    }
}
