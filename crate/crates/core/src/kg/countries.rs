use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};

use super::{Triple, TripleStore, Vocabulary};

pub const IS_CAPITAL_OF: &str = "is_capital_of";
pub const IS_LOCATED_IN: &str = "is_located_in";

/// Which capitals become facts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapitalPolicy {
    /// First listed capital only; countries without a capital contribute nothing.
    /// Yields 245 + 245 facts over 489 entities on the pinned snapshot.
    #[default]
    Primary,
    /// Every listed capital; countries without a capital still get `is_located_in`.
    AllListed,
}

#[derive(Deserialize)]
struct Record {
    name: Name,
    #[serde(default)]
    capital: Vec<String>,
    #[serde(default)]
    region: String,
}

#[derive(Deserialize)]
struct Name {
    common: String,
}

pub fn load_countries(path: impl AsRef<Path>, policy: CapitalPolicy) -> Result<TripleStore> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_countries_str(&text, &path.display().to_string(), policy)
}

pub fn load_countries_str(json: &str, origin: &str, policy: CapitalPolicy) -> Result<TripleStore> {
    let records: Vec<Record> = serde_json::from_str(json).map_err(|source| Error::Json {
        path: origin.to_owned(),
        source,
    })?;
    let mut ents = Vocabulary::new();
    let mut rels = Vocabulary::new();
    let cap_rel = rels.intern(IS_CAPITAL_OF);
    let loc_rel = rels.intern(IS_LOCATED_IN);
    let mut facts = Vec::new();
    for rec in &records {
        let capitals: &[String] = match policy {
            CapitalPolicy::Primary if rec.capital.is_empty() => continue,
            CapitalPolicy::Primary => &rec.capital[..1],
            CapitalPolicy::AllListed => &rec.capital,
        };
        for cap in capitals.iter().filter(|c| !c.is_empty()) {
            let c = ents.intern(cap);
            let country = ents.intern(&rec.name.common);
            facts.push(Triple::new(c, cap_rel, country));
        }
        if !rec.region.is_empty() {
            let country = ents.intern(&rec.name.common);
            let region = ents.intern(&rec.region);
            facts.push(Triple::new(country, loc_rel, region));
        }
    }
    TripleStore::from_triples(Arc::new(ents), Arc::new(rels), facts)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"[
        {"name": {"common": "Japan", "official": "Japan"}, "capital": ["Tokyo"], "region": "Asia", "cca2": "JP"},
        {"name": {"common": "Antarctica"}, "capital": [], "region": "Antarctic"},
        {"name": {"common": "South Africa"}, "capital": ["Pretoria", "Bloemfontein", "Cape Town"], "region": "Africa"}
    ]"#;

    #[test]
    fn capital_and_region_facts() {
        let s = load_countries_str(SAMPLE, "sample", CapitalPolicy::Primary).unwrap();
        let named: Vec<_> = s.triples().iter().map(|t| s.named(t)).collect();
        assert_eq!(
            named,
            vec![
                ("Tokyo", IS_CAPITAL_OF, "Japan"),
                ("Japan", IS_LOCATED_IN, "Asia"),
                ("Pretoria", IS_CAPITAL_OF, "South Africa"),
                ("South Africa", IS_LOCATED_IN, "Africa"),
            ]
        );
    }

    #[test]
    fn all_listed_policy() {
        let s = load_countries_str(SAMPLE, "sample", CapitalPolicy::AllListed).unwrap();
        assert_eq!(s.len(), 7);
        assert!(s
            .triples()
            .iter()
            .any(|t| s.named(t) == ("Antarctica", IS_LOCATED_IN, "Antarctic")));
    }

    #[test]
    fn bad_json_is_an_error() {
        assert!(matches!(
            load_countries_str("{not json", "x", CapitalPolicy::Primary),
            Err(Error::Json { .. })
        ));
    }
}
