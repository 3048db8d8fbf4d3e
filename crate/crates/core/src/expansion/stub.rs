use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{normalize_phrase, ExpansionError, ExpansionRequest, Expander, Result};

/// Fixture-backed expander. A pure function of the query text.
///
/// Fixtures are `*.json` files, each one object mapping query text to a
/// phrase list. Queries without a fixture expand to their own words.
#[derive(Debug, Clone, Default)]
pub struct StubExpander {
    fixtures: BTreeMap<String, Vec<String>>,
}

impl StubExpander {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_map(map: impl IntoIterator<Item = (String, Vec<String>)>) -> Self {
        Self { fixtures: map.into_iter().map(|(q, p)| (normalize_phrase(&q), p)).collect() }
    }

    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut paths: Vec<_> = fs::read_dir(dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
        paths.sort();
        let mut fixtures = BTreeMap::new();
        for path in paths {
            let map: BTreeMap<String, Vec<String>> = serde_json::from_slice(&fs::read(&path)?)
                .map_err(|e| ExpansionError::Fixture(format!("{}: {e}", path.display())))?;
            for (query, phrases) in map {
                let key = normalize_phrase(&query);
                if fixtures.insert(key, phrases).is_some() {
                    return Err(ExpansionError::Fixture(format!("query {query:?} defined twice ({})", path.display())));
                }
            }
        }
        Ok(Self { fixtures })
    }

    pub fn len(&self) -> usize {
        self.fixtures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures.is_empty()
    }
}

impl Expander for StubExpander {
    fn id(&self) -> String {
        "stub".into()
    }

    fn raw_phrases(&self, req: &ExpansionRequest) -> Result<Vec<String>> {
        let key = normalize_phrase(&req.query_text);
        Ok(match self.fixtures.get(&key) {
            Some(phrases) => phrases.clone(),
            None => key.split(' ').map(str::to_string).collect(),
        })
    }
}
