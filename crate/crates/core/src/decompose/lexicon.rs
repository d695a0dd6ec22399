use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;

use crate::{Error, Result};

const BUILTIN: &str = include_str!("../../data/lexicon.toml");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    version: u32,
    aggregations: BTreeMap<String, Vec<String>>,
    comparators: BTreeMap<String, Vec<String>>,
    grouping: RawGrouping,
    temporal: BTreeMap<String, Vec<String>>,
    arithmetic: BTreeMap<String, Vec<String>>,
    words: RawWords,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrouping {
    cues: Vec<String>,
    time_units: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWords {
    months: Vec<String>,
    copulas: Vec<String>,
    articles: Vec<String>,
    stopwords: Vec<String>,
}

/// A cue phrase (lower-case tokens) mapped to an operation label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cue {
    pub words: Vec<String>,
    pub operation: String,
}

/// Keyword tables for the rule-based extractor.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub version: u32,
    pub aggregations: Vec<Cue>,
    pub comparators: Vec<Cue>,
    pub grouping: Vec<Cue>,
    pub time_units: BTreeSet<String>,
    pub temporal: Vec<Cue>,
    pub arithmetic: Vec<Cue>,
    pub months: Vec<String>,
    pub copulas: BTreeSet<String>,
    pub articles: BTreeSet<String>,
    pub stopwords: BTreeSet<String>,
}

/// Longest phrases first, then by text, so matching is greedy and stable.
fn cues(table: BTreeMap<String, Vec<String>>) -> Vec<Cue> {
    let mut out: Vec<Cue> = table
        .into_iter()
        .flat_map(|(op, phrases)| {
            phrases.into_iter().map(move |p| Cue {
                words: p.to_lowercase().split_whitespace().map(str::to_string).collect(),
                operation: op.clone(),
            })
        })
        .filter(|c| !c.words.is_empty())
        .collect();
    out.sort_by(|a, b| b.words.len().cmp(&a.words.len()).then_with(|| a.words.cmp(&b.words)));
    out
}

fn lower_set(words: Vec<String>) -> BTreeSet<String> {
    words.into_iter().map(|w| w.to_lowercase()).collect()
}

impl Lexicon {
    /// The lexicon shipped with the crate.
    pub fn builtin() -> Self {
        Lexicon::from_toml(BUILTIN).expect("bundled lexicon parses")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: Raw = toml::from_str(text).map_err(|e| Error::Config(format!("lexicon: {e}")))?;
        let grouping = BTreeMap::from([("GROUP".to_string(), raw.grouping.cues)]);
        Ok(Lexicon {
            version: raw.version,
            aggregations: cues(raw.aggregations),
            comparators: cues(raw.comparators),
            grouping: cues(grouping),
            time_units: lower_set(raw.grouping.time_units),
            temporal: cues(raw.temporal),
            arithmetic: cues(raw.arithmetic),
            months: raw.words.months.into_iter().map(|m| m.to_lowercase()).collect(),
            copulas: lower_set(raw.words.copulas),
            articles: lower_set(raw.words.articles),
            stopwords: lower_set(raw.words.stopwords),
        })
    }

    /// 1-based month number of a month name.
    pub fn month(&self, word: &str) -> Option<u32> {
        self.months.iter().position(|m| m == word).map(|i| i as u32 + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_lexicon_loads() {
        let lex = Lexicon::builtin();
        assert_eq!(lex.version, 1);
        assert_eq!(lex.month("april"), Some(4));
        assert!(lex.time_units.contains("month"));
        let avg: Vec<&Cue> = lex.aggregations.iter().filter(|c| c.operation == "AVG").collect();
        assert_eq!(avg.len(), 3);
        assert_eq!(lex.comparators[0].words.len(), 5);
        assert!(lex.stopwords.contains("the"));
    }

    #[test]
    fn malformed_lexicon_is_a_config_error() {
        assert!(matches!(Lexicon::from_toml("version = 'x'"), Err(Error::Config(_))));
    }
}
