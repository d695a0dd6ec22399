//! Sampling-based join statistics.
//!
//! For each candidate join pair the profile stores a selectivity proxy and a
//! correlation strength, both in `[0, 1]`:
//!
//! - selectivity: Jaccard overlap of the sampled distinct values of the two
//!   join columns (NULLs ignored);
//! - correlation: the two samples are paired by row position; when both
//!   columns are numeric this is `|pearson|`, otherwise Cramér's V over the
//!   paired category co-occurrences.
//!
//! Anything that cannot be computed (empty table, constant column, fewer than
//! two pairs) takes [`NEUTRAL_STAT`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rusqlite::types::ValueRef;

use super::sqlite::{open_read_only, quote_ident, user_tables};
use super::Schema;
use crate::cost::{candidate_join_pairs, CostWeights, TrigramEmbedder};
use crate::{Error, Result};

pub const NEUTRAL_STAT: f64 = 0.5;
pub const DEFAULT_SAMPLE_LIMIT: usize = 10_000;

/// A join between two columns. `left_table <= right_table` by name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JoinPair {
    pub left_table: String,
    pub left_column: String,
    pub right_table: String,
    pub right_column: String,
}

impl JoinPair {
    pub fn new(t1: &str, c1: &str, t2: &str, c2: &str) -> Self {
        if t1 <= t2 {
            JoinPair {
                left_table: t1.into(),
                left_column: c1.into(),
                right_table: t2.into(),
                right_column: c2.into(),
            }
        } else {
            JoinPair::new(t2, c2, t1, c1)
        }
    }

    fn table_key(&self) -> (String, String) {
        (self.left_table.clone(), self.right_table.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStats {
    pub selectivity: f64,
    pub correlation: f64,
}

impl PairStats {
    pub const NEUTRAL: PairStats = PairStats {
        selectivity: NEUTRAL_STAT,
        correlation: NEUTRAL_STAT,
    };
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ColumnProfile {
    pub distinct_count: usize,
    pub sample: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsProfile {
    sample_limit: usize,
    columns: BTreeMap<(String, String), ColumnProfile>,
    pairs: BTreeMap<(String, String), PairStats>,
}

impl StatsProfile {
    /// An empty profile: every pair reads as neutral.
    pub fn neutral(sample_limit: usize) -> Self {
        StatsProfile {
            sample_limit,
            columns: BTreeMap::new(),
            pairs: BTreeMap::new(),
        }
    }

    /// Builds a profile from explicit pair statistics (clamped to `[0, 1]`).
    pub fn from_pairs(sample_limit: usize, pairs: impl IntoIterator<Item = (String, String, PairStats)>) -> Self {
        let mut profile = StatsProfile::neutral(sample_limit);
        for (a, b, stats) in pairs {
            profile.insert_pair(&a, &b, stats);
        }
        profile
    }

    fn insert_pair(&mut self, a: &str, b: &str, stats: PairStats) {
        let key = if a <= b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
        self.pairs.insert(
            key,
            PairStats {
                selectivity: clamp_unit(stats.selectivity),
                correlation: clamp_unit(stats.correlation),
            },
        );
    }

    pub fn sample_limit(&self) -> usize {
        self.sample_limit
    }

    /// Statistics for a table pair in either order; neutral when unprofiled.
    pub fn pair(&self, a: &str, b: &str) -> PairStats {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.pairs
            .get(&(key.0.to_string(), key.1.to_string()))
            .copied()
            .unwrap_or(PairStats::NEUTRAL)
    }

    pub fn column(&self, table: &str, column: &str) -> Option<&ColumnProfile> {
        self.columns.get(&(table.to_string(), column.to_string()))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&(String, String), &PairStats)> {
        self.pairs.iter()
    }
}

fn clamp_unit(x: f64) -> f64 {
    if x.is_nan() {
        NEUTRAL_STAT
    } else {
        x.clamp(0.0, 1.0)
    }
}

/// Profiles every candidate join pair of `schema` (FK pairs and pairs whose
/// column similarity clears the default admission threshold).
pub fn profile_statistics(schema: &Schema, path: &Path, sample_limit: usize) -> Result<StatsProfile> {
    let pairs = candidate_join_pairs(schema, &CostWeights::default(), &TrigramEmbedder::default())?;
    profile_statistics_for_pairs(schema, path, sample_limit, &pairs)
}

#[derive(Debug, Clone, PartialEq)]
enum Sample {
    Null,
    Number(f64),
    Text(String),
}

impl Sample {
    fn key(&self) -> Option<String> {
        match self {
            Sample::Null => None,
            Sample::Number(x) if x.fract() == 0.0 && x.abs() < 9.0e15 => Some(format!("n:{}", *x as i64)),
            Sample::Number(x) => Some(format!("n:{x}")),
            Sample::Text(s) => Some(format!("s:{s}")),
        }
    }
}

type TableSample = HashMap<String, Vec<Sample>>;

pub fn profile_statistics_for_pairs(
    schema: &Schema,
    path: &Path,
    sample_limit: usize,
    pairs: &[JoinPair],
) -> Result<StatsProfile> {
    if sample_limit == 0 {
        return Err(Error::Config("sample_limit must be positive".into()));
    }
    let conn = open_read_only(path)?;
    let present: BTreeSet<String> = user_tables(&conn)?.into_iter().collect();
    for table in schema.tables() {
        if !present.contains(&table.name) {
            return Err(Error::SchemaMismatch(format!(
                "table `{}` is missing from {}",
                table.name,
                path.display()
            )));
        }
    }

    let mut samples: BTreeMap<String, TableSample> = BTreeMap::new();
    for table in schema.tables() {
        let columns: Vec<&str> = table.columns.iter().map(|c| c.name.as_str()).collect();
        let select = columns.iter().map(|c| quote_ident(c)).collect::<Vec<_>>().join(", ");
        let sql = format!(
            "SELECT {select} FROM {} LIMIT {sample_limit}",
            quote_ident(&table.name)
        );
        let mut stmt = conn
            .prepare(&sql)
            .map_err(|e| Error::SchemaMismatch(format!("table `{}`: {e}", table.name)))?;
        let mut per_column: TableSample = columns.iter().map(|c| (c.to_string(), Vec::new())).collect();
        let mut rows = stmt.query([])?;
        while let Some(row) = rows.next()? {
            for (i, col) in columns.iter().enumerate() {
                let value = match row.get_ref(i)? {
                    ValueRef::Null => Sample::Null,
                    ValueRef::Integer(v) => Sample::Number(v as f64),
                    ValueRef::Real(v) => Sample::Number(v),
                    ValueRef::Text(t) => Sample::Text(String::from_utf8_lossy(t).into_owned()),
                    ValueRef::Blob(b) => Sample::Text(format!("blob:{b:?}")),
                };
                per_column.get_mut(*col).expect("column present").push(value);
            }
        }
        samples.insert(table.name.clone(), per_column);
    }

    let mut profile = StatsProfile::neutral(sample_limit);
    for (table, columns) in &samples {
        for (column, values) in columns {
            let sample: BTreeSet<String> = values.iter().filter_map(Sample::key).collect();
            profile.columns.insert(
                (table.clone(), column.clone()),
                ColumnProfile {
                    distinct_count: sample.len(),
                    sample,
                },
            );
        }
    }

    for pair in pairs {
        let left = samples
            .get(&pair.left_table)
            .and_then(|t| t.get(&pair.left_column));
        let right = samples
            .get(&pair.right_table)
            .and_then(|t| t.get(&pair.right_column));
        let stats = match (left, right) {
            (Some(l), Some(r)) => PairStats {
                selectivity: jaccard(l, r),
                correlation: correlation(l, r),
            },
            _ => PairStats::NEUTRAL,
        };
        let (a, b) = pair.table_key();
        profile.insert_pair(&a, &b, stats);
    }
    Ok(profile)
}

fn jaccard(left: &[Sample], right: &[Sample]) -> f64 {
    let l: BTreeSet<String> = left.iter().filter_map(Sample::key).collect();
    let r: BTreeSet<String> = right.iter().filter_map(Sample::key).collect();
    if l.is_empty() || r.is_empty() {
        return NEUTRAL_STAT;
    }
    let inter = l.intersection(&r).count();
    let union = l.union(&r).count();
    inter as f64 / union as f64
}

fn correlation(left: &[Sample], right: &[Sample]) -> f64 {
    let paired: Vec<(&Sample, &Sample)> = left
        .iter()
        .zip(right)
        .filter(|(a, b)| **a != Sample::Null && **b != Sample::Null)
        .collect();
    if paired.len() < 2 {
        return NEUTRAL_STAT;
    }
    let numeric: Option<Vec<(f64, f64)>> = paired
        .iter()
        .map(|(a, b)| match (a, b) {
            (Sample::Number(x), Sample::Number(y)) => Some((*x, *y)),
            _ => None,
        })
        .collect();
    match numeric {
        Some(xy) => pearson(&xy).map(f64::abs).unwrap_or(NEUTRAL_STAT),
        None => {
            let keys: Vec<(String, String)> = paired
                .iter()
                .filter_map(|(a, b)| Some((a.key()?, b.key()?)))
                .collect();
            cramers_v(&keys).unwrap_or(NEUTRAL_STAT)
        }
    }
}

pub(crate) fn pearson(xy: &[(f64, f64)]) -> Option<f64> {
    let n = xy.len() as f64;
    if xy.len() < 2 {
        return None;
    }
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in xy {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub(crate) fn cramers_v(pairs: &[(String, String)]) -> Option<f64> {
    let rows: BTreeSet<&str> = pairs.iter().map(|p| p.0.as_str()).collect();
    let cols: BTreeSet<&str> = pairs.iter().map(|p| p.1.as_str()).collect();
    let k = rows.len().min(cols.len());
    if k < 2 {
        return None;
    }
    let mut counts: HashMap<(&str, &str), f64> = HashMap::new();
    let mut row_totals: HashMap<&str, f64> = HashMap::new();
    let mut col_totals: HashMap<&str, f64> = HashMap::new();
    for (a, b) in pairs {
        *counts.entry((a.as_str(), b.as_str())).or_default() += 1.0;
        *row_totals.entry(a.as_str()).or_default() += 1.0;
        *col_totals.entry(b.as_str()).or_default() += 1.0;
    }
    let n = pairs.len() as f64;
    let mut chi2 = 0.0;
    for r in &rows {
        for c in &cols {
            let expected = row_totals[r] * col_totals[c] / n;
            let observed = counts.get(&(*r, *c)).copied().unwrap_or(0.0);
            chi2 += (observed - expected).powi(2) / expected;
        }
    }
    Some((chi2 / (n * (k as f64 - 1.0))).sqrt().clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::load_schema_from_database;
    use rusqlite::Connection;

    fn fixture(sql: &str) -> tempfile::TempPath {
        let file = tempfile::NamedTempFile::new().unwrap().into_temp_path();
        Connection::open(&file).unwrap().execute_batch(sql).unwrap();
        file
    }

    fn fk_pair() -> Vec<JoinPair> {
        vec![JoinPair::new("orders", "customer_id", "customers", "id")]
    }

    #[test]
    fn perfect_key_containment_has_unit_selectivity() {
        let db = fixture(
            "CREATE TABLE customers (id INTEGER PRIMARY KEY);
             CREATE TABLE orders (id INTEGER, customer_id INTEGER REFERENCES customers(id));
             INSERT INTO customers VALUES (1), (2), (3);
             INSERT INTO orders VALUES (10, 1), (11, 2), (12, 3), (13, 1);",
        );
        let schema = load_schema_from_database(&db).unwrap();
        let profile = profile_statistics_for_pairs(&schema, &db, 100, &fk_pair()).unwrap();
        assert_eq!(profile.pair("orders", "customers").selectivity, 1.0);
        assert_eq!(profile.column("orders", "customer_id").unwrap().distinct_count, 3);
    }

    #[test]
    fn disjoint_domains_have_zero_selectivity() {
        let db = fixture(
            "CREATE TABLE customers (id INTEGER PRIMARY KEY);
             CREATE TABLE orders (id INTEGER, customer_id INTEGER);
             INSERT INTO customers VALUES (1), (2);
             INSERT INTO orders VALUES (10, 7), (11, 8);",
        );
        let schema = load_schema_from_database(&db).unwrap();
        let profile = profile_statistics_for_pairs(&schema, &db, 100, &fk_pair()).unwrap();
        assert_eq!(profile.pair("customers", "orders").selectivity, 0.0);
    }

    #[test]
    fn empty_table_is_neutral() {
        let db = fixture(
            "CREATE TABLE customers (id INTEGER PRIMARY KEY);
             CREATE TABLE orders (id INTEGER, customer_id INTEGER);
             INSERT INTO customers VALUES (1), (2);",
        );
        let schema = load_schema_from_database(&db).unwrap();
        let profile = profile_statistics_for_pairs(&schema, &db, 100, &fk_pair()).unwrap();
        assert_eq!(profile.pair("customers", "orders"), PairStats::NEUTRAL);
        assert_eq!(profile.pair("nobody", "else"), PairStats::NEUTRAL);
    }

    #[test]
    fn sample_limit_caps_rows_scanned() {
        let db = fixture(
            "CREATE TABLE a (x INTEGER);
             CREATE TABLE b (x INTEGER);
             WITH RECURSIVE s(i) AS (SELECT 1 UNION ALL SELECT i + 1 FROM s WHERE i < 50)
             INSERT INTO a SELECT i FROM s;
             INSERT INTO b SELECT x FROM a;",
        );
        let schema = load_schema_from_database(&db).unwrap();
        let pairs = vec![JoinPair::new("a", "x", "b", "x")];
        let profile = profile_statistics_for_pairs(&schema, &db, 10, &pairs).unwrap();
        assert_eq!(profile.column("a", "x").unwrap().distinct_count, 10);
        let stats = profile.pair("a", "b");
        assert_eq!(stats.selectivity, 1.0);
        assert!((stats.correlation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_table_is_a_mismatch() {
        let db = fixture("CREATE TABLE a (x INTEGER);");
        let other = fixture("CREATE TABLE a (x INTEGER); CREATE TABLE b (y INTEGER);");
        let schema = load_schema_from_database(&other).unwrap();
        assert!(matches!(
            profile_statistics_for_pairs(&schema, &db, 10, &[]),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn categorical_correlation_uses_cramers_v() {
        let perfect: Vec<(String, String)> = [("a", "x"), ("b", "y"), ("a", "x"), ("b", "y")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert!((cramers_v(&perfect).unwrap() - 1.0).abs() < 1e-12);
        let independent: Vec<(String, String)> = [("a", "x"), ("a", "y"), ("b", "x"), ("b", "y")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert!(cramers_v(&independent).unwrap().abs() < 1e-12);
        assert_eq!(pearson(&[(1.0, 2.0), (1.0, 3.0)]), None);
    }

    #[test]
    fn explicit_pairs_are_clamped() {
        let p = StatsProfile::from_pairs(
            5,
            [("b".to_string(), "a".to_string(), PairStats { selectivity: 1.7, correlation: -0.2 })],
        );
        assert_eq!(p.pair("a", "b"), PairStats { selectivity: 1.0, correlation: 0.0 });
    }
}
