//! Table, query and corpus data model.
//!
//! A table is the triple of headers, cells and an optional caption. Only
//! regular tables (every row as wide as the header row) enter a [`Corpus`];
//! irregular records are rejected at load time with a [`RegularityReport`].

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::tokenize;

/// One of the three parts of a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aspect {
    Headers,
    Cells,
    Caption,
}

impl Aspect {
    pub const ALL: [Aspect; 3] = [Aspect::Headers, Aspect::Cells, Aspect::Caption];

    pub fn name(self) -> &'static str {
        match self {
            Aspect::Headers => "headers",
            Aspect::Cells => "cells",
            Aspect::Caption => "caption",
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Aspect::Headers => "H",
            Aspect::Cells => "Cel",
            Aspect::Caption => "Cap",
        }
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Aspect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "headers" | "header" | "h" => Ok(Aspect::Headers),
            "cells" | "cell" | "cel" => Ok(Aspect::Cells),
            "caption" | "cap" => Ok(Aspect::Caption),
            other => Err(Error::Config(format!("unknown aspect `{other}`"))),
        }
    }
}

/// A set of aspects, always iterated in the canonical order headers, cells, caption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AspectSet {
    pub headers: bool,
    pub cells: bool,
    pub caption: bool,
}

impl AspectSet {
    pub const fn all() -> Self {
        Self {
            headers: true,
            cells: true,
            caption: true,
        }
    }

    /// Candidate-stage representation used for web queries: caption and headers.
    pub const fn caption_headers() -> Self {
        Self {
            headers: true,
            cells: false,
            caption: true,
        }
    }

    pub fn only(aspect: Aspect) -> Self {
        Self::from_iter([aspect])
    }

    pub fn contains(&self, aspect: Aspect) -> bool {
        match aspect {
            Aspect::Headers => self.headers,
            Aspect::Cells => self.cells,
            Aspect::Caption => self.caption,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Aspect> + '_ {
        Aspect::ALL.into_iter().filter(|a| self.contains(*a))
    }

    pub fn is_empty(&self) -> bool {
        !(self.headers || self.cells || self.caption)
    }

    /// Short label such as `H+Cel+Cap`.
    pub fn label(&self) -> String {
        self.iter().map(Aspect::short_name).collect::<Vec<_>>().join("+")
    }
}

impl FromIterator<Aspect> for AspectSet {
    fn from_iter<I: IntoIterator<Item = Aspect>>(iter: I) -> Self {
        let mut set = AspectSet {
            headers: false,
            cells: false,
            caption: false,
        };
        for a in iter {
            match a {
                Aspect::Headers => set.headers = true,
                Aspect::Cells => set.cells = true,
                Aspect::Caption => set.caption = true,
            }
        }
        set
    }
}

impl FromStr for AspectSet {
    type Err = Error;

    /// Parses a comma or plus separated list, e.g. `caption,headers` or `H+Cel`.
    fn from_str(s: &str) -> Result<Self> {
        let set: AspectSet = s
            .split([',', '+'])
            .filter(|p| !p.trim().is_empty())
            .map(Aspect::from_str)
            .collect::<Result<_>>()?;
        if set.is_empty() {
            return Err(Error::Config("empty aspect list".into()));
        }
        Ok(set)
    }
}

impl fmt::Display for AspectSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.iter().map(Aspect::name).collect();
        f.write_str(&names.join(","))
    }
}

/// A table: headers, a row-major grid of cells and an optional caption.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub id: String,
    pub headers: Vec<String>,
    pub cells: Vec<Vec<String>>,
    pub caption: Option<String>,
}

impl Table {
    pub fn num_columns(&self) -> usize {
        self.headers.len()
    }

    pub fn num_rows(&self) -> usize {
        self.cells.len()
    }

    pub fn to_record(&self) -> TableRecord {
        TableRecord {
            id: Some(self.id.clone()),
            caption: self.caption.clone(),
            headers: Some(self.headers.clone()),
            rows: Some(self.cells.clone()),
        }
    }

    /// Tokens of each header, in column order.
    pub fn header_tokens(&self) -> Vec<Vec<String>> {
        self.headers.iter().map(|h| tokenize(h)).collect()
    }

    /// Tokens of each cell, row-major.
    pub fn cell_tokens(&self) -> Vec<Vec<Vec<String>>> {
        self.cells
            .iter()
            .map(|row| row.iter().map(|c| tokenize(c)).collect())
            .collect()
    }
}

/// On-disk table record; every field optional so that missing fields can be named.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TableRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub headers: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Vec<String>>>,
}

/// Outcome of checking a table against the regularity criterion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegularityReport {
    pub table_id: String,
    pub is_regular: bool,
    pub violations: Vec<String>,
}

/// Builds a [`Table`] from a record, copying text verbatim.
pub fn parse_table_record(raw: TableRecord) -> Result<Table> {
    let id = raw.id.ok_or(Error::MissingField("id"))?;
    let headers = raw.headers.ok_or(Error::MissingField("headers"))?;
    let cells = raw.rows.ok_or(Error::MissingField("rows"))?;
    let table = Table {
        id,
        headers,
        cells,
        caption: raw.caption,
    };
    let report = validate_regular(&table);
    if !report.is_regular {
        return Err(Error::Irregular {
            table_id: table.id,
            violations: report.violations,
        });
    }
    Ok(table)
}

pub fn validate_regular(table: &Table) -> RegularityReport {
    let mut violations = Vec::new();
    let width = table.headers.len();
    if width == 0 {
        violations.push("table has no headers".to_string());
    }
    if table.cells.is_empty() {
        violations.push("table has no rows".to_string());
    }
    for (i, row) in table.cells.iter().enumerate() {
        if row.len() != width {
            violations.push(format!("row {i} has {} cells, expected {width}", row.len()));
        }
    }
    RegularityReport {
        table_id: table.id.clone(),
        is_regular: violations.is_empty(),
        violations,
    }
}

/// Token sequence of one aspect of a table.
///
/// Headers are tokenized one by one and concatenated in column order; cells
/// are concatenated row-major; an absent caption yields an empty sequence.
pub fn aspect_text(table: &Table, aspect: Aspect) -> Vec<String> {
    match aspect {
        Aspect::Headers => table.headers.iter().flat_map(|h| tokenize(h)).collect(),
        Aspect::Cells => table
            .cells
            .iter()
            .flatten()
            .flat_map(|c| tokenize(c))
            .collect(),
        Aspect::Caption => table.caption.as_deref().map(tokenize).unwrap_or_default(),
    }
}

/// Concatenated tokens of the given aspects, in canonical aspect order.
pub fn document_tokens(table: &Table, aspects: AspectSet) -> Vec<String> {
    aspects.iter().flat_map(|a| aspect_text(table, a)).collect()
}

/// A collection of regular tables with unique ids.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    tables: Vec<Table>,
    by_id: HashMap<String, usize>,
    pub provenance: String,
}

impl Corpus {
    pub fn new(provenance: impl Into<String>) -> Self {
        Self {
            provenance: provenance.into(),
            ..Default::default()
        }
    }

    pub fn from_tables(tables: impl IntoIterator<Item = Table>) -> Result<Self> {
        let mut corpus = Corpus::new("in-memory");
        for t in tables {
            corpus.insert(t)?;
        }
        Ok(corpus)
    }

    pub fn insert(&mut self, table: Table) -> Result<()> {
        if self.by_id.contains_key(&table.id) {
            return Err(Error::DuplicateId(table.id));
        }
        self.by_id.insert(table.id.clone(), self.tables.len());
        self.tables.push(table);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Table> {
        self.by_id.get(id).map(|&i| &self.tables[i])
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Table> {
        self.tables.iter()
    }
}

/// Result of [`load_corpus`]: the corpus plus the reports of rejected tables.
#[derive(Debug)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub rejected: Vec<RegularityReport>,
}

/// Loads a line-delimited JSON corpus, dropping irregular tables.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<LoadedCorpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut corpus = Corpus::new(path.display().to_string());
    let mut rejected = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TableRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(Some(lineno + 1), e.to_string()))?;
        match parse_table_record(record) {
            Ok(table) => corpus.insert(table)?,
            Err(Error::Irregular {
                table_id,
                violations,
            }) => {
                log::warn!(
                    "rejecting irregular table {table_id} (line {}): {}",
                    lineno + 1,
                    violations.join("; ")
                );
                rejected.push(RegularityReport {
                    table_id,
                    is_regular: false,
                    violations,
                });
            }
            Err(Error::MissingField(field)) => {
                return Err(Error::parse(
                    Some(lineno + 1),
                    format!("missing field `{field}`"),
                ))
            }
            Err(e) => return Err(e),
        }
    }
    if !rejected.is_empty() {
        log::info!("{} irregular tables rejected from {}", rejected.len(), path.display());
    }
    Ok(LoadedCorpus { corpus, rejected })
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for t in corpus.iter() {
        let line = serde_json::to_string(&t.to_record()).expect("record serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// A query: raw text and its tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
}

impl Query {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Self {
            id: id.into(),
            text,
            tokens,
        }
    }
}

/// A query with its ground-truth relevant tables (empty for unlabeled sets).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledQuery {
    pub query: Query,
    pub relevant: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relevant_table_ids: Vec<String>,
}

pub fn load_queries(path: impl AsRef<Path>) -> Result<Vec<LabeledQuery>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: QueryRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(Some(lineno + 1), e.to_string()))?;
        out.push(LabeledQuery {
            query: Query::new(rec.id, rec.text),
            relevant: rec.relevant_table_ids,
        });
    }
    Ok(out)
}

pub fn save_queries(queries: &[LabeledQuery], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for q in queries {
        let rec = QueryRecord {
            id: q.query.id.clone(),
            text: q.query.text.clone(),
            relevant_table_ids: q.relevant.clone(),
        };
        writeln!(w, "{}", serde_json::to_string(&rec).expect("record serializes"))
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(json: &str) -> TableRecord {
        serde_json::from_str(json).unwrap()
    }

    fn table(headers: &[&str], rows: &[&[&str]], caption: Option<&str>) -> Table {
        Table {
            id: "t".into(),
            headers: headers.iter().map(|s| s.to_string()).collect(),
            cells: rows
                .iter()
                .map(|r| r.iter().map(|s| s.to_string()).collect())
                .collect(),
            caption: caption.map(str::to_string),
        }
    }

    #[test]
    fn parse_minimal_table() {
        let t = parse_table_record(record(r#"{"id":"t1","headers":["city"],"rows":[["amsterdam"]]}"#))
            .unwrap();
        assert_eq!(t.id, "t1");
        assert_eq!(t.num_columns(), 1);
        assert_eq!(t.num_rows(), 1);
        assert!(t.caption.is_none());
    }

    #[test]
    fn parse_ragged_row_reports_row_index() {
        let err = parse_table_record(record(r#"{"id":"t2","headers":["a","b"],"rows":[["1"]]}"#))
            .unwrap_err();
        match err {
            Error::Irregular { violations, .. } => {
                assert_eq!(violations, vec!["row 0 has 1 cells, expected 2"])
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_keeps_caption_verbatim() {
        let t = parse_table_record(record(
            r#"{"id":"t3","headers":["dates"],"rows":[["2016"]],"caption":"ramadan in malaysia"}"#,
        ))
        .unwrap();
        assert_eq!(t.caption.as_deref(), Some("ramadan in malaysia"));
    }

    #[test]
    fn parse_names_missing_fields() {
        assert!(matches!(
            parse_table_record(record(r#"{"headers":["a"],"rows":[["1"]]}"#)),
            Err(Error::MissingField("id"))
        ));
        assert!(matches!(
            parse_table_record(record(r#"{"id":"x","rows":[["1"]]}"#)),
            Err(Error::MissingField("headers"))
        ));
    }

    #[test]
    fn validate_examples() {
        let ok = table(&["a", "b"], &[&["1", "2"], &["3", "4"]], None);
        assert!(validate_regular(&ok).is_regular);

        let ragged = table(&["a", "b", "c"], &[&["1", "2"]], None);
        let r = validate_regular(&ragged);
        assert!(!r.is_regular);
        assert_eq!(r.violations, vec!["row 0 has 2 cells, expected 3"]);

        let no_headers = table(&[], &[&[]], None);
        assert!(!validate_regular(&no_headers).is_regular);
    }

    #[test]
    fn aspect_text_examples() {
        let t = table(&["Major Cities"], &[&["x"]], None);
        assert_eq!(aspect_text(&t, Aspect::Headers), vec!["major", "cities"]);
        assert!(aspect_text(&t, Aspect::Caption).is_empty());
        let t = table(&["h1", "h2"], &[&["a", "b"], &["c", "d"]], Some("cap"));
        assert_eq!(aspect_text(&t, Aspect::Cells), vec!["a", "b", "c", "d"]);
    }

    #[test]
    fn aspect_set_parsing() {
        let s: AspectSet = "caption,headers".parse().unwrap();
        assert_eq!(s, AspectSet::caption_headers());
        assert_eq!(s.label(), "H+Cap");
        let s: AspectSet = "H+Cel+Cap".parse().unwrap();
        assert_eq!(s, AspectSet::all());
        assert!("".parse::<AspectSet>().is_err());
        assert!("rows".parse::<AspectSet>().is_err());
    }

    fn write_lines(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn load_regular_corpus() {
        let f = write_lines(&[
            r#"{"id":"a","headers":["x"],"rows":[["1"]]}"#,
            r#"{"id":"b","headers":["x"],"rows":[["2"]]}"#,
            r#"{"id":"c","headers":["x"],"rows":[["3"]],"caption":"c"}"#,
        ]);
        let loaded = load_corpus(f.path()).unwrap();
        assert_eq!(loaded.corpus.len(), 3);
        assert!(loaded.rejected.is_empty());
    }

    #[test]
    fn load_rejects_ragged() {
        let f = write_lines(&[
            r#"{"id":"a","headers":["x"],"rows":[["1"]]}"#,
            r#"{"id":"b","headers":["x","y"],"rows":[["2"]]}"#,
            r#"{"id":"c","headers":["x"],"rows":[["3"]]}"#,
        ]);
        let loaded = load_corpus(f.path()).unwrap();
        assert_eq!(loaded.corpus.len(), 2);
        assert_eq!(loaded.rejected.len(), 1);
        assert_eq!(loaded.rejected[0].table_id, "b");
    }

    #[test]
    fn load_duplicate_id_fails() {
        let f = write_lines(&[
            r#"{"id":"a","headers":["x"],"rows":[["1"]]}"#,
            r#"{"id":"a","headers":["x"],"rows":[["2"]]}"#,
        ]);
        match load_corpus(f.path()) {
            Err(Error::DuplicateId(id)) => assert_eq!(id, "a"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_malformed_reports_line() {
        let f = write_lines(&[r#"{"id":"a","headers":["x"],"rows":[["1"]]}"#, "{not json"]);
        match load_corpus(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, Some(2)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
