//! Corpus data model and input-file loaders.
//!
//! A corpus is a flat collection of [`Table`]s, each carrying five modality
//! fields (page title, text before, text after, entities, table content).
//! Relevance judgments come in two flavors: graded per-table judgments and
//! binary per-modality judgments, both keyed by topic.
//!
//! File formats:
//! - corpus: JSONL, one table object per line
//! - table qrels: `topic_id table_id grade`
//! - modality qrels: `topic_id table_id modality 0|1`
//! - topics: `topic_id query text...`
//! - query variants / term suggestions: JSON maps

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five contextual facets of a web table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    PageTitle,
    TextBefore,
    TextAfter,
    Entities,
    TableContent,
}

impl Modality {
    pub const ALL: [Modality; 5] = [
        Modality::PageTitle,
        Modality::TextBefore,
        Modality::TextAfter,
        Modality::Entities,
        Modality::TableContent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Modality::PageTitle => "page_title",
            Modality::TextBefore => "text_before",
            Modality::TextAfter => "text_after",
            Modality::Entities => "entities",
            Modality::TableContent => "table_content",
        }
    }

    fn legal_names() -> String {
        Modality::ALL
            .iter()
            .map(|m| m.name())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Modality::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownModality {
                got: s.to_string(),
                legal: Modality::legal_names(),
            })
    }
}

/// Structured table body: a header row plus data rows.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableContent {
    #[serde(default)]
    pub headers: Vec<String>,
    #[serde(default)]
    pub rows: Vec<Vec<String>>,
}

impl TableContent {
    pub fn is_empty(&self) -> bool {
        self.headers.is_empty() && self.rows.iter().all(|r| r.is_empty())
    }
}

/// One corpus item with its five modality fields.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub id: String,
    #[serde(default)]
    pub page_title: String,
    #[serde(default)]
    pub text_before: String,
    #[serde(default)]
    pub text_after: String,
    #[serde(default)]
    pub entities: Vec<String>,
    #[serde(default)]
    pub table: TableContent,
}

impl Table {
    /// Plain-text rendering of one modality, used for indexing and snippets.
    pub fn modality_text(&self, modality: Modality) -> String {
        match modality {
            Modality::PageTitle => self.page_title.clone(),
            Modality::TextBefore => self.text_before.clone(),
            Modality::TextAfter => self.text_after.clone(),
            Modality::Entities => self.entities.join(" "),
            Modality::TableContent => {
                let mut parts: Vec<&str> = Vec::new();
                parts.extend(self.table.headers.iter().map(String::as_str));
                for row in &self.table.rows {
                    parts.extend(row.iter().map(String::as_str));
                }
                parts.join(" ")
            }
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("table id is empty".to_string());
        }
        if !self.table.headers.is_empty() {
            let width = self.table.headers.len();
            for (i, row) in self.table.rows.iter().enumerate() {
                if row.len() != width {
                    return Err(format!(
                        "row {} has {} cells but there are {} headers",
                        i,
                        row.len(),
                        width
                    ));
                }
            }
        }
        let all_empty = self.page_title.is_empty()
            && self.text_before.is_empty()
            && self.text_after.is_empty()
            && self.entities.is_empty()
            && self.table.is_empty();
        if all_empty {
            return Err("every modality field is empty".to_string());
        }
        Ok(())
    }
}

/// Immutable table collection with id lookup. Tables keep load order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    tables: Vec<Table>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    /// Build from tables, rejecting duplicate or invalid entries.
    pub fn from_tables(tables: Vec<Table>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(tables.len());
        for (i, table) in tables.iter().enumerate() {
            if let Err(msg) = table.validate() {
                return Err(Error::Config(format!("table {:?}: {}", table.id, msg)));
            }
            if by_id.insert(table.id.clone(), i).is_some() {
                return Err(Error::DuplicateTableId(table.id.clone()));
            }
        }
        Ok(Corpus { tables, by_id })
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

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Table> {
        self.tables.iter()
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }
}

/// Load a JSONL corpus. Missing modality fields default to empty.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut tables = Vec::new();
    let mut seen = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let table: Table = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message: e.to_string(),
        })?;
        if let Err(msg) = table.validate() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: msg,
            });
        }
        if seen.insert(table.id.clone(), lineno).is_some() {
            return Err(Error::DuplicateTableId(table.id.clone()));
        }
        tables.push(table);
    }
    Corpus::from_tables(tables)
}

/// Write a corpus back to JSONL, one table per line, in corpus order.
pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    for table in corpus.iter() {
        let line = serde_json::to_string(table)?;
        writeln!(file, "{}", line).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}

/// Per-topic relevance judgments: graded per table, binary per modality.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TopicQrels {
    pub topic_id: String,
    /// The initial query of the topic (empty until set from a topics file).
    pub topic_query: String,
    pub table_grades: BTreeMap<String, u32>,
    pub modality_rel: BTreeMap<(String, Modality), bool>,
    /// Table ids judged but missing from table_grades or from the corpus.
    pub unpooled: BTreeSet<String>,
}

impl TopicQrels {
    pub fn grade(&self, table_id: &str) -> u32 {
        self.table_grades.get(table_id).copied().unwrap_or(0)
    }

    pub fn modality_relevant(&self, table_id: &str, modality: Modality) -> bool {
        self.modality_rel
            .get(&(table_id.to_string(), modality))
            .copied()
            .unwrap_or(false)
    }
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = std::io::Result<String>>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(BufReader::new(file).lines())
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Load graded table qrels and binary modality qrels, grouped by topic.
///
/// Identical duplicate records are tolerated; conflicting ones are an error,
/// which keeps the result independent of line order. Modality judgments for
/// tables that carry no grade record are flagged unpooled.
pub fn load_qrels(table_path: &Path, modality_path: &Path) -> Result<BTreeMap<String, TopicQrels>> {
    let mut topics: BTreeMap<String, TopicQrels> = BTreeMap::new();

    for (lineno, line) in open_lines(table_path)?.enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|source| Error::Io {
            path: table_path.to_path_buf(),
            source,
        })?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 3 {
            return Err(parse_error(
                table_path,
                lineno,
                format!(
                    "expected `topic_id table_id grade`, got {} fields",
                    fields.len()
                ),
            ));
        }
        let grade: i64 = fields[2]
            .parse()
            .map_err(|_| parse_error(table_path, lineno, format!("bad grade {:?}", fields[2])))?;
        if grade < 0 {
            return Err(parse_error(
                table_path,
                lineno,
                format!("negative grade {} for table {:?}", grade, fields[1]),
            ));
        }
        let topic = topics
            .entry(fields[0].to_string())
            .or_insert_with(|| TopicQrels {
                topic_id: fields[0].to_string(),
                ..TopicQrels::default()
            });
        let previous = topic
            .table_grades
            .insert(fields[1].to_string(), grade as u32);
        if let Some(old) = previous {
            if old != grade as u32 {
                return Err(parse_error(
                    table_path,
                    lineno,
                    format!(
                        "conflicting grades {} and {} for table {:?}",
                        old, grade, fields[1]
                    ),
                ));
            }
        }
    }

    for (lineno, line) in open_lines(modality_path)?.enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|source| Error::Io {
            path: modality_path.to_path_buf(),
            source,
        })?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 4 {
            return Err(parse_error(
                modality_path,
                lineno,
                format!(
                    "expected `topic_id table_id modality 0|1`, got {} fields",
                    fields.len()
                ),
            ));
        }
        let modality: Modality = fields[2].parse()?;
        let flag = match fields[3] {
            "0" => false,
            "1" => true,
            other => {
                return Err(parse_error(
                    modality_path,
                    lineno,
                    format!("relevance flag must be 0 or 1, got {:?}", other),
                ))
            }
        };
        let topic = topics
            .entry(fields[0].to_string())
            .or_insert_with(|| TopicQrels {
                topic_id: fields[0].to_string(),
                ..TopicQrels::default()
            });
        let key = (fields[1].to_string(), modality);
        if let Some(old) = topic.modality_rel.insert(key, flag) {
            if old != flag {
                return Err(parse_error(
                    modality_path,
                    lineno,
                    format!(
                        "conflicting modality flags for table {:?} / {}",
                        fields[1], modality
                    ),
                ));
            }
        }
    }

    for topic in topics.values_mut() {
        let ungraded: Vec<String> = topic
            .modality_rel
            .keys()
            .map(|(id, _)| id.clone())
            .filter(|id| !topic.table_grades.contains_key(id))
            .collect();
        topic.unpooled.extend(ungraded);
    }

    Ok(topics)
}

/// Flag judged table ids that are absent from the corpus. Returns one
/// warning per (topic, table id), each id reported exactly once per topic.
pub fn flag_unpooled(topics: &mut BTreeMap<String, TopicQrels>, corpus: &Corpus) -> Vec<String> {
    let mut warnings = Vec::new();
    for topic in topics.values_mut() {
        let mut absent: BTreeSet<String> = BTreeSet::new();
        absent.extend(
            topic
                .table_grades
                .keys()
                .filter(|id| !corpus.contains(id))
                .cloned(),
        );
        absent.extend(
            topic
                .modality_rel
                .keys()
                .map(|(id, _)| id)
                .filter(|id| !corpus.contains(id))
                .cloned(),
        );
        for id in absent {
            warnings.push(format!(
                "topic {}: judged table {:?} is not in the corpus (kept as unpooled)",
                topic.topic_id, id
            ));
            topic.unpooled.insert(id);
        }
    }
    warnings
}

/// Load topic queries: one `topic_id query text...` line per topic.
pub fn load_topics(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut topics = BTreeMap::new();
    for (lineno, line) in open_lines(path)?.enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut parts = trimmed.splitn(2, char::is_whitespace);
        let id = parts.next().unwrap().to_string();
        let query = parts
            .next()
            .map(|q| q.trim().to_string())
            .filter(|q| !q.is_empty())
            .ok_or_else(|| {
                parse_error(path, lineno, format!("topic {:?} has no query text", id))
            })?;
        if topics.insert(id.clone(), query).is_some() {
            return Err(parse_error(
                path,
                lineno,
                format!("duplicate topic id {:?}", id),
            ));
        }
    }
    Ok(topics)
}

/// Attach topic queries to loaded qrels. Topics in the query file without
/// qrels are ignored; qrels topics without a query keep an empty query and
/// fail later if simulated.
pub fn set_topic_queries(
    topics: &mut BTreeMap<String, TopicQrels>,
    queries: &BTreeMap<String, String>,
) {
    for (id, topic) in topics.iter_mut() {
        if let Some(query) = queries.get(id) {
            topic.topic_query = query.clone();
        }
    }
}

/// Ordered query reformulations for one topic, as produced offline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryVariantSet {
    pub topic_id: String,
    pub variants: Vec<String>,
}

/// Load query variants from a JSON map `{topic_id: [query, ...]}`.
///
/// Empty variants are dropped with a warning; a topic left with zero
/// variants is an error.
pub fn load_query_variants(
    path: &Path,
) -> Result<(BTreeMap<String, QueryVariantSet>, Vec<String>)> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let raw: BTreeMap<String, Vec<String>> = serde_json::from_reader(BufReader::new(file))?;
    let mut warnings = Vec::new();
    let mut sets = BTreeMap::new();
    for (topic_id, variants) in raw {
        let total = variants.len();
        let kept: Vec<String> = variants
            .into_iter()
            .filter(|v| !v.trim().is_empty())
            .collect();
        if kept.len() < total {
            warnings.push(format!(
                "topic {}: dropped {} empty query variant(s)",
                topic_id,
                total - kept.len()
            ));
        }
        if kept.is_empty() {
            return Err(Error::EmptyVariants(topic_id));
        }
        sets.insert(
            topic_id.clone(),
            QueryVariantSet {
                topic_id,
                variants: kept,
            },
        );
    }
    Ok((sets, warnings))
}

/// Precomputed expansion terms per table (d2q output loaded from disk).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TermSuggestions {
    pub terms: BTreeMap<String, Vec<String>>,
}

impl TermSuggestions {
    /// Table ids referenced here but absent from the corpus, each once.
    pub fn unknown_ids(&self, corpus: &Corpus) -> Vec<String> {
        self.terms
            .keys()
            .filter(|id| !corpus.contains(id))
            .cloned()
            .collect()
    }
}

/// Load term suggestions from a JSON map `{table_id: [term, ...]}`.
/// Terms are whitespace-trimmed; empties are dropped.
pub fn load_term_suggestions(path: &Path) -> Result<TermSuggestions> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let raw: BTreeMap<String, Vec<String>> = serde_json::from_reader(BufReader::new(file))?;
    let terms = raw
        .into_iter()
        .map(|(id, terms)| {
            let cleaned = terms
                .into_iter()
                .map(|t| t.trim().to_string())
                .filter(|t| !t.is_empty())
                .collect();
            (id, cleaned)
        })
        .collect();
    Ok(TermSuggestions { terms })
}
