//! Tokenization, multi-field inverted index, BM25 scoring, and SERP paging.
//!
//! Documents are indexed as a weighted concatenation of their five modality
//! fields: a field weight `w` scales both the term frequencies and the
//! document-length contribution of that field, which for integer weights is
//! exactly equivalent to replicating the field's tokens `w` times.
//!
//! Two idf notions coexist on purpose: [`Lexicon::idf`] is the plain
//! `ln(N/df)` used by the keyword filter, while BM25 scoring uses the usual
//! RSJ-smoothed `ln(1 + (N-df+0.5)/(df+0.5))`.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Modality};
use crate::error::{Error, Result};

const INDEX_FORMAT_VERSION: u32 = 1;

/// Lowercase and split on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Per-modality indexing weights. All weights must be non-negative and at
/// least one positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldWeights {
    pub page_title: f64,
    pub text_before: f64,
    pub text_after: f64,
    pub entities: f64,
    pub table_content: f64,
}

impl Default for FieldWeights {
    fn default() -> Self {
        FieldWeights {
            page_title: 1.0,
            text_before: 1.0,
            text_after: 1.0,
            entities: 1.0,
            table_content: 1.0,
        }
    }
}

impl FieldWeights {
    pub fn get(&self, modality: Modality) -> f64 {
        match modality {
            Modality::PageTitle => self.page_title,
            Modality::TextBefore => self.text_before,
            Modality::TextAfter => self.text_after,
            Modality::Entities => self.entities,
            Modality::TableContent => self.table_content,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = Modality::ALL.map(|m| self.get(m));
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config(
                "field weights must be finite and non-negative".to_string(),
            ));
        }
        if all.iter().all(|w| *w == 0.0) {
            return Err(Error::AllZeroWeights);
        }
        Ok(())
    }
}

/// BM25 free parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// Collection statistics: document frequencies, document counts and lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    n_docs: usize,
    doc_freq: BTreeMap<String, u32>,
    total_len: f64,
    field_len: BTreeMap<Modality, f64>,
}

impl Lexicon {
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// Document frequency; 0 for unseen terms.
    pub fn df(&self, term: &str) -> u32 {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }

    /// Plain idf `ln(N/df)`. Unseen terms get +inf (maximally rare).
    pub fn idf(&self, term: &str) -> f64 {
        let df = self.df(term);
        if df == 0 {
            f64::INFINITY
        } else {
            (self.n_docs as f64 / df as f64).ln()
        }
    }

    pub fn total_len(&self) -> f64 {
        self.total_len
    }

    pub fn field_len(&self, modality: Modality) -> f64 {
        self.field_len.get(&modality).copied().unwrap_or(0.0)
    }

    pub fn avg_doc_len(&self) -> f64 {
        if self.n_docs == 0 {
            0.0
        } else {
            self.total_len / self.n_docs as f64
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, u32)> {
        self.doc_freq.iter().map(|(t, &df)| (t.as_str(), df))
    }
}

/// One postings entry: internal doc number and weighted term frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: f64,
}

/// Immutable multi-field BM25 index.
#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    params: Bm25Params,
    weights: FieldWeights,
    doc_ids: Vec<String>,
    doc_lengths: Vec<f64>,
    postings: BTreeMap<String, Vec<Posting>>,
    lexicon: Lexicon,
    by_id: HashMap<String, u32>,
}

/// Build an index over the whole corpus with the given field weights.
pub fn build_index(corpus: &Corpus, weights: &FieldWeights, params: Bm25Params) -> Result<Index> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    weights.validate()?;

    let mut doc_ids = Vec::with_capacity(corpus.len());
    let mut doc_lengths = Vec::with_capacity(corpus.len());
    let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
    let mut field_len: BTreeMap<Modality, f64> = BTreeMap::new();
    let mut total_len = 0.0;

    for (doc, table) in corpus.iter().enumerate() {
        let doc = doc as u32;
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        let mut doc_len = 0.0;
        for modality in Modality::ALL {
            let w = weights.get(modality);
            if w == 0.0 {
                continue;
            }
            let tokens = tokenize(&table.modality_text(modality));
            let contribution = w * tokens.len() as f64;
            doc_len += contribution;
            *field_len.entry(modality).or_insert(0.0) += contribution;
            for token in tokens {
                *tf.entry(token).or_insert(0.0) += w;
            }
        }
        for (term, tf) in tf {
            postings.entry(term).or_default().push(Posting { doc, tf });
        }
        doc_ids.push(table.id.clone());
        doc_lengths.push(doc_len);
        total_len += doc_len;
    }

    let doc_freq = postings
        .iter()
        .map(|(term, list)| (term.clone(), list.len() as u32))
        .collect();
    let lexicon = Lexicon {
        n_docs: doc_ids.len(),
        doc_freq,
        total_len,
        field_len,
    };
    let by_id = doc_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i as u32))
        .collect();

    Ok(Index {
        params,
        weights: weights.clone(),
        doc_ids,
        doc_lengths,
        postings,
        lexicon,
        by_id,
    })
}

impl Index {
    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn weights(&self) -> &FieldWeights {
        &self.weights
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    /// RSJ-smoothed idf used for BM25 scoring. 0 for unseen terms.
    fn scoring_idf(&self, term: &str) -> f64 {
        let df = self.lexicon.df(term) as f64;
        if df == 0.0 {
            return 0.0;
        }
        let n = self.lexicon.n_docs as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn saturated_tf(&self, tf: f64, doc_len: f64) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let avgdl = self.lexicon.avg_doc_len();
        let norm = if avgdl > 0.0 { doc_len / avgdl } else { 0.0 };
        tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm))
    }

    /// BM25 score of a tokenized query against one document.
    pub fn bm25_score(&self, query_terms: &[String], table_id: &str) -> Result<f64> {
        let &doc = self
            .by_id
            .get(table_id)
            .ok_or_else(|| Error::UnknownTable(table_id.to_string()))?;
        let doc_len = self.doc_lengths[doc as usize];
        let mut score = 0.0;
        for term in query_terms {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let Ok(pos) = list.binary_search_by_key(&doc, |p| p.doc) else {
                continue;
            };
            score += self.scoring_idf(term) * self.saturated_tf(list[pos].tf, doc_len);
        }
        Ok(score)
    }

    /// Top-k retrieval. Ties break by table id ascending; zero-score
    /// documents are excluded. An empty (or fully out-of-vocabulary) query
    /// yields an empty ranking.
    pub fn search(&self, query: &str, k: usize) -> Ranking {
        let terms = tokenize(query);
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for term in &terms {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let idf = self.scoring_idf(term);
            for posting in list {
                let part =
                    idf * self.saturated_tf(posting.tf, self.doc_lengths[posting.doc as usize]);
                *scores.entry(posting.doc).or_insert(0.0) += part;
            }
        }
        let mut entries: Vec<RankedTable> = scores
            .into_iter()
            .filter(|(_, score)| *score > 0.0)
            .map(|(doc, score)| RankedTable {
                table_id: self.doc_ids[doc as usize].clone(),
                score,
            })
            .collect();
        entries.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.table_id.cmp(&b.table_id))
        });
        entries.truncate(k);
        Ranking {
            query: query.to_string(),
            entries,
        }
    }

    /// Persist as a single JSON file with an embedded format version.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let snapshot = IndexFile {
            format_version: INDEX_FORMAT_VERSION,
            params: self.params,
            weights: self.weights.clone(),
            doc_ids: self.doc_ids.clone(),
            doc_lengths: self.doc_lengths.clone(),
            field_len: self.lexicon.field_len.clone(),
            postings: self.postings.clone(),
        };
        serde_json::to_writer(BufWriter::new(file), &snapshot)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Index> {
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let snapshot: IndexFile = serde_json::from_reader(BufReader::new(file))?;
        if snapshot.format_version != INDEX_FORMAT_VERSION {
            return Err(Error::IndexVersion {
                found: snapshot.format_version,
                expected: INDEX_FORMAT_VERSION,
            });
        }
        let doc_freq = snapshot
            .postings
            .iter()
            .map(|(term, list)| (term.clone(), list.len() as u32))
            .collect();
        let total_len = snapshot.doc_lengths.iter().sum();
        let lexicon = Lexicon {
            n_docs: snapshot.doc_ids.len(),
            doc_freq,
            total_len,
            field_len: snapshot.field_len,
        };
        let by_id = snapshot
            .doc_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        Ok(Index {
            params: snapshot.params,
            weights: snapshot.weights,
            doc_ids: snapshot.doc_ids,
            doc_lengths: snapshot.doc_lengths,
            postings: snapshot.postings,
            lexicon,
            by_id,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format_version: u32,
    params: Bm25Params,
    weights: FieldWeights,
    doc_ids: Vec<String>,
    doc_lengths: Vec<f64>,
    field_len: BTreeMap<Modality, f64>,
    postings: BTreeMap<String, Vec<Posting>>,
}

/// One scored retrieval result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTable {
    pub table_id: String,
    pub score: f64,
}

/// A full ranking for one query: sorted by (score desc, table id asc).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub query: String,
    pub entries: Vec<RankedTable>,
}

impl Ranking {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One SERP item: a ranked table plus its snippet (one modality's text).
#[derive(Debug, Clone, PartialEq)]
pub struct SerpItem {
    pub table_id: String,
    /// 1-based rank, globally consecutive across pages.
    pub rank: usize,
    pub snippet: String,
}

/// One result page of at most `page_size` items.
#[derive(Debug, Clone, PartialEq)]
pub struct SerpPage {
    pub page_index: usize,
    pub items: Vec<SerpItem>,
}

/// Slice one 1-indexed page out of a ranking, attaching snippet text from
/// the given modality. Returns `None` past the end of results.
pub fn serp_page(
    ranking: &Ranking,
    corpus: &Corpus,
    snippet_modality: Modality,
    page_index: usize,
    page_size: usize,
) -> Option<SerpPage> {
    assert!(page_index >= 1, "page_index is 1-based");
    assert!(page_size >= 1);
    let start = (page_index - 1) * page_size;
    if start >= ranking.entries.len() {
        return None;
    }
    let end = (start + page_size).min(ranking.entries.len());
    let items = ranking.entries[start..end]
        .iter()
        .enumerate()
        .map(|(offset, entry)| SerpItem {
            table_id: entry.table_id.clone(),
            rank: start + offset + 1,
            snippet: corpus
                .get(&entry.table_id)
                .map(|t| t.modality_text(snippet_modality))
                .unwrap_or_default(),
        })
        .collect();
    Some(SerpPage { page_index, items })
}
