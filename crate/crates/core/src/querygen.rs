//! Query reformulation strategies.
//!
//! A session issues the topic query first, then reformulates with one of
//! three strategies:
//!
//! - `static`: replay a precomputed variant list until it runs out;
//! - `d2q`: append one term from the knowledge state accumulated over all
//!   seen tables;
//! - `d2q_feedback`: prefer terms from tables the user judged relevant,
//!   falling back to the plain knowledge state when none are left.
//!
//! Expansion terms come from a pluggable per-table suggester and pass a
//! keyword filter that removes stopwords and low-idf (common) terms.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Table, TermSuggestions};
use crate::error::{Error, Result};
use crate::retrieval::{tokenize, Lexicon};

/// English stopword list bundled with the crate.
const BUILTIN_STOPWORDS: &str = include_str!("../assets/stopwords_en.txt");

/// A stopword set plus the content hash it is referenced by in configs.
#[derive(Debug, Clone)]
pub struct StopwordList {
    terms: HashSet<String>,
    sha256: String,
}

impl StopwordList {
    pub fn builtin() -> Self {
        Self::from_text(BUILTIN_STOPWORDS)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from_text(&text))
    }

    fn from_text(text: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        let sha256 = hex_digest(hasher);
        let terms = text
            .lines()
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty())
            .collect();
        StopwordList { terms, sha256 }
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains(term)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Hex SHA-256 of the source text, recorded in experiment manifests.
    pub fn sha256(&self) -> &str {
        &self.sha256
    }
}

fn hex_digest(hasher: Sha256) -> String {
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Which side of the idf threshold survives the keyword filter.
///
/// The filter's prose reading discards common terms (idf below the
/// threshold); the literal formula reading keeps them instead. Both are
/// supported; `DiscardBelow` is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterDirection {
    DiscardBelow,
    KeepBelow,
}

/// Idf-based keyword filter applied to suggested terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdfFilter {
    pub threshold: f64,
    pub direction: FilterDirection,
}

impl Default for IdfFilter {
    fn default() -> Self {
        IdfFilter {
            threshold: 0.5,
            direction: FilterDirection::DiscardBelow,
        }
    }
}

impl IdfFilter {
    pub fn keeps(&self, idf: f64) -> bool {
        match self.direction {
            FilterDirection::DiscardBelow => idf >= self.threshold,
            FilterDirection::KeepBelow => idf < self.threshold,
        }
    }
}

/// Pluggable per-table expansion-term source. Must be deterministic.
pub trait TermSuggester: Sync {
    fn suggest(&self, table: &Table) -> BTreeSet<String>;
}

/// File-backed suggestions (precomputed d2q output). Tables without an
/// entry yield the empty set.
pub struct FileSuggester<'a> {
    suggestions: &'a TermSuggestions,
}

impl<'a> FileSuggester<'a> {
    pub fn new(suggestions: &'a TermSuggestions) -> Self {
        FileSuggester { suggestions }
    }
}

impl TermSuggester for FileSuggester<'_> {
    fn suggest(&self, table: &Table) -> BTreeSet<String> {
        self.suggestions
            .terms
            .get(&table.id)
            .map(|terms| terms.iter().map(|t| t.to_lowercase()).collect())
            .unwrap_or_default()
    }
}

/// Built-in fallback: the table's top-m terms by tf-idf over all its
/// modality fields. Terms absent from the lexicon are skipped.
pub struct TfIdfSuggester<'a> {
    lexicon: &'a Lexicon,
    top_m: usize,
}

impl<'a> TfIdfSuggester<'a> {
    pub fn new(lexicon: &'a Lexicon, top_m: usize) -> Self {
        TfIdfSuggester { lexicon, top_m }
    }
}

impl TermSuggester for TfIdfSuggester<'_> {
    fn suggest(&self, table: &Table) -> BTreeSet<String> {
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        for modality in crate::corpus::Modality::ALL {
            for token in tokenize(&table.modality_text(modality)) {
                *tf.entry(token).or_insert(0.0) += 1.0;
            }
        }
        let mut scored: Vec<(String, f64)> = tf
            .into_iter()
            .filter(|(term, _)| self.lexicon.df(term) > 0)
            .map(|(term, tf)| {
                let score = tf * self.lexicon.idf(&term);
                (term, score)
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(self.top_m);
        scored.into_iter().map(|(term, _)| term).collect()
    }
}

/// Suggested terms for a set of tables, with stopwords and filtered-idf
/// terms removed.
pub fn extract_keywords<'t>(
    tables: impl IntoIterator<Item = &'t Table>,
    suggester: &dyn TermSuggester,
    lexicon: &Lexicon,
    stopwords: &StopwordList,
    filter: IdfFilter,
) -> BTreeSet<String> {
    let mut keywords = BTreeSet::new();
    for table in tables {
        for term in suggester.suggest(table) {
            if stopwords.contains(&term) {
                continue;
            }
            if !filter.keeps(lexicon.idf(&term)) {
                continue;
            }
            keywords.insert(term);
        }
    }
    keywords
}

/// The simulated user's accumulated expansion-term sets for one topic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeState {
    base_query: String,
    base_terms: Vec<String>,
    base_set: BTreeSet<String>,
    all_terms: BTreeSet<String>,
    rel_terms: BTreeSet<String>,
    used_terms: BTreeSet<String>,
}

impl KnowledgeState {
    pub fn new(base_query: &str) -> Self {
        let base_terms = tokenize(base_query);
        let base_set = base_terms.iter().cloned().collect();
        KnowledgeState {
            base_query: base_query.to_string(),
            base_terms,
            base_set,
            all_terms: BTreeSet::new(),
            rel_terms: BTreeSet::new(),
            used_terms: BTreeSet::new(),
        }
    }

    pub fn base_query(&self) -> &str {
        &self.base_query
    }

    pub fn all_terms(&self) -> &BTreeSet<String> {
        &self.all_terms
    }

    pub fn rel_terms(&self) -> &BTreeSet<String> {
        &self.rel_terms
    }

    pub fn used_terms(&self) -> &BTreeSet<String> {
        &self.used_terms
    }

    /// Fold freshly extracted keywords into the state. `rel_keywords` must
    /// come from a subset of the tables behind `seen_keywords`; the union
    /// keeps `rel_terms ⊆ all_terms` either way.
    pub fn absorb(&mut self, seen_keywords: BTreeSet<String>, rel_keywords: BTreeSet<String>) {
        self.all_terms.extend(seen_keywords);
        self.all_terms.extend(rel_keywords.iter().cloned());
        self.rel_terms.extend(rel_keywords);
    }

    fn expanded_query(&self, term: &str) -> String {
        let mut parts = self.base_terms.clone();
        parts.push(term.to_string());
        parts.join(" ")
    }

    /// Pick the unused candidate with the highest plain idf, ties broken
    /// lexicographically ascending. Terms already in the base query are
    /// never candidates.
    fn select_from<'s>(
        &self,
        pool: impl Iterator<Item = &'s String>,
        lexicon: &Lexicon,
    ) -> Option<String> {
        let mut best: Option<(&str, f64)> = None;
        for term in pool {
            if self.used_terms.contains(term) || self.base_set.contains(term) {
                continue;
            }
            let idf = lexicon.idf(term);
            match best {
                // Ascending iteration order makes ">" keep the first
                // (lexicographically smallest) term of each idf class.
                Some((_, best_idf)) if idf <= best_idf => {}
                _ => best = Some((term, idf)),
            }
        }
        best.map(|(term, _)| term.to_string())
    }
}

/// Next query from the full knowledge state, or `None` when exhausted.
pub fn next_query_knowledge(ks: &mut KnowledgeState, lexicon: &Lexicon) -> Option<String> {
    let term = ks.select_from(ks.all_terms.iter(), lexicon)?;
    ks.used_terms.insert(term.clone());
    Some(ks.expanded_query(&term))
}

/// Next query preferring terms from relevance-judged tables; falls back to
/// the full knowledge state when no relevant candidate is left.
pub fn next_query_feedback(ks: &mut KnowledgeState, lexicon: &Lexicon) -> Option<String> {
    if let Some(term) = ks.select_from(ks.rel_terms.iter(), lexicon) {
        ks.used_terms.insert(term.clone());
        return Some(ks.expanded_query(&term));
    }
    next_query_knowledge(ks, lexicon)
}

/// The i-th precomputed variant, or `None` once the list is exhausted.
pub fn next_query_static(variants: &[String], issued: usize) -> Option<String> {
    variants.get(issued).cloned()
}

/// Strategy selector as it appears in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Static,
    D2q,
    D2qFeedback,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Static => "static",
            StrategyKind::D2q => "d2q",
            StrategyKind::D2qFeedback => "d2q_feedback",
        }
    }
}

/// Everything the d2q strategies need besides their own state.
#[derive(Clone, Copy)]
pub struct QuerygenContext<'a> {
    pub suggester: &'a dyn TermSuggester,
    pub lexicon: &'a Lexicon,
    pub stopwords: &'a StopwordList,
    pub idf_filter: IdfFilter,
}

/// Per-session strategy state machine: yields the topic query first, then
/// one reformulation per call until exhausted.
pub struct SessionStrategy<'a> {
    kind: StrategyKind,
    ks: KnowledgeState,
    variants: Vec<String>,
    consumed_variants: usize,
    issued_initial: bool,
    ctx: Option<QuerygenContext<'a>>,
}

impl<'a> SessionStrategy<'a> {
    pub fn fixed(base_query: &str, variants: Vec<String>) -> Self {
        SessionStrategy {
            kind: StrategyKind::Static,
            ks: KnowledgeState::new(base_query),
            variants,
            consumed_variants: 0,
            issued_initial: false,
            ctx: None,
        }
    }

    pub fn knowledge(base_query: &str, ctx: QuerygenContext<'a>, feedback: bool) -> Self {
        SessionStrategy {
            kind: if feedback {
                StrategyKind::D2qFeedback
            } else {
                StrategyKind::D2q
            },
            ks: KnowledgeState::new(base_query),
            variants: Vec::new(),
            consumed_variants: 0,
            issued_initial: false,
            ctx: Some(ctx),
        }
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    pub fn knowledge_state(&self) -> &KnowledgeState {
        &self.ks
    }

    /// Next query to issue, or `None` when the strategy is exhausted.
    pub fn next_query(&mut self) -> Option<String> {
        if !self.issued_initial {
            self.issued_initial = true;
            return Some(self.ks.base_query().to_string());
        }
        match self.kind {
            StrategyKind::Static => {
                let query = next_query_static(&self.variants, self.consumed_variants)?;
                self.consumed_variants += 1;
                Some(query)
            }
            StrategyKind::D2q => {
                let ctx = self.ctx.as_ref().expect("d2q strategy requires a context");
                next_query_knowledge(&mut self.ks, ctx.lexicon)
            }
            StrategyKind::D2qFeedback => {
                let ctx = self.ctx.as_ref().expect("d2q strategy requires a context");
                next_query_feedback(&mut self.ks, ctx.lexicon)
            }
        }
    }

    /// Feed one query iteration's outcome into the knowledge state.
    /// `relevant` must be a subset of `seen`. No-op for the static strategy.
    pub fn observe(&mut self, seen: &[&Table], relevant: &[&Table]) {
        let Some(ctx) = self.ctx.as_ref() else {
            return;
        };
        let seen_keywords = extract_keywords(
            seen.iter().copied(),
            ctx.suggester,
            ctx.lexicon,
            ctx.stopwords,
            ctx.idf_filter,
        );
        let rel_keywords = extract_keywords(
            relevant.iter().copied(),
            ctx.suggester,
            ctx.lexicon,
            ctx.stopwords,
            ctx.idf_filter,
        );
        self.ks.absorb(seen_keywords, rel_keywords);
    }
}
