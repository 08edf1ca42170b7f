//! Independent oracles and helpers shared by the integration suites.
//!
//! The scorers here recount statistics from raw token lists and evaluate
//! the formulas with their own loop structure, so they share no code path
//! with the implementations they check.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use tablesim_core::corpus::{Corpus, Table};
use tablesim_core::eval::{sdcg_curve, SdcgParams};
use tablesim_core::querygen::{
    IdfFilter, QuerygenContext, SessionStrategy, StopwordList, StrategyKind, TfIdfSuggester,
};
use tablesim_core::retrieval::{build_index, Bm25Params, FieldWeights, Index};
use tablesim_core::simulator::{
    run_session, session_rng, CostModel, SessionLog, SessionParams, UserProfile,
};
use tablesim_core::synth::{generate, SynthData, SynthSpec};

/// Per-document BM25 scoring from scratch: document frequencies, average
/// length, and the RSJ-smoothed idf are all recomputed from the raw token
/// lists. Returns (doc id, score) sorted by (score desc, id asc) with
/// zero-score documents dropped.
pub fn brute_force_bm25(
    docs: &[(String, Vec<String>)],
    query: &[String],
    k1: f64,
    b: f64,
) -> Vec<(String, f64)> {
    let n = docs.len() as f64;
    let mut total_len = 0.0;
    for (_, tokens) in docs {
        total_len += tokens.len() as f64;
    }
    let avgdl = if docs.is_empty() { 0.0 } else { total_len / n };

    let mut scored: Vec<(String, f64)> = Vec::new();
    for (id, tokens) in docs {
        let dl = tokens.len() as f64;
        let mut score = 0.0;
        for term in query {
            let tf = tokens.iter().filter(|t| *t == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let df = docs
                .iter()
                .filter(|(_, other)| other.iter().any(|t| t == term))
                .count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            let norm = if avgdl > 0.0 { dl / avgdl } else { 0.0 };
            let sat = tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm));
            score += idf * sat;
        }
        if score > 0.0 {
            scored.push((id.clone(), score));
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored
}

/// Session DCG with the opposite loop nesting (rank-major instead of
/// query-major) and explicit discount recomputation.
pub fn brute_force_sdcg(per_query_gains: &[Vec<f64>], doc_base: f64, query_base: f64) -> f64 {
    let max_rank = per_query_gains.iter().map(|g| g.len()).max().unwrap_or(0);
    let mut total = 0.0;
    for rank in 1..=max_rank {
        for (q, gains) in per_query_gains.iter().enumerate() {
            let Some(&gain) = gains.get(rank - 1) else {
                continue;
            };
            let rank_discount = 1.0 + (rank as f64).log(doc_base);
            let query_discount = 1.0 + ((q + 1) as f64).log(query_base);
            total += gain / (rank_discount * query_discount);
        }
    }
    total
}

/// Single-field document corpus from (id, text) pairs.
pub fn title_corpus(docs: &[(String, String)]) -> Corpus {
    let tables = docs
        .iter()
        .map(|(id, text)| Table {
            id: id.clone(),
            page_title: text.clone(),
            ..Table::default()
        })
        .collect();
    Corpus::from_tables(tables).expect("valid test corpus")
}

/// A generated corpus with its index, ready to run in-memory sessions.
pub struct SynthHarness {
    pub data: SynthData,
    pub index: Index,
    pub stopwords: StopwordList,
}

impl SynthHarness {
    pub fn new(spec: &SynthSpec) -> Self {
        let data = generate(spec).expect("synth generation");
        let index = build_index(
            &data.corpus,
            &FieldWeights::default(),
            Bm25Params::default(),
        )
        .expect("index build");
        SynthHarness {
            data,
            index,
            stopwords: StopwordList::builtin(),
        }
    }

    /// One session for one topic. `variant_limit` truncates the static
    /// variant list; `tag` separates RNG streams of different setups.
    #[allow(clippy::too_many_arguments)]
    pub fn run(
        &self,
        topic_id: &str,
        kind: StrategyKind,
        variant_limit: Option<usize>,
        profile: &UserProfile,
        costs: &CostModel,
        seed: u64,
        tag: &str,
    ) -> SessionLog {
        let topic = &self.data.topics[topic_id];
        let suggester = TfIdfSuggester::new(self.index.lexicon(), 10);
        let ctx = QuerygenContext {
            suggester: &suggester,
            lexicon: self.index.lexicon(),
            stopwords: &self.stopwords,
            idf_filter: IdfFilter::default(),
        };
        let mut strategy = match kind {
            StrategyKind::Static => {
                let mut variants = self.data.variants[topic_id].variants.clone();
                if let Some(limit) = variant_limit {
                    variants.truncate(limit);
                }
                SessionStrategy::fixed(&topic.topic_query, variants)
            }
            StrategyKind::D2q => SessionStrategy::knowledge(&topic.topic_query, ctx, false),
            StrategyKind::D2qFeedback => SessionStrategy::knowledge(&topic.topic_query, ctx, true),
        };
        let params = SessionParams {
            index: &self.index,
            corpus: &self.data.corpus,
            retrieval_depth: 100,
            page_size: 10,
        };
        let mut rng = session_rng(seed, topic_id, tag);
        run_session(topic, &params, &mut strategy, profile, costs, &mut rng).expect("session runs")
    }

    pub fn topic_ids(&self) -> Vec<String> {
        self.data.topics.keys().cloned().collect()
    }
}

/// Final query-wise score of a whole session.
pub fn final_sdcg(log: &SessionLog, params: &SdcgParams) -> f64 {
    sdcg_curve(log, params)
        .expect("well-formed log")
        .final_value()
}

/// Every regular file under `root` as (relative path -> bytes).
pub fn collect_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .expect("under root")
                    .to_string_lossy()
                    .replace('\\', "/");
                out.insert(rel, std::fs::read(&path).expect("readable file"));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}
