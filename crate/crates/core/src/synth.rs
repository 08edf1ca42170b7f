//! Synthetic desk-scale corpora with controlled relevance structure.
//!
//! Each topic gets a two-term base query, a set of relevant tables sharing
//! an injected signature vocabulary, and non-relevant "confuser" tables
//! that match the base query but carry distractor terms instead. A few
//! "easy" relevant tables are reachable directly from the base query;
//! the "hidden" ones match it only weakly and are found through signature
//! terms, which is what separates feedback-driven reformulation from
//! replaying canned variants. Modality relevance labels are noisy copies
//! of the table labels (independent flips per modality).
//!
//! Layout per topic: 3 easy relevant, 7 hidden relevant, 5 confusers
//! (2 carrying high-idf distractors, 3 carrying mid-idf ones), plus a pool
//! of background tables shared across topics. The defaults give
//! 30 * 15 + 50 = 500 tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    save_corpus, Corpus, Modality, QueryVariantSet, Table, TableContent, TopicQrels,
};
use crate::error::{Error, Result};

pub const EASY_PER_TOPIC: usize = 3;
pub const HIDDEN_PER_TOPIC: usize = 7;
pub const CONFUSERS_PER_TOPIC: usize = 5;
pub const SIGNATURES_PER_TOPIC: usize = 8;
const FILLER_WORDS: usize = 8;
const HIGH_DISTRACTORS: usize = 8;
const MID_DISTRACTORS: usize = 8;

/// Generation parameters.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub num_topics: usize,
    pub background_tables: usize,
    /// Per-modality probability of flipping the table's relevance label.
    pub modality_flip: f64,
    pub variants_per_topic: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            num_topics: 30,
            background_tables: 50,
            modality_flip: 0.2,
            variants_per_topic: 100,
            seed: 17,
        }
    }
}

/// A generated corpus with its qrels and static query variants.
pub struct SynthData {
    pub corpus: Corpus,
    pub topics: BTreeMap<String, TopicQrels>,
    pub variants: BTreeMap<String, QueryVariantSet>,
}

fn topic_id(t: usize) -> String {
    format!("T{:02}", t + 1)
}

fn base_terms(t: usize) -> (String, String) {
    (format!("subject{t:02}"), format!("theme{t:02}"))
}

fn signature(t: usize, j: usize) -> String {
    format!("sig{t:02}x{j}")
}

fn filler(k: usize) -> String {
    format!("common{}", k % FILLER_WORDS)
}

fn high_distractor(k: usize) -> String {
    format!("quirk{}", k % HIGH_DISTRACTORS)
}

fn mid_distractor(k: usize) -> String {
    format!("motif{}", k % MID_DISTRACTORS)
}

fn filler_content(salt: usize) -> TableContent {
    let headers: Vec<String> = (0..3).map(|k| filler(salt + k)).collect();
    let rows = vec![(0..3).map(|k| filler(salt + k + 3)).collect()];
    TableContent { headers, rows }
}

fn all_signatures(t: usize) -> String {
    (0..SIGNATURES_PER_TOPIC)
        .map(|j| signature(t, j))
        .collect::<Vec<_>>()
        .join(" ")
}

fn easy_table(t: usize, r: usize) -> Table {
    let (base0, base1) = base_terms(t);
    Table {
        id: format!("{}-easy{r}", topic_id(t)),
        page_title: format!("{base0} {base1}"),
        text_before: all_signatures(t),
        text_after: format!("{base0} {base1}"),
        entities: vec![
            signature(t, r % SIGNATURES_PER_TOPIC),
            signature(t, (r + 1) % SIGNATURES_PER_TOPIC),
        ],
        table: filler_content(t + r),
    }
}

fn hidden_table(t: usize, r: usize) -> Table {
    let (base0, base1) = base_terms(t);
    Table {
        id: format!("{}-hidden{r}", topic_id(t)),
        page_title: format!(
            "{} {}",
            signature(t, r % SIGNATURES_PER_TOPIC),
            signature(t, (r + 2) % SIGNATURES_PER_TOPIC)
        ),
        text_before: all_signatures(t),
        text_after: format!("{base0} {base1}"),
        entities: vec![signature(t, (r + 4) % SIGNATURES_PER_TOPIC)],
        table: filler_content(t + r + 1),
    }
}

fn confuser_table(t: usize, c: usize) -> Table {
    let (base0, base1) = base_terms(t);
    // The first two confusers carry rare (high-idf) distractors, the rest
    // mid-idf ones; knowledge-state selection burns through the rare pool
    // before it reaches the signature terms.
    let distractor = if c < 2 {
        high_distractor(2 * t + c)
    } else {
        mid_distractor(3 * t + c)
    };
    // Filler padding keeps confusers from outranking the longer easy
    // tables purely through BM25 length normalization.
    let padding: Vec<String> = (0..4).map(|k| filler(t + c + k)).collect();
    Table {
        id: format!("{}-conf{c}", topic_id(t)),
        page_title: format!("{base0} {base1}"),
        text_before: format!("{distractor} {distractor}"),
        text_after: format!("{base0} {}", padding.join(" ")),
        entities: vec![],
        table: filler_content(t + c + 2),
    }
}

fn background_table(g: usize, num_topics: usize) -> Table {
    let (base0, _) = base_terms(g % num_topics);
    let text_after = if g.is_multiple_of(2) {
        base0
    } else {
        filler(g + 4)
    };
    Table {
        id: format!("bg{g:03}"),
        page_title: format!("{} {} {}", filler(g), filler(g + 1), filler(g + 2)),
        text_before: filler(g + 3),
        text_after,
        entities: vec![],
        table: filler_content(g),
    }
}

/// Generate a corpus, qrels, and variant lists from the parameters.
pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    if spec.num_topics == 0 {
        return Err(Error::Config("num_topics must be >= 1".to_string()));
    }
    if !(0.0..=1.0).contains(&spec.modality_flip) {
        return Err(Error::Config("modality_flip must be in [0,1]".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut tables = Vec::new();
    let mut topics = BTreeMap::new();
    let mut variants = BTreeMap::new();

    for t in 0..spec.num_topics {
        let tid = topic_id(t);
        let (base0, base1) = base_terms(t);
        let mut qrels = TopicQrels {
            topic_id: tid.clone(),
            topic_query: format!("{base0} {base1}"),
            ..TopicQrels::default()
        };

        let mut graded: Vec<(Table, u32)> = Vec::new();
        for r in 0..EASY_PER_TOPIC {
            graded.push((easy_table(t, r), (r % 3) as u32 + 1));
        }
        for r in 0..HIDDEN_PER_TOPIC {
            graded.push((hidden_table(t, r), (r % 3) as u32 + 1));
        }
        for c in 0..CONFUSERS_PER_TOPIC {
            graded.push((confuser_table(t, c), 0));
        }
        for (table, grade) in graded {
            qrels.table_grades.insert(table.id.clone(), grade);
            for modality in Modality::ALL {
                let truth = grade > 0;
                let label = if rng.gen::<f64>() < spec.modality_flip {
                    !truth
                } else {
                    truth
                };
                qrels
                    .modality_rel
                    .insert((table.id.clone(), modality), label);
            }
            tables.push(table);
        }

        // Static variants: signature pairs of other topics — topically
        // plausible noise that never hits this topic's relevant tables.
        let mut topic_variants = Vec::with_capacity(spec.variants_per_topic);
        for _ in 0..spec.variants_per_topic {
            let other = if spec.num_topics > 1 {
                let mut u = rng.gen_range(0..spec.num_topics);
                if u == t {
                    u = (u + 1) % spec.num_topics;
                }
                u
            } else {
                t
            };
            let j = rng.gen_range(0..SIGNATURES_PER_TOPIC);
            let k = rng.gen_range(0..SIGNATURES_PER_TOPIC);
            topic_variants.push(format!("{} {}", signature(other, j), signature(other, k)));
        }
        variants.insert(
            tid.clone(),
            QueryVariantSet {
                topic_id: tid.clone(),
                variants: topic_variants,
            },
        );
        topics.insert(tid, qrels);
    }

    for g in 0..spec.background_tables {
        tables.push(background_table(g, spec.num_topics));
    }

    Ok(SynthData {
        corpus: Corpus::from_tables(tables)?,
        topics,
        variants,
    })
}

/// Input files written by [`write_files`], ready for an [`crate::experiment::ExperimentConfig`].
pub struct SynthPaths {
    pub corpus: PathBuf,
    pub topics: PathBuf,
    pub table_qrels: PathBuf,
    pub modality_qrels: PathBuf,
    pub query_variants: PathBuf,
}

/// Write the generated data in the standard input formats.
pub fn write_files(data: &SynthData, dir: &Path) -> Result<SynthPaths> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let paths = SynthPaths {
        corpus: dir.join("corpus.jsonl"),
        topics: dir.join("topics.txt"),
        table_qrels: dir.join("qrels_table.txt"),
        modality_qrels: dir.join("qrels_modality.txt"),
        query_variants: dir.join("variants.json"),
    };

    save_corpus(&data.corpus, &paths.corpus)?;

    let mut topics_text = String::new();
    let mut table_qrels = String::new();
    let mut modality_qrels = String::new();
    for (tid, qrels) in &data.topics {
        topics_text.push_str(&format!("{tid} {}\n", qrels.topic_query));
        for (table_id, grade) in &qrels.table_grades {
            table_qrels.push_str(&format!("{tid} {table_id} {grade}\n"));
        }
        for ((table_id, modality), label) in &qrels.modality_rel {
            modality_qrels.push_str(&format!(
                "{tid} {table_id} {modality} {}\n",
                if *label { 1 } else { 0 }
            ));
        }
    }
    write_text(&paths.topics, &topics_text)?;
    write_text(&paths.table_qrels, &table_qrels)?;
    write_text(&paths.modality_qrels, &modality_qrels)?;

    let variant_map: BTreeMap<&String, &Vec<String>> = data
        .variants
        .iter()
        .map(|(tid, set)| (tid, &set.variants))
        .collect();
    write_text(
        &paths.query_variants,
        &(serde_json::to_string_pretty(&variant_map)? + "\n"),
    )?;

    Ok(paths)
}

fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
