//! End-to-end experiment orchestration.
//!
//! One JSON config describes the inputs, the retrieval setup, one query
//! strategy, and a grid of user profiles (click models x click-probability
//! pairs x snippet modalities x browsing depths). A sweep runs every
//! (topic x cell) session, writes one log file per session, per-cell mean
//! curve CSVs, and a manifest with content hashes.
//!
//! Outputs are deterministic: cell ids are content hashes of the cell
//! config, session RNGs derive from (seed, topic, cell id), and files are
//! written in sorted order after all parallel work has finished, so reruns
//! and different parallelism degrees produce byte-identical directories.
//! A cell whose outputs already exist is skipped, which makes selective
//! regeneration cheap.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{self, Corpus, Modality, QueryVariantSet, TermSuggestions, TopicQrels};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate_curves, sdcg_curve, time_gain_curve, write_curve_csv, CurveStat, SdcgParams,
};
use crate::querygen::{
    FileSuggester, IdfFilter, QuerygenContext, SessionStrategy, StopwordList, StrategyKind,
    TermSuggester, TfIdfSuggester,
};
use crate::retrieval::{build_index, Bm25Params, FieldWeights, Index};
use crate::simulator::{
    run_session, session_rng, ClickModel, CostModel, KnowledgeSource, LogHeader, SessionLog,
    SessionParams, UserProfile,
};

const MANIFEST_FORMAT_VERSION: u32 = 1;

/// Input file locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputPaths {
    pub corpus: PathBuf,
    pub topics: PathBuf,
    pub table_qrels: PathBuf,
    pub modality_qrels: PathBuf,
    #[serde(default)]
    pub query_variants: Option<PathBuf>,
    #[serde(default)]
    pub term_suggestions: Option<PathBuf>,
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
}

/// The swept profile axes; cells are their full cross-product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridAxes {
    pub click_models: Vec<ClickModel>,
    /// (p_click_rel, p_click_nonrel) pairs.
    pub p_click: Vec<(f64, f64)>,
    pub modalities: Vec<Modality>,
    pub depths: Vec<usize>,
}

impl Default for GridAxes {
    fn default() -> Self {
        GridAxes {
            click_models: vec![ClickModel::ModalityDeterministic],
            p_click: vec![(1.0, 0.0)],
            modalities: vec![Modality::PageTitle],
            depths: vec![10],
        }
    }
}

/// Profile fields shared by every grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileBase {
    pub judge_accuracy: f64,
    pub max_queries: usize,
    pub time_budget: Option<f64>,
    pub knowledge_source: KnowledgeSource,
}

impl Default for ProfileBase {
    fn default() -> Self {
        ProfileBase {
            judge_accuracy: 1.0,
            max_queries: 10,
            time_budget: None,
            knowledge_source: KnowledgeSource::Examined,
        }
    }
}

/// Full experiment description, loadable from a single JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub inputs: InputPaths,
    pub strategy: StrategyKind,
    pub seed: u64,
    pub output: PathBuf,
    #[serde(default)]
    pub field_weights: FieldWeights,
    #[serde(default)]
    pub bm25: Bm25Params,
    #[serde(default = "default_retrieval_depth")]
    pub retrieval_depth: usize,
    #[serde(default = "default_page_size")]
    pub page_size: usize,
    #[serde(default = "default_top_m")]
    pub suggester_top_m: usize,
    #[serde(default)]
    pub idf_filter: IdfFilter,
    #[serde(default)]
    pub grid: GridAxes,
    #[serde(default)]
    pub profile: ProfileBase,
    #[serde(default)]
    pub costs: CostModel,
    #[serde(default)]
    pub sdcg: SdcgParams,
    #[serde(default = "default_time_step")]
    pub time_checkpoint_step: f64,
}

fn default_retrieval_depth() -> usize {
    100
}

fn default_page_size() -> usize {
    10
}

fn default_top_m() -> usize {
    10
}

fn default_time_step() -> f64 {
    10.0
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_value(value)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.retrieval_depth < 1 {
            return Err(Error::Config("retrieval_depth must be >= 1".to_string()));
        }
        if self.page_size < 1 {
            return Err(Error::Config("page_size must be >= 1".to_string()));
        }
        if self.suggester_top_m < 1 {
            return Err(Error::Config("suggester_top_m must be >= 1".to_string()));
        }
        if !self.time_checkpoint_step.is_finite() || self.time_checkpoint_step <= 0.0 {
            return Err(Error::Config(
                "time_checkpoint_step must be > 0".to_string(),
            ));
        }
        self.field_weights.validate()?;
        self.costs.validate()?;
        self.sdcg.validate()?;
        if self.grid.click_models.is_empty()
            || self.grid.p_click.is_empty()
            || self.grid.modalities.is_empty()
            || self.grid.depths.is_empty()
        {
            return Err(Error::Config(
                "every grid axis needs at least one entry".to_string(),
            ));
        }
        if self.strategy == StrategyKind::Static && self.inputs.query_variants.is_none() {
            return Err(Error::Config(
                "the static strategy requires inputs.query_variants".to_string(),
            ));
        }
        Ok(())
    }
}

/// One fully resolved grid cell. Its canonical JSON serialization is the
/// content behind the cell's config id, so every field that can change a
/// session or a curve belongs here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    pub strategy: StrategyKind,
    pub click_model: ClickModel,
    pub p_click_rel: f64,
    pub p_click_nonrel: f64,
    pub snippet_modality: Modality,
    pub judge_accuracy: f64,
    pub browsing_depth: usize,
    pub max_queries: usize,
    pub time_budget: Option<f64>,
    pub knowledge_source: KnowledgeSource,
    pub field_weights: FieldWeights,
    pub bm25: Bm25Params,
    pub retrieval_depth: usize,
    pub page_size: usize,
    pub idf_filter: IdfFilter,
    pub suggester: String,
    pub suggester_top_m: usize,
    pub stopwords_sha256: String,
    pub costs: CostModel,
    pub sdcg: SdcgParams,
    pub time_checkpoint_step: f64,
}

impl CellConfig {
    pub fn profile(&self) -> UserProfile {
        UserProfile {
            click_model: self.click_model,
            snippet_modality: self.snippet_modality,
            p_click_rel: self.p_click_rel,
            p_click_nonrel: self.p_click_nonrel,
            judge_accuracy: self.judge_accuracy,
            browsing_depth: self.browsing_depth,
            max_queries: self.max_queries,
            time_budget: self.time_budget,
            knowledge_source: self.knowledge_source,
        }
    }

    /// Stable cell id: hex SHA-256 prefix of the canonical serialization.
    pub fn config_id(&self) -> String {
        let canonical = serde_json::to_string(self).expect("cell config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Expand the grid axes into resolved cells (cross-product, axis order:
/// click model, p_click pair, modality, depth).
pub fn expand_grid(
    config: &ExperimentConfig,
    stopwords_sha256: &str,
    suggester: &str,
) -> Result<Vec<CellConfig>> {
    let mut cells = Vec::new();
    for &click_model in &config.grid.click_models {
        for &(p_rel, p_nonrel) in &config.grid.p_click {
            for &modality in &config.grid.modalities {
                for &depth in &config.grid.depths {
                    let cell = CellConfig {
                        strategy: config.strategy,
                        click_model,
                        p_click_rel: p_rel,
                        p_click_nonrel: p_nonrel,
                        snippet_modality: modality,
                        judge_accuracy: config.profile.judge_accuracy,
                        browsing_depth: depth,
                        max_queries: config.profile.max_queries,
                        time_budget: config.profile.time_budget,
                        knowledge_source: config.profile.knowledge_source,
                        field_weights: config.field_weights.clone(),
                        bm25: config.bm25,
                        retrieval_depth: config.retrieval_depth,
                        page_size: config.page_size,
                        idf_filter: config.idf_filter,
                        suggester: suggester.to_string(),
                        suggester_top_m: config.suggester_top_m,
                        stopwords_sha256: stopwords_sha256.to_string(),
                        costs: config.costs.clone(),
                        sdcg: config.sdcg,
                        time_checkpoint_step: config.time_checkpoint_step,
                    };
                    cell.profile().validate()?;
                    cells.push(cell);
                }
            }
        }
    }
    let mut ids: Vec<String> = cells.iter().map(|c| c.config_id()).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != cells.len() {
        return Err(Error::Config(
            "grid axes produce duplicate cells; remove repeated axis values".to_string(),
        ));
    }
    Ok(cells)
}

/// All loaded, validated inputs of an experiment.
pub struct ExperimentData {
    pub corpus: Corpus,
    pub topics: BTreeMap<String, TopicQrels>,
    pub variants: BTreeMap<String, QueryVariantSet>,
    pub suggestions: Option<TermSuggestions>,
    pub stopwords: StopwordList,
    pub index: Index,
    pub warnings: Vec<String>,
}

/// Load and cross-check every input file, then build the index.
pub fn load_inputs(config: &ExperimentConfig) -> Result<ExperimentData> {
    let mut warnings = Vec::new();

    let corpus = corpus::load_corpus(&config.inputs.corpus)?;
    log::info!(
        "loaded {} tables from {}",
        corpus.len(),
        config.inputs.corpus.display()
    );
    let mut topics = corpus::load_qrels(&config.inputs.table_qrels, &config.inputs.modality_qrels)?;
    warnings.extend(corpus::flag_unpooled(&mut topics, &corpus));
    let queries = corpus::load_topics(&config.inputs.topics)?;
    corpus::set_topic_queries(&mut topics, &queries);

    let variants = match &config.inputs.query_variants {
        Some(path) => {
            let (sets, vw) = corpus::load_query_variants(path)?;
            warnings.extend(vw);
            if config.strategy == StrategyKind::Static {
                for topic_id in topics.keys() {
                    if !sets.contains_key(topic_id) {
                        warnings.push(format!(
                            "topic {topic_id}: no query variants; the session will stop after the initial query"
                        ));
                    }
                }
            }
            sets
        }
        None => BTreeMap::new(),
    };

    let suggestions = match &config.inputs.term_suggestions {
        Some(path) => {
            let suggestions = corpus::load_term_suggestions(path)?;
            for id in suggestions.unknown_ids(&corpus) {
                warnings.push(format!(
                    "term suggestions reference table {id:?} which is not in the corpus"
                ));
            }
            Some(suggestions)
        }
        None => None,
    };

    let stopwords = match &config.inputs.stopwords {
        Some(path) => StopwordList::from_file(path)?,
        None => StopwordList::builtin(),
    };

    let index = build_index(&corpus, &config.field_weights, config.bm25)?;

    Ok(ExperimentData {
        corpus,
        topics,
        variants,
        suggestions,
        stopwords,
        index,
        warnings,
    })
}

/// Either suggester behind one trait object.
pub enum AnySuggester<'a> {
    File(FileSuggester<'a>),
    TfIdf(TfIdfSuggester<'a>),
}

impl AnySuggester<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            AnySuggester::File(_) => "file",
            AnySuggester::TfIdf(_) => "tf_idf",
        }
    }
}

impl TermSuggester for AnySuggester<'_> {
    fn suggest(&self, table: &crate::corpus::Table) -> std::collections::BTreeSet<String> {
        match self {
            AnySuggester::File(s) => s.suggest(table),
            AnySuggester::TfIdf(s) => s.suggest(table),
        }
    }
}

/// File-backed suggestions when provided, tf-idf fallback otherwise.
pub fn make_suggester<'a>(data: &'a ExperimentData, config: &ExperimentConfig) -> AnySuggester<'a> {
    match &data.suggestions {
        Some(suggestions) => AnySuggester::File(FileSuggester::new(suggestions)),
        None => AnySuggester::TfIdf(TfIdfSuggester::new(
            data.index.lexicon(),
            config.suggester_top_m,
        )),
    }
}

/// Build the per-session strategy for one topic.
pub fn build_strategy<'a>(
    data: &'a ExperimentData,
    config: &ExperimentConfig,
    suggester: &'a AnySuggester<'a>,
    topic: &TopicQrels,
) -> SessionStrategy<'a> {
    match config.strategy {
        StrategyKind::Static => {
            let variants = data
                .variants
                .get(&topic.topic_id)
                .map(|set| set.variants.clone())
                .unwrap_or_default();
            SessionStrategy::fixed(&topic.topic_query, variants)
        }
        StrategyKind::D2q | StrategyKind::D2qFeedback => {
            let ctx = QuerygenContext {
                suggester,
                lexicon: data.index.lexicon(),
                stopwords: &data.stopwords,
                idf_filter: config.idf_filter,
            };
            SessionStrategy::knowledge(
                &topic.topic_query,
                ctx,
                config.strategy == StrategyKind::D2qFeedback,
            )
        }
    }
}

/// Run one (topic, cell) session with the derived per-session RNG.
pub fn run_topic_session(
    data: &ExperimentData,
    config: &ExperimentConfig,
    suggester: &AnySuggester<'_>,
    cell: &CellConfig,
    config_id: &str,
    topic: &TopicQrels,
) -> Result<SessionLog> {
    let params = SessionParams {
        index: &data.index,
        corpus: &data.corpus,
        retrieval_depth: config.retrieval_depth,
        page_size: config.page_size,
    };
    let mut strategy = build_strategy(data, config, suggester, topic);
    let mut rng = session_rng(config.seed, &topic.topic_id, config_id);
    run_session(
        topic,
        &params,
        &mut strategy,
        &cell.profile(),
        &config.costs,
        &mut rng,
    )
}

fn sanitize_topic_filename(topic_id: &str) -> String {
    topic_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Query-index checkpoints 1..=max_queries.
pub fn sdcg_checkpoints(max_queries: usize) -> Vec<f64> {
    (1..=max_queries).map(|q| q as f64).collect()
}

/// Time checkpoints 0..=horizon in fixed steps; the horizon covers the
/// budget (when set) and the longest observed session.
pub fn time_checkpoints(step: f64, budget: Option<f64>, max_elapsed: f64) -> Vec<f64> {
    let horizon = budget.map_or(max_elapsed, |b| b.max(max_elapsed));
    let n = if horizon <= 0.0 {
        0
    } else {
        (horizon / step).ceil() as usize
    };
    (0..=n).map(|i| i as f64 * step).collect()
}

struct CellOutput {
    config_id: String,
    cell_json: String,
    /// (sanitized topic filename, log JSONL) sorted by topic id.
    logs: Vec<(String, String)>,
    sdcg_stats: Vec<CurveStat>,
    time_stats: Vec<CurveStat>,
}

fn run_cell(
    data: &ExperimentData,
    config: &ExperimentConfig,
    suggester: &AnySuggester<'_>,
    cell: &CellConfig,
) -> Result<CellOutput> {
    let config_id = cell.config_id();
    let topic_ids: Vec<&String> = data.topics.keys().collect();

    let session_results: Result<Vec<(String, SessionLog)>> = topic_ids
        .par_iter()
        .map(|topic_id| {
            let topic = &data.topics[*topic_id];
            let log = run_topic_session(data, config, suggester, cell, &config_id, topic).map_err(
                |e| match e {
                    e @ (Error::TopicWithoutQrels(_) | Error::TopicWithoutQuery(_)) => e,
                    other => Error::Session {
                        topic: (*topic_id).clone(),
                        message: other.to_string(),
                    },
                },
            )?;
            Ok(((*topic_id).clone(), log))
        })
        .collect();
    let sessions = session_results?;

    let mut logs = Vec::with_capacity(sessions.len());
    let mut sdcg_curves = Vec::with_capacity(sessions.len());
    let mut time_curves = Vec::with_capacity(sessions.len());
    let mut max_elapsed = 0.0f64;
    for (topic_id, log) in &sessions {
        let header = LogHeader {
            topic_id: topic_id.clone(),
            config_id: config_id.clone(),
            seed: config.seed,
            strategy: config.strategy,
            profile: cell.profile(),
            costs: config.costs.clone(),
        };
        logs.push((sanitize_topic_filename(topic_id), log.to_jsonl(&header)?));
        sdcg_curves.push(sdcg_curve(log, &config.sdcg)?);
        time_curves.push(time_gain_curve(log)?);
        if let Some(last) = log.actions.last() {
            max_elapsed = max_elapsed.max(last.t);
        }
    }

    let sdcg_stats = aggregate_curves(&sdcg_curves, &sdcg_checkpoints(cell.max_queries))?;
    let time_stats = aggregate_curves(
        &time_curves,
        &time_checkpoints(cell.time_checkpoint_step, cell.time_budget, max_elapsed),
    )?;

    let cell_json = serde_json::to_string_pretty(&serde_json::json!({
        "config_id": config_id,
        "cell": cell,
    }))? + "\n";

    Ok(CellOutput {
        config_id,
        cell_json,
        logs,
        sdcg_stats,
        time_stats,
    })
}

/// What a sweep produced (or found already present).
pub struct ExperimentReport {
    pub dir: PathBuf,
    pub cell_ids: Vec<String>,
    pub skipped_cells: Vec<String>,
    pub warnings: Vec<String>,
}

fn cell_expected_files(cell_dir: &Path, topics: &BTreeMap<String, TopicQrels>) -> Vec<PathBuf> {
    let mut files = vec![
        cell_dir.join("cell.json"),
        cell_dir.join("sdcg_mean.csv"),
        cell_dir.join("timegain_mean.csv"),
    ];
    for topic_id in topics.keys() {
        files.push(
            cell_dir
                .join("logs")
                .join(format!("{}.jsonl", sanitize_topic_filename(topic_id))),
        );
    }
    files
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, content).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    seed: u64,
    strategy: StrategyKind,
    stopwords_sha256: String,
    config: ExperimentConfig,
    topics: Vec<String>,
    cells: Vec<ManifestCell>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestCell {
    config_id: String,
    /// Relative path -> hex SHA-256, sorted by path.
    files: BTreeMap<String, String>,
}

/// Run the full sweep described by the config. `jobs` caps the worker
/// thread count (`None` uses the default pool); it cannot change output
/// bytes. Cells whose outputs are already complete are left untouched.
pub fn run_experiment(config: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentReport> {
    config.validate()?;
    match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            pool.install(|| run_experiment_inner(config))
        }
        None => run_experiment_inner(config),
    }
}

fn run_experiment_inner(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let data = load_inputs(config)?;
    let suggester = make_suggester(&data, config);
    let cells = expand_grid(config, data.stopwords.sha256(), suggester.name())?;

    let mut log_names: BTreeMap<String, &String> = BTreeMap::new();
    for topic_id in data.topics.keys() {
        if let Some(other) = log_names.insert(sanitize_topic_filename(topic_id), topic_id) {
            return Err(Error::Config(format!(
                "topic ids {other:?} and {topic_id:?} collide as log file names"
            )));
        }
    }

    let out_dir = &config.output;
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.clone(),
        source,
    })?;

    let mut pending = Vec::new();
    let mut skipped_cells = Vec::new();
    let mut cell_ids = Vec::new();
    for cell in &cells {
        let config_id = cell.config_id();
        let cell_dir = out_dir.join("cells").join(&config_id);
        let complete = cell_expected_files(&cell_dir, &data.topics)
            .iter()
            .all(|f| f.is_file());
        if complete {
            skipped_cells.push(config_id.clone());
        } else {
            pending.push(cell.clone());
        }
        cell_ids.push(config_id);
    }

    let outputs: Result<Vec<CellOutput>> = pending
        .par_iter()
        .map(|cell| run_cell(&data, config, &suggester, cell))
        .collect();
    for output in outputs? {
        let cell_dir = out_dir.join("cells").join(&output.config_id);
        write_file(&cell_dir.join("cell.json"), &output.cell_json)?;
        for (topic_file, jsonl) in &output.logs {
            write_file(
                &cell_dir.join("logs").join(format!("{topic_file}.jsonl")),
                jsonl,
            )?;
        }
        write_curve_csv(&cell_dir.join("sdcg_mean.csv"), &output.sdcg_stats)?;
        write_curve_csv(&cell_dir.join("timegain_mean.csv"), &output.time_stats)?;
        log::info!(
            "cell {} complete ({} sessions)",
            output.config_id,
            output.logs.len()
        );
    }

    let mut manifest_cells = Vec::new();
    let mut sorted_ids = cell_ids.clone();
    sorted_ids.sort_unstable();
    for config_id in &sorted_ids {
        let cell_dir = out_dir.join("cells").join(config_id);
        let mut files = BTreeMap::new();
        for file in cell_expected_files(&cell_dir, &data.topics) {
            let rel = file
                .strip_prefix(out_dir)
                .expect("cell files live under the experiment dir")
                .to_string_lossy()
                .replace('\\', "/");
            files.insert(rel, sha256_file(&file)?);
        }
        manifest_cells.push(ManifestCell {
            config_id: config_id.clone(),
            files,
        });
    }

    let mut manifest_config = config.clone();
    manifest_config.output = PathBuf::from(".");
    let manifest = Manifest {
        format_version: MANIFEST_FORMAT_VERSION,
        seed: config.seed,
        strategy: config.strategy,
        stopwords_sha256: data.stopwords.sha256().to_string(),
        config: manifest_config,
        topics: data.topics.keys().cloned().collect(),
        cells: manifest_cells,
    };
    write_file(
        &out_dir.join("manifest.json"),
        &(serde_json::to_string_pretty(&manifest)? + "\n"),
    )?;

    Ok(ExperimentReport {
        dir: out_dir.clone(),
        cell_ids,
        skipped_cells,
        warnings: data.warnings,
    })
}

/// Run exactly one (topic, cell) session; used by `simulate run`.
pub fn run_single(
    config: &ExperimentConfig,
    topic_id: &str,
    cell_index: usize,
) -> Result<(LogHeader, SessionLog)> {
    config.validate()?;
    let data = load_inputs(config)?;
    let suggester = make_suggester(&data, config);
    let cells = expand_grid(config, data.stopwords.sha256(), suggester.name())?;
    let cell = cells.get(cell_index).ok_or_else(|| {
        Error::Config(format!(
            "cell index {cell_index} out of range (grid has {} cells)",
            cells.len()
        ))
    })?;
    let topic = data
        .topics
        .get(topic_id)
        .ok_or_else(|| Error::TopicWithoutQrels(topic_id.to_string()))?;
    let config_id = cell.config_id();
    let log = run_topic_session(&data, config, &suggester, cell, &config_id, topic)?;
    let header = LogHeader {
        topic_id: topic_id.to_string(),
        config_id,
        seed: config.seed,
        strategy: config.strategy,
        profile: cell.profile(),
        costs: config.costs.clone(),
    };
    Ok((header, log))
}

/// Recompute every cell's curve CSVs from the logs already on disk.
/// Returns the number of cells refreshed.
pub fn export_curves(experiment_dir: &Path) -> Result<usize> {
    let cells_dir = experiment_dir.join("cells");
    let entries = fs::read_dir(&cells_dir).map_err(|source| Error::Io {
        path: cells_dir.clone(),
        source,
    })?;
    let mut cell_dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    cell_dirs.sort();

    let mut refreshed = 0;
    for cell_dir in cell_dirs {
        let cell_json =
            fs::read_to_string(cell_dir.join("cell.json")).map_err(|source| Error::Io {
                path: cell_dir.join("cell.json"),
                source,
            })?;
        let parsed: serde_json::Value = serde_json::from_str(&cell_json)?;
        let cell: CellConfig = serde_json::from_value(parsed["cell"].clone())?;

        let logs_dir = cell_dir.join("logs");
        let mut log_files: Vec<PathBuf> = fs::read_dir(&logs_dir)
            .map_err(|source| Error::Io {
                path: logs_dir.clone(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
            .collect();
        log_files.sort();
        if log_files.is_empty() {
            return Err(Error::Eval(format!("no logs under {}", logs_dir.display())));
        }

        // Aggregate in topic-id order (as the sweep does) so the float
        // summation order, and hence the CSV bytes, match exactly.
        let mut logs: Vec<(String, SessionLog)> = Vec::with_capacity(log_files.len());
        for file in &log_files {
            let text = fs::read_to_string(file).map_err(|source| Error::Io {
                path: file.clone(),
                source,
            })?;
            let (header, log) = SessionLog::from_jsonl(&text)?;
            logs.push((header.topic_id, log));
        }
        logs.sort_by(|a, b| a.0.cmp(&b.0));

        let mut sdcg_curves = Vec::new();
        let mut time_curves = Vec::new();
        let mut max_elapsed = 0.0f64;
        for (_, log) in &logs {
            sdcg_curves.push(sdcg_curve(log, &cell.sdcg)?);
            time_curves.push(time_gain_curve(log)?);
            if let Some(last) = log.actions.last() {
                max_elapsed = max_elapsed.max(last.t);
            }
        }
        let sdcg_stats = aggregate_curves(&sdcg_curves, &sdcg_checkpoints(cell.max_queries))?;
        let time_stats = aggregate_curves(
            &time_curves,
            &time_checkpoints(cell.time_checkpoint_step, cell.time_budget, max_elapsed),
        )?;
        write_curve_csv(&cell_dir.join("sdcg_mean.csv"), &sdcg_stats)?;
        write_curve_csv(&cell_dir.join("timegain_mean.csv"), &time_stats)?;
        refreshed += 1;
    }
    Ok(refreshed)
}
