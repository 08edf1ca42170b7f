//! The simulated-user interaction loop.
//!
//! One session walks a fixed cycle per query: issue query, page through
//! SERPs of ten, examine snippets up to the browsing depth, click according
//! to the user's click model, read and judge clicked tables, then fold the
//! examined tables into the knowledge state and reformulate. The session
//! stops when the strategy is exhausted, the query budget is reached, or
//! the time budget runs out; every stop is logged explicitly.
//!
//! Each action charges a fixed cost in seconds; a table's grade counts
//! toward the cumulative gain only the first time it is judged relevant.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, Modality, Table, TopicQrels};
use crate::error::{Error, Result};
use crate::querygen::{SessionStrategy, StrategyKind};
use crate::retrieval::{serp_page, Index};

/// How a simulated user decides whether to click a snippet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClickModel {
    /// Clicks exactly the truly relevant tables (upper bound).
    Oracle,
    /// Clicks every snippet with probability 0.5.
    Random,
    /// Clicks iff the snippet's modality is judged relevant.
    ModalityDeterministic,
    /// Clicks with `p_click_rel` / `p_click_nonrel` depending on the
    /// snippet's modality relevance.
    ModalityProbabilistic,
}

/// Which examined tables feed the knowledge state after each query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeSource {
    /// Every table whose snippet was examined.
    Examined,
    /// Only tables the user actually clicked.
    Clicked,
}

/// Behavior parameters of one simulated user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UserProfile {
    pub click_model: ClickModel,
    pub snippet_modality: Modality,
    pub p_click_rel: f64,
    pub p_click_nonrel: f64,
    pub judge_accuracy: f64,
    /// Snippets examined per query, spanning SERP pages as needed.
    pub browsing_depth: usize,
    pub max_queries: usize,
    /// Optional session budget in seconds.
    pub time_budget: Option<f64>,
    pub knowledge_source: KnowledgeSource,
}

impl Default for UserProfile {
    fn default() -> Self {
        UserProfile {
            click_model: ClickModel::ModalityDeterministic,
            snippet_modality: Modality::PageTitle,
            p_click_rel: 1.0,
            p_click_nonrel: 0.0,
            judge_accuracy: 1.0,
            browsing_depth: 10,
            max_queries: 10,
            time_budget: None,
            knowledge_source: KnowledgeSource::Examined,
        }
    }
}

impl UserProfile {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_click_rel", self.p_click_rel),
            ("p_click_nonrel", self.p_click_nonrel),
            ("judge_accuracy", self.judge_accuracy),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0,1], got {p}")));
            }
        }
        if self.browsing_depth < 1 {
            return Err(Error::Config("browsing_depth must be >= 1".to_string()));
        }
        if self.max_queries < 1 {
            return Err(Error::Config("max_queries must be >= 1".to_string()));
        }
        if let Some(budget) = self.time_budget {
            if !budget.is_finite() || budget <= 0.0 {
                return Err(Error::Config("time_budget must be > 0".to_string()));
            }
        }
        Ok(())
    }
}

/// Seconds charged per action kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    pub issue_query: f64,
    pub examine_snippet: f64,
    pub read_table: f64,
    pub judge_table: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            issue_query: 10.0,
            examine_snippet: 2.0,
            read_table: 20.0,
            judge_table: 2.0,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        for (name, cost) in [
            ("issue_query", self.issue_query),
            ("examine_snippet", self.examine_snippet),
            ("read_table", self.read_table),
            ("judge_table", self.judge_table),
        ] {
            if !cost.is_finite() || cost <= 0.0 {
                return Err(Error::Config(format!(
                    "cost {name} must be > 0, got {cost}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    IssueQuery,
    ExamineSnippet,
    ClickTable,
    JudgeTable,
    StopSession,
}

impl ActionKind {
    pub fn name(self) -> &'static str {
        match self {
            ActionKind::IssueQuery => "issue_query",
            ActionKind::ExamineSnippet => "examine_snippet",
            ActionKind::ClickTable => "click_table",
            ActionKind::JudgeTable => "judge_table",
            ActionKind::StopSession => "stop_session",
        }
    }
}

/// One timestamped log entry. `t` is cumulative elapsed seconds after the
/// action completed; `gain` is the relevance grade collected by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    pub subject: String,
    pub t: f64,
    pub gain: u32,
}

/// Complete record of one simulated session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub topic_id: String,
    pub actions: Vec<Action>,
    /// Tables that were judged relevant at least once.
    pub seen_tables: BTreeSet<String>,
    pub total_gain: u64,
    pub queries_issued: usize,
    pub tables_seen: usize,
}

/// Config snapshot written at the top of every session log file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub topic_id: String,
    pub config_id: String,
    pub seed: u64,
    pub strategy: StrategyKind,
    pub profile: UserProfile,
    pub costs: CostModel,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: LogHeader,
}

#[derive(Serialize, Deserialize)]
struct SummaryLine {
    summary: Summary,
}

#[derive(Serialize, Deserialize)]
struct Summary {
    queries_issued: usize,
    tables_seen: usize,
    total_gain: u64,
}

impl SessionLog {
    /// Serialize as JSONL: header object, one object per action, summary.
    pub fn to_jsonl(&self, header: &LogHeader) -> Result<String> {
        let mut out = String::new();
        out.push_str(&serde_json::to_string(&HeaderLine {
            header: header.clone(),
        })?);
        out.push('\n');
        for action in &self.actions {
            out.push_str(&serde_json::to_string(action)?);
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&SummaryLine {
            summary: Summary {
                queries_issued: self.queries_issued,
                tables_seen: self.tables_seen,
                total_gain: self.total_gain,
            },
        })?);
        out.push('\n');
        Ok(out)
    }

    /// Parse a single-session JSONL log and validate its action sequence.
    pub fn from_jsonl(text: &str) -> Result<(LogHeader, SessionLog)> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: HeaderLine =
            serde_json::from_str(lines.next().ok_or_else(|| Error::MalformedLog {
                index: 0,
                kind: "header".to_string(),
                message: "empty log".to_string(),
            })?)?;
        let mut actions = Vec::new();
        let mut summary: Option<Summary> = None;
        for line in lines {
            if summary.is_some() {
                return Err(Error::MalformedLog {
                    index: actions.len(),
                    kind: "summary".to_string(),
                    message: "content after summary line".to_string(),
                });
            }
            let value: serde_json::Value = serde_json::from_str(line)?;
            if value.get("summary").is_some() {
                let parsed: SummaryLine = serde_json::from_value(value)?;
                summary = Some(parsed.summary);
            } else {
                actions.push(serde_json::from_value::<Action>(value)?);
            }
        }
        let summary = summary.ok_or_else(|| Error::MalformedLog {
            index: actions.len(),
            kind: "summary".to_string(),
            message: "missing summary line".to_string(),
        })?;
        let seen_tables: BTreeSet<String> = actions
            .iter()
            .filter(|a| a.kind == ActionKind::JudgeTable && a.gain > 0)
            .map(|a| a.subject.clone())
            .collect();
        let log = SessionLog {
            topic_id: header.header.topic_id.clone(),
            actions,
            seen_tables,
            total_gain: summary.total_gain,
            queries_issued: summary.queries_issued,
            tables_seen: summary.tables_seen,
        };
        log.validate()?;
        if log.total_gain != log.actions.iter().map(|a| a.gain as u64).sum::<u64>() {
            return Err(Error::MalformedLog {
                index: log.actions.len(),
                kind: "summary".to_string(),
                message: "total_gain does not match the sum of action gains".to_string(),
            });
        }
        Ok((header.header, log))
    }

    /// Check the structural invariants of the action sequence, naming the
    /// first offending action on failure.
    pub fn validate(&self) -> Result<()> {
        let offend = |index: usize, kind: ActionKind, message: &str| {
            Err(Error::MalformedLog {
                index,
                kind: kind.name().to_string(),
                message: message.to_string(),
            })
        };
        let mut prev_t = 0.0;
        let mut gained: BTreeSet<&str> = BTreeSet::new();
        let mut saw_query = false;
        for (i, action) in self.actions.iter().enumerate() {
            if action.kind == ActionKind::IssueQuery {
                saw_query = true;
            } else if action.kind != ActionKind::StopSession && !saw_query {
                return offend(i, action.kind, "action before any issue_query");
            }
            match action.kind {
                ActionKind::StopSession => {
                    if i + 1 != self.actions.len() {
                        return offend(i, action.kind, "stop_session before the end of the log");
                    }
                    if action.t < prev_t {
                        return offend(i, action.kind, "elapsed time decreased");
                    }
                }
                kind => {
                    if action.t <= prev_t {
                        return offend(i, kind, "elapsed time did not increase");
                    }
                    if action.gain > 0 {
                        if kind != ActionKind::JudgeTable {
                            return offend(i, kind, "gain outside a judge_table action");
                        }
                        if !gained.insert(action.subject.as_str()) {
                            return offend(i, kind, "repeated gain for the same table");
                        }
                    }
                    if kind == ActionKind::JudgeTable {
                        let follows_click = i > 0
                            && self.actions[i - 1].kind == ActionKind::ClickTable
                            && self.actions[i - 1].subject == action.subject;
                        if !follows_click {
                            return offend(i, kind, "judge_table without a preceding click");
                        }
                    }
                    if kind == ActionKind::ClickTable {
                        let follows_examine = i > 0
                            && self.actions[i - 1].kind == ActionKind::ExamineSnippet
                            && self.actions[i - 1].subject == action.subject;
                        if !follows_examine {
                            return offend(i, kind, "click_table without a preceding examine");
                        }
                    }
                }
            }
            prev_t = action.t;
        }
        match self.actions.last() {
            Some(last) if last.kind == ActionKind::StopSession => Ok(()),
            Some(last) => offend(
                self.actions.len() - 1,
                last.kind,
                "log does not end with stop_session",
            ),
            None => Err(Error::MalformedLog {
                index: 0,
                kind: "stop_session".to_string(),
                message: "empty action list".to_string(),
            }),
        }
    }
}

/// Derive the per-session RNG seed from the experiment seed, the topic,
/// and the grid cell. Length-prefixed fields keep the hash unambiguous.
pub fn session_seed(master_seed: u64, topic_id: &str, config_id: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update((topic_id.len() as u64).to_le_bytes());
    hasher.update(topic_id.as_bytes());
    hasher.update((config_id.len() as u64).to_le_bytes());
    hasher.update(config_id.as_bytes());
    hasher.finalize().into()
}

/// The session's random stream; clicks and judgments draw from it in
/// action order.
pub fn session_rng(master_seed: u64, topic_id: &str, config_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(session_seed(master_seed, topic_id, config_id))
}

/// One click decision. Deterministic models never consume randomness, so
/// fully deterministic sessions are seed-invariant.
pub fn click_decision(
    modality_relevant: bool,
    table_grade: u32,
    profile: &UserProfile,
    rng: &mut ChaCha8Rng,
) -> bool {
    match profile.click_model {
        ClickModel::Oracle => table_grade > 0,
        ClickModel::Random => rng.gen::<f64>() < 0.5,
        ClickModel::ModalityDeterministic => modality_relevant,
        ClickModel::ModalityProbabilistic => {
            let p = if modality_relevant {
                profile.p_click_rel
            } else {
                profile.p_click_nonrel
            };
            rng.gen::<f64>() < p
        }
    }
}

/// One relevance judgment of a clicked table. With accuracy 1.0 this is
/// deterministic and draws nothing.
pub fn judge_relevance(table_grade: u32, profile: &UserProfile, rng: &mut ChaCha8Rng) -> bool {
    let truly_relevant = table_grade > 0;
    if profile.judge_accuracy >= 1.0 {
        return truly_relevant;
    }
    if rng.gen::<f64>() < profile.judge_accuracy {
        truly_relevant
    } else {
        !truly_relevant
    }
}

/// Shared immutable inputs of a session.
pub struct SessionParams<'a> {
    pub index: &'a Index,
    pub corpus: &'a Corpus,
    /// Retrieval depth per query (top-k before paging).
    pub retrieval_depth: usize,
    pub page_size: usize,
}

/// Run one simulated session for one topic.
pub fn run_session(
    topic: &TopicQrels,
    params: &SessionParams,
    strategy: &mut SessionStrategy,
    profile: &UserProfile,
    costs: &CostModel,
    rng: &mut ChaCha8Rng,
) -> Result<SessionLog> {
    profile.validate()?;
    costs.validate()?;
    if topic.table_grades.is_empty() && topic.modality_rel.is_empty() {
        return Err(Error::TopicWithoutQrels(topic.topic_id.clone()));
    }
    if topic.topic_query.trim().is_empty() {
        return Err(Error::TopicWithoutQuery(topic.topic_id.clone()));
    }

    let mut actions: Vec<Action> = Vec::new();
    let mut elapsed = 0.0;
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut total_gain: u64 = 0;
    let mut queries_issued = 0usize;

    let over_budget = |elapsed: f64| profile.time_budget.is_some_and(|b| elapsed >= b);

    let stop_reason;
    'session: loop {
        if queries_issued >= profile.max_queries {
            stop_reason = "max_queries";
            break 'session;
        }
        if over_budget(elapsed) {
            stop_reason = "time_budget";
            break 'session;
        }
        let Some(query) = strategy.next_query() else {
            stop_reason = "exhausted";
            break 'session;
        };
        queries_issued += 1;
        elapsed += costs.issue_query;
        actions.push(Action {
            kind: ActionKind::IssueQuery,
            subject: query.clone(),
            t: elapsed,
            gain: 0,
        });

        let ranking = params.index.search(&query, params.retrieval_depth);
        let mut examined: Vec<&Table> = Vec::new();
        let mut clicked: Vec<&Table> = Vec::new();
        let mut judged_relevant: Vec<&Table> = Vec::new();
        let mut position = 0usize;
        let mut budget_hit = false;

        'depth: for page_index in 1.. {
            let Some(page) = serp_page(
                &ranking,
                params.corpus,
                profile.snippet_modality,
                page_index,
                params.page_size,
            ) else {
                break 'depth;
            };
            for item in &page.items {
                if position >= profile.browsing_depth {
                    break 'depth;
                }
                if over_budget(elapsed) {
                    budget_hit = true;
                    break 'depth;
                }
                position += 1;
                elapsed += costs.examine_snippet;
                actions.push(Action {
                    kind: ActionKind::ExamineSnippet,
                    subject: item.table_id.clone(),
                    t: elapsed,
                    gain: 0,
                });
                let table = params
                    .corpus
                    .get(&item.table_id)
                    .ok_or_else(|| Error::UnknownTable(item.table_id.clone()))?;
                examined.push(table);

                let modality_relevant =
                    topic.modality_relevant(&item.table_id, profile.snippet_modality);
                let grade = topic.grade(&item.table_id);
                if !click_decision(modality_relevant, grade, profile, rng) {
                    continue;
                }
                if over_budget(elapsed) {
                    budget_hit = true;
                    break 'depth;
                }
                elapsed += costs.read_table;
                actions.push(Action {
                    kind: ActionKind::ClickTable,
                    subject: item.table_id.clone(),
                    t: elapsed,
                    gain: 0,
                });
                clicked.push(table);

                if over_budget(elapsed) {
                    budget_hit = true;
                    break 'depth;
                }
                elapsed += costs.judge_table;
                let relevant = judge_relevance(grade, profile, rng);
                let gain = if relevant && !seen.contains(&item.table_id) {
                    seen.insert(item.table_id.clone());
                    grade
                } else {
                    0
                };
                total_gain += gain as u64;
                actions.push(Action {
                    kind: ActionKind::JudgeTable,
                    subject: item.table_id.clone(),
                    t: elapsed,
                    gain,
                });
                if relevant {
                    judged_relevant.push(table);
                }
            }
        }

        if budget_hit {
            stop_reason = "time_budget";
            break 'session;
        }

        let knowledge_tables: &[&Table] = match profile.knowledge_source {
            KnowledgeSource::Examined => &examined,
            KnowledgeSource::Clicked => &clicked,
        };
        strategy.observe(knowledge_tables, &judged_relevant);
    }

    actions.push(Action {
        kind: ActionKind::StopSession,
        subject: stop_reason.to_string(),
        t: elapsed,
        gain: 0,
    });

    Ok(SessionLog {
        topic_id: topic.topic_id.clone(),
        actions,
        tables_seen: seen.len(),
        seen_tables: seen,
        total_gain,
        queries_issued,
    })
}
