//! Session scoring under two cost paradigms.
//!
//! Query-wise: session DCG discounts each judged table by its rank within
//! its query and by the query's position in the session,
//! `gain / ((1 + log_bq j) * (1 + log_b i))`. Time-wise: cumulative gain as
//! a right-continuous step curve over elapsed seconds, so every logged
//! action counts as effort. Curves aggregate across topics by evaluating
//! each one at fixed checkpoints with last-value-carried-forward (an ended
//! session holds its final gain).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{ActionKind, SessionLog};

/// Discount bases of the session DCG.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SdcgParams {
    pub doc_log_base: f64,
    pub query_log_base: f64,
}

impl Default for SdcgParams {
    fn default() -> Self {
        SdcgParams {
            doc_log_base: 2.0,
            query_log_base: 4.0,
        }
    }
}

impl SdcgParams {
    pub fn validate(&self) -> Result<()> {
        for base in [self.doc_log_base, self.query_log_base] {
            if !base.is_finite() || base <= 1.0 {
                return Err(Error::Config("sDCG log bases must be > 1".to_string()));
            }
        }
        Ok(())
    }
}

fn log_base(base: f64, x: f64) -> f64 {
    x.ln() / base.ln()
}

/// Session DCG over per-query gain lists. Queries and ranks are 1-indexed
/// by position; an empty input scores 0.
pub fn sdcg(per_query_gains: &[Vec<f64>], params: &SdcgParams) -> f64 {
    let mut total = 0.0;
    for (j, gains) in per_query_gains.iter().enumerate() {
        let query_discount = 1.0 + log_base(params.query_log_base, (j + 1) as f64);
        for (i, gain) in gains.iter().enumerate() {
            if *gain == 0.0 {
                continue;
            }
            let doc_discount = 1.0 + log_base(params.doc_log_base, (i + 1) as f64);
            total += gain / (query_discount * doc_discount);
        }
    }
    total
}

/// A monotone step curve: x strictly increasing, y non-decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCurve {
    points: Vec<(f64, f64)>,
}

impl GainCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        for pair in points.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::Eval(format!(
                    "curve x values must strictly increase ({} then {})",
                    pair[0].0, pair[1].0
                )));
            }
            if pair[1].1 < pair[0].1 {
                return Err(Error::Eval(format!(
                    "curve y values must not decrease ({} then {})",
                    pair[0].1, pair[1].1
                )));
            }
        }
        Ok(GainCurve { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn final_value(&self) -> f64 {
        self.points.last().map(|p| p.1).unwrap_or(0.0)
    }

    /// Step evaluation: the y of the last point at or before `x`; 0 before
    /// the first point, the final value after the last.
    pub fn value_at(&self, x: f64) -> f64 {
        match self.points.partition_point(|p| p.0 <= x) {
            0 => 0.0,
            n => self.points[n - 1].1,
        }
    }
}

/// Per-query (rank, gain) lists reconstructed from a session log. The rank
/// of a judged table is the position of its snippet within its query.
fn per_query_gains(log: &SessionLog) -> Result<Vec<Vec<f64>>> {
    log.validate()?;
    let mut queries: Vec<Vec<f64>> = Vec::new();
    let mut position = 0usize;
    for (index, action) in log.actions.iter().enumerate() {
        match action.kind {
            ActionKind::IssueQuery => {
                queries.push(Vec::new());
                position = 0;
            }
            ActionKind::ExamineSnippet => {
                if queries.is_empty() {
                    return Err(Error::MalformedLog {
                        index,
                        kind: action.kind.name().to_string(),
                        message: "examine_snippet before any issue_query".to_string(),
                    });
                }
                position += 1;
            }
            ActionKind::JudgeTable => {
                let gains = queries
                    .last_mut()
                    .expect("validated: judge follows examine");
                if gains.len() < position {
                    gains.resize(position, 0.0);
                }
                gains[position - 1] += action.gain as f64;
            }
            ActionKind::ClickTable | ActionKind::StopSession => {}
        }
    }
    Ok(queries)
}

/// Query-wise curve: point q is the sDCG of the session truncated to its
/// first q queries.
pub fn sdcg_curve(log: &SessionLog, params: &SdcgParams) -> Result<GainCurve> {
    params.validate()?;
    let gains = per_query_gains(log)?;
    let mut points = Vec::with_capacity(gains.len());
    for q in 1..=gains.len() {
        points.push((q as f64, sdcg(&gains[..q], params)));
    }
    GainCurve::new(points)
}

/// Time-wise curve: cumulative gain after each action, keyed by elapsed
/// seconds. Actions sharing a timestamp (the final stop) merge into one
/// point.
pub fn time_gain_curve(log: &SessionLog) -> Result<GainCurve> {
    log.validate()?;
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(log.actions.len());
    let mut cumulative = 0.0;
    for action in &log.actions {
        cumulative += action.gain as f64;
        match points.last_mut() {
            Some(last) if last.0 == action.t => last.1 = cumulative,
            _ => points.push((action.t, cumulative)),
        }
    }
    GainCurve::new(points)
}

/// One aggregated checkpoint across curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveStat {
    pub x: f64,
    pub mean: f64,
    pub n: usize,
    pub stddev: f64,
}

/// Evaluate every curve at every checkpoint and aggregate. The standard
/// deviation is the sample estimate (0 for a single curve).
pub fn aggregate_curves(curves: &[GainCurve], checkpoints: &[f64]) -> Result<Vec<CurveStat>> {
    if curves.is_empty() {
        return Err(Error::Eval("cannot aggregate zero curves".to_string()));
    }
    for pair in checkpoints.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::Eval(
                "checkpoints must strictly increase".to_string(),
            ));
        }
    }
    let n = curves.len();
    let mut stats = Vec::with_capacity(checkpoints.len());
    for &x in checkpoints {
        let values: Vec<f64> = curves.iter().map(|c| c.value_at(x)).collect();
        let mean = values.iter().sum::<f64>() / n as f64;
        let stddev = if n < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            var.sqrt()
        };
        stats.push(CurveStat { x, mean, n, stddev });
    }
    Ok(stats)
}

/// Pointwise arithmetic mean of curves at the given checkpoints.
pub fn mean_curve(curves: &[GainCurve], checkpoints: &[f64]) -> Result<GainCurve> {
    let stats = aggregate_curves(curves, checkpoints)?;
    GainCurve::new(stats.into_iter().map(|s| (s.x, s.mean)).collect())
}

/// Write checkpoint statistics as `x,mean,n,stddev` CSV.
pub fn write_curve_csv(path: &Path, stats: &[CurveStat]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Eval(e.to_string()))?;
    for stat in stats {
        writer
            .serialize(stat)
            .map_err(|e| Error::Eval(e.to_string()))?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

/// Read back a curve CSV written by [`write_curve_csv`].
pub fn read_curve_csv(path: &Path) -> Result<Vec<CurveStat>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Eval(e.to_string()))?;
    let mut stats = Vec::new();
    for record in reader.deserialize() {
        let stat: CurveStat = record.map_err(|e| Error::Eval(e.to_string()))?;
        stats.push(stat);
    }
    Ok(stats)
}
