use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trailing window used for the smoothed learning curve.
pub const SMOOTHING_WINDOW: usize = 5;

/// Column order is the on-disk `metrics.csv` schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub trial: usize,
    pub epoch: usize,
    pub env_steps: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub action_gap_mean: f64,
    pub epsilon: f64,
    pub macro_event: bool,
}

/// Mean and sample standard deviation; a single sample has deviation 0.
pub fn mean_and_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    // Welford: identical samples give exactly zero spread.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (k, &x) in xs.iter().enumerate() {
        let d = x - mean;
        mean += d / (k + 1) as f64;
        m2 += d * (x - mean);
    }
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    (mean, (m2 / (xs.len() - 1) as f64).sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Largest minus second-largest enabled Q-value.
pub fn action_gap(q: &[f64], enabled: &[bool]) -> Result<f64> {
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    let mut count = 0;
    for (&v, &e) in q.iter().zip(enabled) {
        if !e {
            continue;
        }
        count += 1;
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    if count < 2 {
        return Err(Error::InvalidArgument(format!(
            "action gap needs at least 2 enabled outputs, got {count}"
        )));
    }
    Ok(first - second)
}

/// One agent decision recorded during evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionPoint {
    pub state: usize,
    pub q: Vec<f64>,
    pub enabled: Vec<bool>,
    pub output: usize,
    /// Undiscounted reward collected while executing this decision.
    pub reward: f64,
    pub tau: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub decisions: Vec<DecisionPoint>,
}

impl EpisodeRecord {
    pub fn total_reward(&self) -> f64 {
        self.decisions.iter().map(|d| d.reward).sum()
    }
}

/// A decision preceding a positive reward, aligned by distance to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadingPoint {
    /// Decision index at which the reward has been received.
    pub event: usize,
    pub decision: usize,
    pub distance: usize,
    pub state: usize,
    pub q: Vec<f64>,
    pub top_q: f64,
    pub gap: Option<f64>,
}

/// For every positive reward, the up-to-`k` decisions leading to it.
///
/// A reward collected while executing decision `i` is observed at decision
/// point `i + 1`; the emitted window is `i + 1 - k ..= i`, nearest last.
pub fn reward_leading_trace(record: &EpisodeRecord, k: usize) -> Vec<LeadingPoint> {
    let mut out = Vec::new();
    for (i, d) in record.decisions.iter().enumerate() {
        if d.reward <= 0.0 {
            continue;
        }
        let event = i + 1;
        let first = event.saturating_sub(k);
        for j in first..event {
            let p = &record.decisions[j];
            let top_q = p
                .q
                .iter()
                .zip(&p.enabled)
                .filter(|(_, &e)| e)
                .map(|(&v, _)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            out.push(LeadingPoint {
                event,
                decision: j,
                distance: event - j,
                state: p.state,
                q: p.q.clone(),
                top_q,
                gap: action_gap(&p.q, &p.enabled).ok(),
            });
        }
    }
    out
}

/// Row of `gap.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub distance_to_reward: usize,
    pub mean_gap: f64,
    pub mean_top_q: f64,
    pub agent_tag: String,
}

pub fn gap_table(points: &[LeadingPoint], agent_tag: &str) -> Vec<GapRow> {
    let mut by_distance: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for p in points {
        let entry = by_distance.entry(p.distance).or_default();
        if let Some(g) = p.gap {
            entry.0.push(g);
        }
        entry.1.push(p.top_q);
    }
    by_distance
        .into_iter()
        .map(|(distance, (gaps, tops))| GapRow {
            distance_to_reward: distance,
            mean_gap: mean_and_std(&gaps).0,
            mean_top_q: mean_and_std(&tops).0,
            agent_tag: agent_tag.to_string(),
        })
        .collect()
}

/// Mean gap over all leading points that have one.
pub fn mean_leading_gap(points: &[LeadingPoint]) -> f64 {
    let gaps: Vec<f64> = points.iter().filter_map(|p| p.gap).collect();
    if gaps.is_empty() {
        0.0
    } else {
        mean_and_std(&gaps).0
    }
}

/// Row of `curves.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub smoothed_mean: f64,
}

/// Cross-trial statistics of `mean_return` per epoch. Each trial's rows must
/// cover the same epochs in the same order.
pub fn aggregate_curves(trials: &[Vec<MetricsRow>]) -> Result<Vec<CurvePoint>> {
    let Some(first) = trials.first() else {
        return Ok(Vec::new());
    };
    let grid: Vec<usize> = first.iter().map(|r| r.epoch).collect();
    for (t, rows) in trials.iter().enumerate() {
        let epochs: Vec<usize> = rows.iter().map(|r| r.epoch).collect();
        if epochs != grid {
            return Err(Error::MismatchedGrid(format!(
                "trial #{t} has epochs {epochs:?}, expected {grid:?}"
            )));
        }
    }
    let smoothed: Vec<Vec<f64>> = trials
        .iter()
        .map(|rows| {
            (0..rows.len())
                .map(|i| {
                    let lo = (i + 1).saturating_sub(SMOOTHING_WINDOW);
                    let window: Vec<f64> = rows[lo..=i].iter().map(|r| r.mean_return).collect();
                    mean_and_std(&window).0
                })
                .collect()
        })
        .collect();
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &epoch)| {
            let values: Vec<f64> = trials.iter().map(|rows| rows[i].mean_return).collect();
            let (mean, std) = mean_and_std(&values);
            let smooth: Vec<f64> = smoothed.iter().map(|s| s[i]).collect();
            CurvePoint {
                epoch,
                mean,
                std,
                min: values.iter().copied().fold(f64::INFINITY, f64::min),
                max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                smoothed_mean: mean_and_std(&smooth).0,
            }
        })
        .collect())
}

/// Row types with a fixed on-disk column order.
pub trait CsvTable: Serialize {
    const COLUMNS: &'static [&'static str];
}

impl CsvTable for MetricsRow {
    const COLUMNS: &'static [&'static str] = &[
        "trial",
        "epoch",
        "env_steps",
        "mean_return",
        "std_return",
        "action_gap_mean",
        "epsilon",
        "macro_event",
    ];
}

impl CsvTable for CurvePoint {
    const COLUMNS: &'static [&'static str] =
        &["epoch", "mean", "std", "min", "max", "smoothed_mean"];
}

impl CsvTable for GapRow {
    const COLUMNS: &'static [&'static str] =
        &["distance_to_reward", "mean_gap", "mean_top_q", "agent_tag"];
}

/// Writes the header even when `rows` is empty.
pub fn write_csv<T: CsvTable, W: Write>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(T::COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file<T: CsvTable>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    write_csv(std::fs::File::create(path)?, rows)
}
