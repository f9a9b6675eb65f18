use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{gap_table, mean_and_std, median, write_csv_file, GapRow, MetricsRow};
use crate::envs::Environment;
use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::runner::{run_experiment, RunSummary};

pub const DEFAULT_THRESHOLD_FRACTION: f64 = 0.9;

/// Printed in place of a step count when the threshold is never reached.
pub const NEVER: &str = "∞";

/// Environment steps at the end of the first epoch whose evaluation mean
/// reaches `threshold`.
pub fn steps_to_threshold(metrics: &[MetricsRow], threshold: f64) -> Option<usize> {
    metrics
        .iter()
        .find(|r| r.mean_return >= threshold)
        .map(|r| r.env_steps)
}

/// Median over trials, counting a trial that never reached the threshold as
/// infinitely slow. `None` when the median itself is infinite.
pub fn median_steps(per_trial: &[Option<usize>]) -> Option<f64> {
    let values: Vec<f64> = per_trial
        .iter()
        .map(|s| s.map_or(f64::INFINITY, |v| v as f64))
        .collect();
    let m = median(&values);
    m.is_finite().then_some(m)
}

pub fn format_steps(steps: Option<f64>) -> String {
    match steps {
        Some(s) if s.fract() == 0.0 => format!("{s:.0}"),
        Some(s) => format!("{s:.1}"),
        None => NEVER.to_string(),
    }
}

/// Configs may only be compared when they describe the same environment and
/// the same environment-step budget.
pub fn check_comparable(configs: &[ExperimentConfig]) -> Result<()> {
    let Some(first) = configs.first() else {
        return Err(Error::Config("compare needs at least one config".into()));
    };
    let mut names = HashSet::new();
    for c in configs {
        if !names.insert(c.experiment.name.as_str()) {
            return Err(Error::Config(format!(
                "experiment.name: `{}` is used by more than one variant",
                c.experiment.name
            )));
        }
        if c.env != first.env {
            return Err(Error::Config(format!(
                "env: variant `{}` uses {:?}, but `{}` uses {:?}",
                c.experiment.name, c.env, first.experiment.name, first.env
            )));
        }
        if c.step_budget() != first.step_budget() {
            return Err(Error::Config(format!(
                "agent.epochs/agent.epoch_length: variant `{}` has a budget of {} steps, `{}` has {}",
                c.experiment.name,
                c.step_budget(),
                first.experiment.name,
                first.step_budget()
            )));
        }
    }
    Ok(())
}

/// One row of `comparison.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: String,
    /// Mean over trials of the final-epoch evaluation mean.
    pub mean_return: f64,
    /// Sample deviation of the same values across trials.
    pub deviation: f64,
    pub best_mean: bool,
    pub lowest_deviation: bool,
    /// Median over trials; `∞` when never reached.
    pub steps_to_threshold: String,
    pub trials_reaching: usize,
    pub trials: usize,
}

#[derive(Debug)]
pub struct Comparison {
    pub threshold: f64,
    pub step_budget: usize,
    pub rows: Vec<VariantSummary>,
    pub runs: Vec<RunSummary>,
}

impl Comparison {
    pub fn table(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.variant.chars().count())
            .max()
            .unwrap_or(0)
            .max(7);
        let mut out = format!(
            "threshold {:.4} at a matched budget of {} steps\n{:width$}  {:>22}  {:>18}  reached\n",
            self.threshold, self.step_budget, "variant", "mean(deviation)", "steps_to_threshold"
        );
        for r in &self.rows {
            let mark = |flag: bool| if flag { "*" } else { " " };
            let cell = format!(
                "{:.4}{}({:.4}){}",
                r.mean_return,
                mark(r.best_mean),
                r.deviation,
                mark(r.lowest_deviation)
            );
            out.push_str(&format!(
                "{:width$}  {:>22}  {:>18}  {}/{}\n",
                r.variant, cell, r.steps_to_threshold, r.trials_reaching, r.trials
            ));
        }
        out.push_str("* best mean / lowest deviation\n");
        out
    }
}

/// Summarizes finished runs; flags are shared on ties.
pub fn summarize(runs: &[RunSummary], threshold: f64) -> Vec<VariantSummary> {
    let mut rows: Vec<VariantSummary> = runs
        .iter()
        .map(|run| {
            let finals: Vec<f64> = run.trials.iter().map(|t| t.final_mean_return()).collect();
            let (mean_return, deviation) = mean_and_std(&finals);
            let steps: Vec<Option<usize>> = run
                .trials
                .iter()
                .map(|t| steps_to_threshold(&t.metrics, threshold))
                .collect();
            VariantSummary {
                variant: run.manifest.name.clone(),
                mean_return,
                deviation,
                best_mean: false,
                lowest_deviation: false,
                steps_to_threshold: format_steps(median_steps(&steps)),
                trials_reaching: steps.iter().filter(|s| s.is_some()).count(),
                trials: run.manifest.trials.len(),
            }
        })
        .collect();
    let best = rows
        .iter()
        .map(|r| r.mean_return)
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    let lowest = rows
        .iter()
        .map(|r| r.deviation)
        .filter(|v| !v.is_nan())
        .fold(f64::INFINITY, f64::min);
    for r in &mut rows {
        r.best_mean = r.mean_return == best;
        r.lowest_deviation = r.deviation == lowest;
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CompareManifest {
    variants: Vec<String>,
    threshold_fraction: f64,
    threshold: f64,
    /// Every variant is trained for the same number of environment steps.
    step_budget: usize,
    variant_dirs: Vec<PathBuf>,
}

/// Validates all variants, then runs each into its own subdirectory of
/// `out_dir` and writes `comparison.csv` plus a combined `gap.csv`.
pub fn run_compare(
    variants: &[(ExperimentConfig, String)],
    out_dir: &Path,
    threshold_fraction: f64,
) -> Result<Comparison> {
    if !(threshold_fraction > 0.0 && threshold_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "threshold fraction must lie in (0, 1], got {threshold_fraction}"
        )));
    }
    let configs: Vec<ExperimentConfig> = variants.iter().map(|(c, _)| c.clone()).collect();
    check_comparable(&configs)?;
    let optimal = configs[0].build_env()?.optimal_return().ok_or_else(|| {
        Error::Config("env: optimal return unknown, cannot place a threshold".into())
    })?;
    let threshold = threshold_fraction * optimal;

    std::fs::create_dir_all(out_dir)?;
    let mut runs = Vec::with_capacity(variants.len());
    let mut dirs = Vec::with_capacity(variants.len());
    for (config, raw) in variants {
        let dir = out_dir.join(&config.experiment.name);
        runs.push(run_experiment(config, raw, &dir)?);
        dirs.push(dir);
    }

    let rows = summarize(&runs, threshold);
    write_rows(out_dir.join("comparison.csv"), &rows)?;
    let gap: Vec<GapRow> = runs
        .iter()
        .flat_map(|r| gap_table(&r.all_leading(), &r.manifest.name))
        .collect();
    write_csv_file(out_dir.join("gap.csv"), &gap)?;
    let manifest = CompareManifest {
        variants: configs.iter().map(|c| c.experiment.name.clone()).collect(),
        threshold_fraction,
        threshold,
        step_budget: configs[0].step_budget(),
        variant_dirs: dirs,
    };
    let file = std::fs::File::create(out_dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &manifest)?;

    Ok(Comparison {
        threshold,
        step_budget: configs[0].step_budget(),
        rows,
        runs,
    })
}

fn write_rows(path: PathBuf, rows: &[VariantSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
