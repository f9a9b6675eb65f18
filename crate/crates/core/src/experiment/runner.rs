use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{write_slot_records, ActionSet};
use crate::analysis::{
    aggregate_curves, gap_table, reward_leading_trace, write_csv_file, CurvePoint, GapRow,
    LeadingPoint, MetricsRow,
};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::macros::MacroKind;
use crate::qlearn::{train_phase, AnyQ, MacroEvent, QDump, QFunction};

use super::config::ExperimentConfig;

/// Everything one finished trial produces.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialArtifacts {
    pub trial: usize,
    pub seed: u64,
    pub metrics: Vec<MetricsRow>,
    pub macro_history: Vec<MacroEvent>,
    pub dump: QDump,
    /// Reward-leading decisions from the final evaluation.
    pub leading: Vec<LeadingPoint>,
    pub env_steps: usize,
    pub disabled_selections: usize,
}

impl TrialArtifacts {
    pub fn final_mean_return(&self) -> f64 {
        self.metrics.last().map_or(f64::NAN, |r| r.mean_return)
    }
}

/// Builds the environment, action set and Q-function for one trial and
/// trains it to completion.
pub fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<TrialArtifacts> {
    let env = config.build_env()?;
    let capacity = match config.macros.kind {
        MacroKind::None => 0,
        _ => config.macros.capacity_for(env.action_count()),
    };
    let set = ActionSet::with_capacity(&env.action_labels(), capacity)?;
    let seed = config.trial_seed(trial);
    let qf = AnyQ::build(
        config.experiment.backend,
        env.state_count(),
        env.feature_len(),
        config.agent.hidden,
        set.output_arity(),
        seed,
    );
    let mut agent = config.agent.clone();
    agent.seed = seed;
    let out = train_phase(env, set, qf, &agent, &config.macros, trial)?;
    let leading = out
        .final_evaluation
        .records
        .iter()
        .flat_map(|r| reward_leading_trace(r, config.experiment.gap_window))
        .collect();
    Ok(TrialArtifacts {
        trial,
        seed,
        dump: out.qf.dump(out.set.version()),
        metrics: out.metrics,
        macro_history: out.macro_history,
        leading,
        env_steps: out.env_steps,
        disabled_selections: out.disabled_selections,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEntry {
    pub trial: usize,
    pub seed: u64,
    pub status: TrialStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub env_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_mean_return: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub backend: String,
    pub macro_kind: String,
    pub step_budget: usize,
    pub trials: Vec<TrialEntry>,
}

impl Manifest {
    pub fn failed(&self) -> usize {
        self.trials
            .iter()
            .filter(|t| t.status == TrialStatus::Failed)
            .count()
    }
}

#[derive(Debug)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
    pub trials: Vec<TrialArtifacts>,
    pub curves: Vec<CurvePoint>,
    pub gap: Vec<GapRow>,
}

impl RunSummary {
    pub fn all_leading(&self) -> Vec<LeadingPoint> {
        self.trials.iter().flat_map(|t| t.leading.clone()).collect()
    }
}

pub fn trial_dir(root: &Path, trial: usize) -> PathBuf {
    root.join(format!("trial_{trial}"))
}

/// Runs every trial on a bounded worker pool; results come back in trial
/// order.
pub fn run_trials(config: &ExperimentConfig) -> Result<Vec<Result<TrialArtifacts>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.experiment.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        (0..config.experiment.trials)
            .into_par_iter()
            .map(|t| run_trial(config, t))
            .collect()
    }))
}

/// Validates, runs all trials and writes every artifact. A failed trial is
/// recorded in the manifest and does not affect the others.
pub fn run_experiment(
    config: &ExperimentConfig,
    raw_config: &str,
    out_dir: &Path,
) -> Result<RunSummary> {
    config.validate()?;
    let results = run_trials(config)?;
    write_run(config, raw_config, out_dir, results)
}

/// Single writer for a run's output directory, in trial order.
pub fn write_run(
    config: &ExperimentConfig,
    raw_config: &str,
    out_dir: &Path,
    results: Vec<Result<TrialArtifacts>>,
) -> Result<RunSummary> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("config.toml"), raw_config)?;

    let mut entries = Vec::with_capacity(results.len());
    let mut trials = Vec::new();
    for (t, result) in results.into_iter().enumerate() {
        match result {
            Ok(art) => {
                write_trial(out_dir, &art)?;
                entries.push(TrialEntry {
                    trial: t,
                    seed: art.seed,
                    status: TrialStatus::Ok,
                    error: None,
                    env_steps: Some(art.env_steps),
                    final_mean_return: Some(art.final_mean_return()),
                });
                trials.push(art);
            }
            Err(e) => entries.push(TrialEntry {
                trial: t,
                seed: config.trial_seed(t),
                status: TrialStatus::Failed,
                error: Some(e.to_string()),
                env_steps: None,
                final_mean_return: None,
            }),
        }
    }

    let grid: Vec<Vec<MetricsRow>> = trials.iter().map(|t| t.metrics.clone()).collect();
    let curves = aggregate_curves(&grid)?;
    write_csv_file(out_dir.join("curves.csv"), &curves)?;
    let leading: Vec<LeadingPoint> = trials.iter().flat_map(|t| t.leading.clone()).collect();
    let gap = gap_table(&leading, &config.experiment.name);
    write_csv_file(out_dir.join("gap.csv"), &gap)?;

    let manifest = Manifest {
        name: config.experiment.name.clone(),
        backend: config.experiment.backend.to_string(),
        macro_kind: config.macros.kind.to_string(),
        step_budget: config.step_budget(),
        trials: entries,
    };
    let file = std::fs::File::create(out_dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &manifest)?;

    Ok(RunSummary {
        output_dir: out_dir.to_path_buf(),
        manifest,
        trials,
        curves,
        gap,
    })
}

fn write_trial(root: &Path, art: &TrialArtifacts) -> Result<()> {
    let dir = trial_dir(root, art.trial);
    let macros_dir = dir.join("macros");
    std::fs::create_dir_all(&macros_dir)?;
    write_csv_file(dir.join("metrics.csv"), &art.metrics)?;
    let mut events = std::io::BufWriter::new(std::fs::File::create(dir.join("macro_events.jsonl"))?);
    for event in &art.macro_history {
        serde_json::to_writer(&mut events, event)?;
        std::io::Write::write_all(&mut events, b"\n")?;
        let file = std::fs::File::create(macros_dir.join(format!("epoch_{:04}.jsonl", event.epoch)))?;
        write_slot_records(std::io::BufWriter::new(file), &event.slots)?;
    }
    std::io::Write::flush(&mut events)?;
    let file = std::fs::File::create(dir.join("q_params.json"))?;
    serde_json::to_writer(std::io::BufWriter::new(file), &art.dump)?;
    Ok(())
}
