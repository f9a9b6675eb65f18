use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::{ActionSet, ReplacementRecord, SlotRecord};
use crate::analysis::{action_gap, mean_and_std, DecisionPoint, EpisodeRecord, MetricsRow};
use crate::envs::{Environment, Observation};
use crate::error::{Error, Result};
use crate::macros::{replace_macros, MacroPolicyConfig};
use crate::replay::{ReplayBuffer, Transition};
use crate::trace::EpisodeTrace;

use super::agent::{execute_output, q_update, select_output};
use super::config::{AgentConfig, Exploration};
use super::QFunction;

// Independent RNG streams derived from the trial seed.
const STREAM_ACT: u64 = 0x0A11_CE00;
const STREAM_MACROS: u64 = 0x00AC_2000;
const STREAM_EVAL: u64 = 0x0E7A_1000;

fn stream(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt)
}

/// A macro installation: the initial one (epoch 0) or a scheduled replacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroEvent {
    pub epoch: usize,
    pub env_steps: usize,
    /// Atomic actions the constructor saw.
    pub trace_len: usize,
    pub record: ReplacementRecord,
    pub slots: Vec<SlotRecord>,
    pub epsilon_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub returns: Vec<f64>,
    pub mean_return: f64,
    pub std_return: f64,
    /// Mean action gap over every evaluation decision.
    pub action_gap_mean: f64,
    pub records: Vec<EpisodeRecord>,
}

/// Rolls out the ε-greedy policy for `episodes` episodes and reports the
/// undiscounted returns.
pub fn evaluate<E: Environment, Q: QFunction>(
    env: &mut E,
    set: &ActionSet,
    qf: &Q,
    episodes: usize,
    epsilon_eval: f64,
    seed: u64,
) -> Result<Evaluation> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("evaluation needs at least one episode".into()));
    }
    let mut rng = stream(seed, STREAM_EVAL);
    let enabled = set.enabled_mask();
    let mut returns = Vec::with_capacity(episodes);
    let mut records = Vec::with_capacity(episodes);
    let mut gaps = Vec::new();
    for ep in 0..episodes {
        let mut obs = env.reset(seed.wrapping_add(ep as u64));
        let mut record = EpisodeRecord::default();
        loop {
            let q = qf.predict(&obs);
            let idx = select_output(&q, &enabled, epsilon_eval, &mut rng)?;
            if let Ok(g) = action_gap(&q, &enabled) {
                gaps.push(g);
            }
            let ex = execute_output(env, set, idx, 1.0)?;
            record.decisions.push(DecisionPoint {
                state: obs.state,
                q,
                enabled: enabled.clone(),
                output: idx,
                reward: ex.reward_sum,
                tau: ex.tau,
            });
            obs = ex.observation;
            if ex.terminal || ex.truncated {
                break;
            }
        }
        returns.push(record.total_reward());
        records.push(record);
    }
    let (mean_return, std_return) = mean_and_std(&returns);
    let action_gap_mean = if gaps.is_empty() {
        0.0
    } else {
        mean_and_std(&gaps).0
    };
    Ok(Evaluation {
        returns,
        mean_return,
        std_return,
        action_gap_mean,
        records,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput<Q> {
    pub qf: Q,
    pub set: ActionSet,
    pub metrics: Vec<MetricsRow>,
    pub macro_history: Vec<MacroEvent>,
    pub final_evaluation: Evaluation,
    pub env_steps: usize,
    pub decisions: usize,
    /// Decisions that picked a disabled output (must stay zero).
    pub disabled_selections: usize,
    pub stale_dropped: usize,
}

/// One training trial: environment, action set, Q-function, replay and trace.
///
/// `run_epoch` advances by `epoch_length` environment steps, performs any
/// scheduled macro replacement, then evaluates.
pub struct Trainer<E: Environment, Q: QFunction> {
    env: E,
    eval_env: E,
    set: ActionSet,
    qf: Q,
    target: Option<Q>,
    config: AgentConfig,
    policy: MacroPolicyConfig,
    schedule: Vec<usize>,
    trial: usize,
    replay: ReplayBuffer,
    trace: EpisodeTrace,
    exploration: Exploration,
    act_rng: ChaCha8Rng,
    macro_rng: ChaCha8Rng,
    obs: Observation,
    episodes: u64,
    epoch: usize,
    env_steps: usize,
    decisions: usize,
    steps_since_sync: usize,
    disabled_selections: usize,
    stale_dropped: usize,
    metrics: Vec<MetricsRow>,
    history: Vec<MacroEvent>,
    last_eval: Option<Evaluation>,
}

impl<E: Environment, Q: QFunction> Trainer<E, Q> {
    pub fn new(
        env: E,
        set: ActionSet,
        qf: Q,
        config: AgentConfig,
        policy: MacroPolicyConfig,
        trial: usize,
    ) -> Result<Self> {
        config.validate()?;
        if set.atomic_count() != env.action_count() {
            return Err(Error::InvalidActionSet(format!(
                "action set has {} atomic actions, environment has {}",
                set.atomic_count(),
                env.action_count()
            )));
        }
        if qf.output_arity() != set.output_arity() {
            return Err(Error::InvalidActionSet(format!(
                "Q-function has {} outputs, action set needs {}",
                qf.output_arity(),
                set.output_arity()
            )));
        }
        if policy.kind != crate::macros::MacroKind::None {
            policy.validate(set.atomic_count())?;
        }
        let schedule = match policy.kind {
            crate::macros::MacroKind::None => Vec::new(),
            _ => config.replacement_schedule(),
        };
        if let Some(&bad) = schedule.iter().find(|&&k| k == 0 || k > config.epochs) {
            return Err(Error::Config(format!(
                "agent.replacement_epochs: epoch {bad} is outside 1..={}",
                config.epochs
            )));
        }
        let mut env = env;
        let eval_env = env.clone();
        let seed = config.seed;
        let obs = env.reset(seed.wrapping_mul(1_000_003));
        let target = qf.uses_target_copy().then(|| qf.clone());
        let mut trainer = Self {
            eval_env,
            set,
            target,
            exploration: Exploration::from_config(&config),
            replay: ReplayBuffer::new(config.replay_capacity),
            trace: EpisodeTrace::new(),
            act_rng: stream(seed, STREAM_ACT),
            macro_rng: stream(seed, STREAM_MACROS),
            obs,
            env,
            qf,
            config,
            policy,
            schedule,
            trial,
            episodes: 0,
            epoch: 0,
            env_steps: 0,
            decisions: 0,
            steps_since_sync: 0,
            disabled_selections: 0,
            stale_dropped: 0,
            metrics: Vec::new(),
            history: Vec::new(),
            last_eval: None,
        };
        trainer.trace.begin_episode();
        if trainer.policy.installs_at_start() {
            trainer.install_macros()?;
        }
        Ok(trainer)
    }

    pub fn set(&self) -> &ActionSet {
        &self.set
    }

    pub fn qf(&self) -> &Q {
        &self.qf
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn trace(&self) -> &EpisodeTrace {
        &self.trace
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn env_steps(&self) -> usize {
        self.env_steps
    }

    pub fn epsilon(&self) -> f64 {
        self.exploration.value()
    }

    pub fn metrics(&self) -> &[MetricsRow] {
        &self.metrics
    }

    pub fn macro_history(&self) -> &[MacroEvent] {
        &self.history
    }

    pub fn is_finished(&self) -> bool {
        self.epoch >= self.config.epochs
    }

    fn install_macros(&mut self) -> Result<MacroEvent> {
        let list = self
            .policy
            .construct(self.set.atomic_count(), &self.trace, &mut self.macro_rng);
        let record = replace_macros(&mut self.set, &list)?;
        let event = MacroEvent {
            epoch: self.epoch,
            env_steps: self.env_steps,
            trace_len: self.trace.len(),
            record,
            slots: self.set.slot_records(),
            epsilon_after: self.exploration.value(),
        };
        self.trace.clear();
        self.trace.begin_episode();
        self.history.push(event.clone());
        Ok(event)
    }

    /// One decision: act, store, learn.
    fn step(&mut self) -> Result<()> {
        let enabled = self.set.enabled_mask();
        let q = self.qf.predict(&self.obs);
        let idx = select_output(&q, &enabled, self.exploration.value(), &mut self.act_rng)?;
        if !self.set.is_enabled(idx) {
            self.disabled_selections += 1;
        }
        let ex = execute_output(&mut self.env, &self.set, idx, self.config.gamma)?;
        self.trace.record(&ex.actions);
        let next = ex.observation.clone();
        self.replay.push(Transition {
            state: std::mem::replace(&mut self.obs, next),
            output_index: idx,
            reward_cum: ex.reward_cum,
            tau: ex.tau,
            next_state: ex.observation,
            terminal: ex.terminal,
            truncated: ex.truncated,
            slot_version: self.set.slot_version(idx),
        });
        self.env_steps += ex.tau;
        self.steps_since_sync += ex.tau;
        self.decisions += 1;
        self.exploration.advance(ex.tau);

        if self.replay.len() >= self.config.learning_starts()
            && self.decisions % self.config.train_every == 0
        {
            let batch = self.replay.sample(self.config.batch, &mut self.act_rng)?;
            let stats = q_update(
                &mut self.qf,
                &batch,
                &self.set,
                self.config.gamma,
                self.config.alpha,
                self.target.as_ref(),
            )?;
            self.stale_dropped += stats.dropped_stale;
        }
        if self.target.is_some() && self.steps_since_sync >= self.config.target_sync_period {
            self.target = Some(self.qf.clone());
            self.steps_since_sync = 0;
        }
        if ex.terminal || ex.truncated {
            self.episodes += 1;
            let seed = self
                .config
                .seed
                .wrapping_mul(1_000_003)
                .wrapping_add(self.episodes);
            self.obs = self.env.reset(seed);
            self.trace.begin_episode();
        }
        Ok(())
    }

    /// Trains one epoch, applies a scheduled replacement, evaluates, and
    /// returns the epoch's metrics row.
    pub fn run_epoch(&mut self) -> Result<MetricsRow> {
        if self.is_finished() {
            return Err(Error::InvalidArgument("all epochs already run".into()));
        }
        self.epoch += 1;
        let end = self.epoch * self.config.epoch_length;
        while self.env_steps < end {
            self.step()?;
        }
        let macro_event = self.schedule.contains(&self.epoch);
        if macro_event {
            self.install_macros()?;
            self.exploration.reset_to(self.config.epsilon_reset);
            if let Some(e) = self.history.last_mut() {
                e.epsilon_after = self.exploration.value();
            }
        }
        let eval_seed = self
            .config
            .seed
            .wrapping_mul(7_919)
            .wrapping_add(self.epoch as u64 * 1_000_000);
        let eval = evaluate(
            &mut self.eval_env,
            &self.set,
            &self.qf,
            self.config.eval_episodes,
            self.config.epsilon_eval,
            eval_seed,
        )?;
        let row = MetricsRow {
            trial: self.trial,
            epoch: self.epoch,
            env_steps: self.env_steps,
            mean_return: eval.mean_return,
            std_return: eval.std_return,
            action_gap_mean: eval.action_gap_mean,
            epsilon: self.exploration.value(),
            macro_event,
        };
        self.metrics.push(row.clone());
        self.last_eval = Some(eval);
        Ok(row)
    }

    pub fn finish(self) -> Result<TrainOutput<Q>> {
        let final_evaluation = self
            .last_eval
            .ok_or_else(|| Error::InvalidArgument("no epoch has been run".into()))?;
        Ok(TrainOutput {
            qf: self.qf,
            set: self.set,
            metrics: self.metrics,
            macro_history: self.history,
            final_evaluation,
            env_steps: self.env_steps,
            decisions: self.decisions,
            disabled_selections: self.disabled_selections,
            stale_dropped: self.stale_dropped,
        })
    }
}

/// Runs every configured epoch of one trial.
pub fn train_phase<E: Environment, Q: QFunction>(
    env: E,
    set: ActionSet,
    qf: Q,
    config: &AgentConfig,
    policy: &MacroPolicyConfig,
    trial: usize,
) -> Result<TrainOutput<Q>> {
    let mut trainer = Trainer::new(env, set, qf, config.clone(), policy.clone(), trial)?;
    while !trainer.is_finished() {
        trainer.run_epoch()?;
    }
    trainer.finish()
}
