use macroq::action::{ActionSet, MacroDef};
use macroq::envs::{Cell, Chain, Environment, Gridworld, Observation, TabularModel};
use macroq::macros::{random_macros, replace_macros, MacroKind, MacroPolicyConfig};
use macroq::qlearn::{
    execute_output, q_update, select_output, smdp_target, train_phase, AgentConfig,
    TabularQ,
};
use macroq::replay::Transition;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn within_three_sigma(count: usize, n: usize, p: f64) -> bool {
    let mean = n as f64 * p;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    (count as f64 - mean).abs() <= 3.0 * sigma
}

#[test]
fn full_exploration_is_uniform_over_enabled() {
    let enabled = [true, false, true, true, false, true, true];
    let q = [0.0, 100.0, 1.0, 2.0, 50.0, 3.0, 4.0];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 100_000;
    let mut counts = [0usize; 7];
    for _ in 0..draws {
        counts[select_output(&q, &enabled, 1.0, &mut rng).unwrap()] += 1;
    }
    assert_eq!(counts[1] + counts[4], 0);
    for (i, &c) in counts.iter().enumerate() {
        if enabled[i] {
            assert!(within_three_sigma(c, draws, 0.2), "output {i}: {c}");
        }
    }
}

#[test]
fn greedy_selection_breaks_ties_low() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let q = [1.0, 3.0, 3.0, 9.0];
    assert_eq!(select_output(&q, &[true, true, true, false], 0.0, &mut rng).unwrap(), 1);
    assert!(select_output(&q, &[false; 4], 0.0, &mut rng).is_err());
    assert!(select_output(&q, &[true; 4], 1.5, &mut rng).is_err());
}

#[test]
fn random_macro_symbols_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let atomic = 4;
    let mut counts = [0usize; 4];
    let mut total = 0;
    for _ in 0..2_000 {
        for m in random_macros(atomic, 5, 10, &mut rng) {
            assert_eq!(m.len(), 5);
            for a in m.sequence {
                counts[a] += 1;
                total += 1;
            }
        }
    }
    for &c in &counts {
        assert!(within_three_sigma(c, total, 0.25), "{counts:?}");
    }
}

#[test]
fn macro_execution_matches_stepwise_on_grid() {
    let grid = Gridworld::new(
        5,
        4,
        &[Cell { x: 1, y: 0 }, Cell { x: 1, y: 1 }, Cell { x: 3, y: 2 }],
        Cell { x: 4, y: 0 },
    )
    .unwrap();
    let gamma = 0.97;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let macros = random_macros(4, 4, 8, &mut rng);
    let mut set = ActionSet::with_capacity(&grid.action_labels(), macros.len()).unwrap();
    replace_macros(&mut set, &macros).unwrap();
    for s in grid.states() {
        if grid.is_terminal_state(s) {
            continue;
        }
        for idx in 0..set.output_arity() {
            let mut env = grid.clone();
            env.reset_to(s).unwrap();
            let ex = execute_output(&mut env, &set, idx, gamma).unwrap();

            let mut state = s;
            let mut reward = 0.0;
            let mut discount = 1.0;
            let mut visited = Vec::new();
            for a in set.expand_output_index(idx).unwrap() {
                let (next, r, term) = grid.model_step(state, a);
                reward += discount * r;
                discount *= gamma;
                visited.push(next);
                state = next;
                if term {
                    break;
                }
            }
            let got: Vec<usize> = ex.visited.iter().map(|o| o.state).collect();
            assert_eq!(got, visited);
            assert_eq!(ex.reward_cum.to_bits(), reward.to_bits());
            assert_eq!(ex.tau, visited.len());
        }
    }
}

#[test]
fn repeated_terminal_updates_approach_reward() {
    let mut qf = TabularQ::new(2, 2);
    let set = ActionSet::with_capacity(&["l", "r"], 0).unwrap();
    let t = Transition {
        state: Observation::one_hot(0, 2),
        output_index: 1,
        reward_cum: 1.0,
        tau: 1,
        next_state: Observation::one_hot(1, 2),
        terminal: true,
        truncated: false,
        slot_version: 0,
    };
    for k in 1..=20 {
        q_update(&mut qf, &[&t], &set, 0.9, 0.5, None::<&TabularQ>).unwrap();
        let expected = 1.0 - 0.5f64.powi(k);
        assert!((qf.row(0)[1] - expected).abs() < 1e-15);
    }
    assert_eq!(qf.row(0)[0], 0.0);
}

#[test]
fn chain_agent_with_macros_reaches_goal() {
    let env = Chain::new(12, 0.0).unwrap();
    let set = ActionSet::new(&env.action_labels()).unwrap();
    let qf = TabularQ::new(12, set.output_arity());
    let mut cfg = AgentConfig::with_gamma(0.95);
    cfg.epochs = 10;
    cfg.epoch_length = 1_000;
    let out = train_phase(env, set, qf, &cfg, &MacroPolicyConfig::new(MacroKind::Repetition, 3), 0).unwrap();
    assert_eq!(out.disabled_selections, 0);
    assert_eq!(out.metrics.last().unwrap().mean_return, 1.0);
    let steps: Vec<usize> = out.metrics.iter().map(|r| r.env_steps).collect();
    assert!(steps.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn replaced_slots_drop_stale_transitions() {
    let env = Chain::new(8, 0.0).unwrap();
    let set = ActionSet::new(&env.action_labels()).unwrap();
    let qf = TabularQ::new(8, set.output_arity());
    let mut cfg = AgentConfig::with_gamma(0.9);
    cfg.epochs = 6;
    cfg.epoch_length = 400;
    cfg.replacement_epochs = Some(vec![1, 2, 3, 4, 5]);
    let policy = MacroPolicyConfig::new(MacroKind::Random, 3);
    let out = train_phase(env, set, qf, &cfg, &policy, 0).unwrap();
    assert_eq!(out.disabled_selections, 0);
    // Initial install plus five replacements.
    assert_eq!(out.macro_history.len(), 6);
    let changed: usize = out.macro_history[1..].iter().map(|e| e.record.changed_slots.len()).sum();
    assert!(changed > 0);
    assert!(out.stale_dropped > 0);
}

#[test]
fn installed_macros_expand_as_recorded() {
    let mut set = ActionSet::with_capacity(&["a", "b", "c"], 2).unwrap();
    replace_macros(&mut set, &[MacroDef::new(vec![2, 0, 1])]).unwrap();
    assert_eq!(set.expand_output_index(3).unwrap(), vec![2, 0, 1]);
    assert!(set.expand_output_index(4).is_err());
    assert!(set.expand_output_index(5).is_err());
}

proptest! {
    #[test]
    fn single_step_target_is_one_step_backup(
        r in -10.0f64..10.0,
        gamma in 0.0f64..=1.0,
        q in prop::collection::vec(-5.0f64..5.0, 1..6),
        terminal: bool,
    ) {
        let enabled = vec![true; q.len()];
        let got = smdp_target(r, 1, gamma, &q, &enabled, terminal).unwrap();
        let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let expected = if terminal { r } else { r + gamma * max };
        prop_assert_eq!(got.to_bits(), expected.to_bits());
    }
}
