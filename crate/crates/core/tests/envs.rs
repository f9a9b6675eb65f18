mod common;

use macroq::action::ActionSet;
use macroq::analysis::{value_iteration, ExplicitModel};
use macroq::envs::{Catch, Cell, Chain, Environment, Gridworld, Observation, TabularModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Stream = Vec<(Observation, f64, bool, bool)>;

fn replay<E: Environment>(mut env: E, seed: u64, actions: &[usize]) -> Stream {
    let mut out = vec![(env.reset(seed), 0.0, false, false)];
    let mut episode = 0;
    for &a in actions {
        let step = env.step(a).unwrap();
        let done = step.done();
        out.push((step.observation, step.reward, step.terminal, step.truncated));
        if done {
            episode += 1;
            out.push((env.reset(seed + episode), 0.0, false, false));
        }
    }
    out
}

fn check_determinism<E: Environment>(make: impl Fn() -> E) {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let count = make().action_count();
    for k in 0..100u64 {
        let actions: Vec<usize> = (0..200).map(|_| rng.gen_range(0..count)).collect();
        let a = replay(make(), k, &actions);
        let b = replay(make(), k, &actions);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.0.state, y.0.state);
            let fx: Vec<u64> = x.0.features.iter().map(|v| v.to_bits()).collect();
            let fy: Vec<u64> = y.0.features.iter().map(|v| v.to_bits()).collect();
            assert_eq!(fx, fy);
            assert_eq!(x.1.to_bits(), y.1.to_bits());
            assert_eq!((x.2, x.3), (y.2, y.3));
        }
    }
}

fn walled_grid() -> Gridworld {
    let walls = [Cell { x: 1, y: 0 }, Cell { x: 1, y: 1 }, Cell { x: 3, y: 2 }, Cell { x: 3, y: 3 }];
    Gridworld::new(5, 4, &walls, Cell { x: 4, y: 0 }).unwrap()
}

#[test]
fn replays_are_bitwise_identical() {
    check_determinism(|| Chain::new(7, -0.01).unwrap().with_max_episode_steps(40));
    check_determinism(|| walled_grid().with_max_episode_steps(60));
    check_determinism(|| Catch::new(6, 3).unwrap());
}

fn check_table<M: TabularModel>(model: &M) {
    for s in model.states() {
        if model.is_terminal_state(s) {
            continue;
        }
        for a in 0..model.action_count() {
            let (next, reward, terminal) = model.model_step(s, a);
            let mut env = model.clone();
            let start = env.reset_to(s).unwrap();
            assert_eq!(start, model.observation_of(s));
            let step = env.step(a).unwrap();
            assert_eq!(step.observation.state, next, "state {s} action {a}");
            assert_eq!(step.observation, model.observation_of(next));
            assert_eq!(step.reward, reward);
            assert_eq!(step.terminal, terminal);
            assert_eq!(model.is_terminal_state(next), terminal);
        }
    }
}

#[test]
fn transition_tables_match_simulation() {
    check_table(&Chain::new(9, -0.05).unwrap());
    check_table(&walled_grid());
    check_table(&Gridworld::new(3, 3, &[], Cell { x: 2, y: 2 }).unwrap());
}

fn check_grid_values(width: usize, height: usize, walls: &[(usize, usize)], goal: (usize, usize), gamma: f64) {
    let cells: Vec<Cell> = walls.iter().map(|&(x, y)| Cell { x, y }).collect();
    let grid = Gridworld::new(width, height, &cells, Cell { x: goal.0, y: goal.1 }).unwrap();
    let set = ActionSet::with_capacity(&grid.action_labels(), 0).unwrap();
    let model = ExplicitModel::build(&grid, &set, gamma).unwrap();
    let sol = value_iteration(&model, gamma, 1e-12).unwrap();
    let dist = common::grid_distances(width, height, walls, goal);
    for y in 0..height {
        for x in 0..width {
            let s = y * width + x;
            let expected = match dist[s] {
                Some(0) | None => 0.0,
                Some(d) => gamma.powi(d as i32 - 1),
            };
            assert!(
                (sol.values[s] - expected).abs() < 1e-9,
                "cell ({x},{y}): {} vs {expected}",
                sol.values[s]
            );
        }
    }
}

#[test]
fn open_grid_value_is_gamma_cubed() {
    let dist = common::grid_distances(3, 3, &[], (2, 2));
    assert_eq!(dist[0], Some(4));
    for gamma in [0.5, 0.9, 0.99] {
        check_grid_values(3, 3, &[], (2, 2), gamma);
        let grid = Gridworld::new(3, 3, &[], Cell { x: 2, y: 2 }).unwrap();
        let set = ActionSet::with_capacity(&grid.action_labels(), 0).unwrap();
        let model = ExplicitModel::build(&grid, &set, gamma).unwrap();
        let v0 = value_iteration(&model, gamma, 1e-12).unwrap().values[0];
        assert!((v0 - gamma * gamma * gamma).abs() < 1e-12);
    }
}

#[test]
fn walled_grid_values_follow_shortest_paths() {
    check_grid_values(5, 4, &[(1, 0), (1, 1), (3, 2), (3, 3)], (4, 0), 0.9);
    check_grid_values(6, 5, &[(2, 0), (2, 1), (2, 2), (2, 3), (4, 1), (4, 2), (4, 3), (4, 4)], (5, 0), 0.95);
}

#[test]
fn layout_file_matches_explicit_construction() {
    let text = "S.#..\n..#..\n....#\n##..G\n";
    let from_text = Gridworld::from_layout(text).unwrap();
    let walls = [
        Cell { x: 2, y: 0 },
        Cell { x: 2, y: 1 },
        Cell { x: 4, y: 2 },
        Cell { x: 0, y: 3 },
        Cell { x: 1, y: 3 },
    ];
    let explicit = Gridworld::new(5, 4, &walls, Cell { x: 4, y: 3 }).unwrap();
    for s in explicit.states() {
        for a in 0..4 {
            assert_eq!(from_text.model_step(s, a), explicit.model_step(s, a));
        }
    }
}

#[test]
fn catch_episode_lengths_and_padding() {
    for grid in 5..9 {
        let mut env = Catch::new(grid, 4).unwrap();
        for seed in 0..20 {
            let first = env.reset(seed);
            let frame = grid * grid;
            assert_eq!(first.features.len(), 4 * frame);
            assert!(first.features[..3 * frame].iter().all(|&v| v == 0.0));
            assert!(first.features[3 * frame..].iter().any(|&v| v == 1.0));
            let mut steps = 0;
            loop {
                let out = env.step(1).unwrap();
                steps += 1;
                if out.done() {
                    assert!(out.terminal);
                    assert!(out.reward == 1.0 || out.reward == -1.0);
                    break;
                }
                assert_eq!(out.reward, 0.0);
            }
            assert_eq!(steps, grid - 1);
            assert!(env.step(1).is_err());
        }
    }
}
