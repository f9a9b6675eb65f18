//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

/// Plain recursive LCS with a memo table.
pub fn memo_lcs(x: &[usize], y: &[usize]) -> usize {
    fn go(x: &[usize], y: &[usize], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == x.len() || j == y.len() {
            return 0;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let v = if x[i] == y[j] {
            1 + go(x, y, i + 1, j + 1, memo)
        } else {
            go(x, y, i + 1, j, memo).max(go(x, y, i, j + 1, memo))
        };
        memo.insert((i, j), v);
        v
    }
    go(x, y, 0, 0, &mut HashMap::new())
}

/// Enumerates every in-episode window, counts it in an ordered map, ranks by
/// count then first position in the concatenated trace, and replays the
/// greedy overlap filter.
pub fn brute_frequency(
    segments: &[Vec<usize>],
    len: usize,
    capacity: usize,
    omega: f64,
) -> Vec<Vec<usize>> {
    let mut table: BTreeMap<Vec<usize>, (usize, usize)> = BTreeMap::new();
    let mut offset = 0;
    for seg in segments {
        if seg.len() >= len {
            for start in 0..=seg.len() - len {
                let key = seg[start..start + len].to_vec();
                let e = table.entry(key).or_insert((0, offset + start));
                e.0 += 1;
            }
        }
        offset += seg.len();
    }
    let mut ranked: Vec<(Vec<usize>, usize, usize)> =
        table.into_iter().map(|(k, (c, f))| (k, c, f)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));

    let mut admitted: Vec<Vec<usize>> = Vec::new();
    for (seq, _, _) in ranked {
        if admitted.len() == capacity {
            break;
        }
        let ok = admitted
            .iter()
            .all(|m| (memo_lcs(&seq, m) as f64) < omega * len as f64);
        if admitted.is_empty() || ok {
            admitted.push(seq);
        }
    }
    admitted
}

/// Random trace split into 1 to 5 episodes.
pub fn random_segments<R: Rng>(rng: &mut R, max_len: usize, alphabet: usize) -> Vec<Vec<usize>> {
    let total = rng.gen_range(0..=max_len);
    let flat: Vec<usize> = (0..total).map(|_| rng.gen_range(0..alphabet)).collect();
    let pieces = rng.gen_range(1..=5usize);
    let mut cuts: Vec<usize> = (1..pieces).map(|_| rng.gen_range(0..=total)).collect();
    cuts.push(0);
    cuts.push(total);
    cuts.sort_unstable();
    cuts.windows(2).map(|w| flat[w[0]..w[1]].to_vec()).collect()
}

/// Loss `½ (target − Q(s, index))²` evaluated directly from predictions.
pub fn half_squared_error(q: &[f64], index: usize, target: f64) -> f64 {
    0.5 * (target - q[index]).powi(2)
}

/// `|a − b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale.max(1e-12)
    }
}

/// Breadth-first distances (in atomic steps) from every cell to `goal` on a
/// grid with 4-neighbour moves; `None` for walls and unreachable cells.
pub fn grid_distances(
    width: usize,
    height: usize,
    walls: &[(usize, usize)],
    goal: (usize, usize),
) -> Vec<Option<usize>> {
    let idx = |x: usize, y: usize| y * width + x;
    let mut dist = vec![None; width * height];
    let blocked = |x: usize, y: usize| walls.contains(&(x, y));
    let mut queue = std::collections::VecDeque::new();
    dist[idx(goal.0, goal.1)] = Some(0);
    queue.push_back(goal);
    while let Some((x, y)) = queue.pop_front() {
        let d = dist[idx(x, y)].unwrap();
        let mut next = Vec::new();
        if x > 0 {
            next.push((x - 1, y));
        }
        if y > 0 {
            next.push((x, y - 1));
        }
        if x + 1 < width {
            next.push((x + 1, y));
        }
        if y + 1 < height {
            next.push((x, y + 1));
        }
        for (nx, ny) in next {
            if !blocked(nx, ny) && dist[idx(nx, ny)].is_none() {
                dist[idx(nx, ny)] = Some(d + 1);
                queue.push_back((nx, ny));
            }
        }
    }
    dist
}
