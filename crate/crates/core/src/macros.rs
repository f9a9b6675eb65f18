//! Macro construction and slot replacement.
//!
//! Three constructors are provided: repeating each atomic action, mining the
//! most frequent action windows from the recent trace (filtered by longest
//! common subsequence overlap), and uniformly random sequences as a baseline.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action::{ActionId, ActionSet, MacroDef, ReplacementRecord};
use crate::error::{Error, Result};
use crate::trace::EpisodeTrace;

pub const DEFAULT_OMEGA: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MacroKind {
    None,
    Repetition,
    Frequency,
    Random,
}

impl std::fmt::Display for MacroKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MacroKind::None => "none",
            MacroKind::Repetition => "repetition",
            MacroKind::Frequency => "frequency",
            MacroKind::Random => "random",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacroPolicyConfig {
    pub kind: MacroKind,
    #[serde(default = "default_length")]
    pub length: usize,
    /// Number of macro slots; `None` means one per atomic action.
    #[serde(default)]
    pub capacity: Option<usize>,
    #[serde(default = "default_omega")]
    pub omega: f64,
}

fn default_length() -> usize {
    3
}

fn default_omega() -> f64 {
    DEFAULT_OMEGA
}

impl Default for MacroPolicyConfig {
    fn default() -> Self {
        Self {
            kind: MacroKind::None,
            length: default_length(),
            capacity: None,
            omega: DEFAULT_OMEGA,
        }
    }
}

impl MacroPolicyConfig {
    pub fn new(kind: MacroKind, length: usize) -> Self {
        Self {
            kind,
            length,
            ..Self::default()
        }
    }

    pub fn capacity_for(&self, atomic_count: usize) -> usize {
        self.capacity.unwrap_or(atomic_count)
    }

    pub fn validate(&self, atomic_count: usize) -> Result<()> {
        if self.length < 2 {
            return Err(Error::Config(format!(
                "macros.length must be at least 2, got {}",
                self.length
            )));
        }
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(Error::Config(format!(
                "macros.omega must lie in (0, 1], got {}",
                self.omega
            )));
        }
        let capacity = self.capacity_for(atomic_count);
        if capacity == 0 {
            return Err(Error::Config("macros.capacity must be at least 1".into()));
        }
        if self.kind == MacroKind::Repetition && capacity < atomic_count {
            return Err(Error::Config(format!(
                "repetition macros need capacity >= |A| = {atomic_count}, got {capacity}"
            )));
        }
        Ok(())
    }

    /// Runs the configured constructor. `None` yields an empty list.
    pub fn construct<R: Rng + ?Sized>(
        &self,
        atomic_count: usize,
        trace: &EpisodeTrace,
        rng: &mut R,
    ) -> Vec<MacroDef> {
        let capacity = self.capacity_for(atomic_count);
        match self.kind {
            MacroKind::None => Vec::new(),
            MacroKind::Repetition => repetition_macros(atomic_count, self.length),
            MacroKind::Frequency => frequency_macros(trace, self.length, capacity, self.omega),
            MacroKind::Random => random_macros(atomic_count, self.length, capacity, rng),
        }
    }

    /// Whether the constructor can run before any experience exists.
    pub fn installs_at_start(&self) -> bool {
        matches!(self.kind, MacroKind::Repetition | MacroKind::Random)
    }
}

/// One macro per atomic action: action `i` repeated `len` times.
pub fn repetition_macros(atomic_count: usize, len: usize) -> Vec<MacroDef> {
    (0..atomic_count).map(|a| MacroDef::new(vec![a; len])).collect()
}

/// `capacity` macros of `len` actions drawn i.i.d. uniformly.
pub fn random_macros<R: Rng + ?Sized>(
    atomic_count: usize,
    len: usize,
    capacity: usize,
    rng: &mut R,
) -> Vec<MacroDef> {
    (0..capacity)
        .map(|_| MacroDef::new((0..len).map(|_| rng.gen_range(0..atomic_count)).collect()))
        .collect()
}

/// Length of the longest (not necessarily contiguous) common subsequence.
pub fn lcs<T: PartialEq>(x: &[T], y: &[T]) -> usize {
    if x.is_empty() || y.is_empty() {
        return 0;
    }
    // Two rolling rows over the shorter sequence.
    let (long, short) = if x.len() >= y.len() { (x, y) } else { (y, x) };
    let mut prev = vec![0usize; short.len() + 1];
    let mut cur = vec![0usize; short.len() + 1];
    for a in long {
        for (j, b) in short.iter().enumerate() {
            cur[j + 1] = if a == b {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// A distinct action window with its occurrence statistics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowCount {
    pub sequence: Vec<ActionId>,
    pub count: usize,
    /// Position of the first occurrence in the flattened trace.
    pub first_seen: usize,
}

/// Counts every contiguous window of `len` actions (per episode segment) and
/// ranks them by count, then by first occurrence.
pub fn rank_windows(trace: &EpisodeTrace, len: usize) -> Vec<WindowCount> {
    let mut index: HashMap<&[ActionId], usize> = HashMap::new();
    let mut ranked: Vec<WindowCount> = Vec::new();
    let mut offset = 0;
    for segment in trace.segments() {
        if len > 0 && segment.len() >= len {
            for (i, w) in segment.windows(len).enumerate() {
                match index.get(w) {
                    Some(&k) => ranked[k].count += 1,
                    None => {
                        index.insert(w, ranked.len());
                        ranked.push(WindowCount {
                            sequence: w.to_vec(),
                            count: 1,
                            first_seen: offset + i,
                        });
                    }
                }
            }
        }
        offset += segment.len();
    }
    // Insertion order is first-occurrence order, so a stable sort keeps ties.
    ranked.sort_by(|a, b| b.count.cmp(&a.count));
    ranked
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Verdict {
    /// The top-ranked window; admitted unconditionally.
    Seed,
    Admitted { max_lcs: usize },
    /// Overlaps too much with admitted macro number `against`.
    Rejected { lcs: usize, against: usize },
    /// Capacity was reached before this window was examined.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    #[serde(flatten)]
    pub window: WindowCount,
    pub verdict: Verdict,
}

/// Full ranking with the admission decision for every window.
pub fn frequency_ranking(
    trace: &EpisodeTrace,
    len: usize,
    capacity: usize,
    omega: f64,
) -> Vec<Candidate> {
    let threshold = omega * len as f64;
    let mut admitted: Vec<Vec<ActionId>> = Vec::new();
    rank_windows(trace, len)
        .into_iter()
        .map(|window| {
            let verdict = if admitted.len() >= capacity {
                Verdict::Skipped
            } else if admitted.is_empty() {
                admitted.push(window.sequence.clone());
                Verdict::Seed
            } else {
                let (against, overlap) = admitted
                    .iter()
                    .enumerate()
                    .map(|(k, m)| (k, lcs(&window.sequence, m)))
                    .fold((0, 0), |best, cur| if cur.1 > best.1 { cur } else { best });
                if (overlap as f64) < threshold {
                    admitted.push(window.sequence.clone());
                    Verdict::Admitted { max_lcs: overlap }
                } else {
                    Verdict::Rejected {
                        lcs: overlap,
                        against,
                    }
                }
            };
            Candidate { window, verdict }
        })
        .collect()
}

/// Most frequent sufficiently-distinct windows, at most `capacity` of them.
/// A candidate is admitted iff its LCS with every admitted macro is strictly
/// below `omega * len`. Returns an empty list when no window exists.
pub fn frequency_macros(
    trace: &EpisodeTrace,
    len: usize,
    capacity: usize,
    omega: f64,
) -> Vec<MacroDef> {
    frequency_ranking(trace, len, capacity, omega)
        .into_iter()
        .filter(|c| matches!(c.verdict, Verdict::Seed | Verdict::Admitted { .. }))
        .map(|c| MacroDef::new(c.window.sequence))
        .collect()
}

/// Installs `new_list` into the macro slots: cut at capacity, pad with
/// disabled empty slots. Atomic outputs are untouched.
pub fn replace_macros(set: &mut ActionSet, new_list: &[MacroDef]) -> Result<ReplacementRecord> {
    set.install(new_list)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const A: usize = 0;
    const B: usize = 1;

    fn aab_trace() -> EpisodeTrace {
        EpisodeTrace::from_segments(vec![vec![A, A, B, A, A, B, A, A, B]])
    }

    #[test]
    fn repetition_one_macro_per_action() {
        let ms = repetition_macros(2, 3);
        assert_eq!(ms, vec![MacroDef::new(vec![0, 0, 0]), MacroDef::new(vec![1, 1, 1])]);
        assert_eq!(repetition_macros(1, 5), vec![MacroDef::new(vec![0; 5])]);
        for n in 1..8 {
            assert_eq!(repetition_macros(n, 4).len(), n);
        }
    }

    #[test]
    fn lcs_examples() {
        assert_eq!(lcs(&[A, A, B], &[A, B, A]), 2);
        assert_eq!(lcs(&[1, 2, 3, 4], &[1, 2, 3, 4]), 4);
        assert_eq!(lcs::<usize>(&[1, 2], &[]), 0);
        assert_eq!(lcs::<usize>(&[], &[]), 0);
    }

    #[test]
    fn aab_window_counts() {
        let ranked = rank_windows(&aab_trace(), 3);
        let summary: Vec<(Vec<usize>, usize)> =
            ranked.iter().map(|w| (w.sequence.clone(), w.count)).collect();
        assert_eq!(
            summary,
            vec![(vec![A, A, B], 3), (vec![A, B, A], 2), (vec![B, A, A], 2)]
        );
    }

    #[test]
    fn aab_frequency_admits_all_at_default_omega() {
        let ms = frequency_macros(&aab_trace(), 3, 3, 0.8);
        let seqs: Vec<Vec<usize>> = ms.into_iter().map(|m| m.sequence).collect();
        assert_eq!(seqs, vec![vec![A, A, B], vec![A, B, A], vec![B, A, A]]);
    }

    #[test]
    fn aab_frequency_tight_omega_keeps_seed_only() {
        let ms = frequency_macros(&aab_trace(), 3, 3, 0.6);
        assert_eq!(ms, vec![MacroDef::new(vec![A, A, B])]);
        let ranking = frequency_ranking(&aab_trace(), 3, 3, 0.6);
        assert_eq!(ranking[1].verdict, Verdict::Rejected { lcs: 2, against: 0 });
    }

    #[test]
    fn short_trace_yields_nothing() {
        let t = EpisodeTrace::from_segments(vec![vec![A, B]]);
        assert!(frequency_macros(&t, 3, 3, 0.8).is_empty());
        assert!(frequency_macros(&EpisodeTrace::new(), 3, 3, 0.8).is_empty());
    }

    #[test]
    fn frequency_respects_capacity() {
        let ms = frequency_macros(&aab_trace(), 3, 2, 0.8);
        assert_eq!(ms.len(), 2);
        let ranking = frequency_ranking(&aab_trace(), 3, 2, 0.8);
        assert_eq!(ranking[2].verdict, Verdict::Skipped);
    }

    #[test]
    fn omega_one_admits_distinct_windows() {
        let t = EpisodeTrace::from_segments(vec![vec![0, 1, 2, 0, 1, 2, 0]]);
        let ms = frequency_macros(&t, 3, 10, 1.0);
        assert_eq!(ms.len(), rank_windows(&t, 3).len());
    }

    #[test]
    fn random_macros_are_seeded() {
        let draw = |seed| random_macros(4, 3, 4, &mut ChaCha8Rng::seed_from_u64(seed));
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
        let single = random_macros(1, 3, 2, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(single.iter().all(|m| m.sequence == vec![0, 0, 0]));
    }

    #[test]
    fn replace_fill_and_disable() {
        let mut set = ActionSet::with_capacity(&["a", "b"], 3).unwrap();
        let rec = replace_macros(
            &mut set,
            &[MacroDef::new(vec![0, 1]), MacroDef::new(vec![1, 1])],
        )
        .unwrap();
        assert_eq!(rec.installed, 2);
        assert_eq!(set.enabled_mask(), vec![true, true, true, true, false]);
        assert!(set.slots()[2].is_empty());
    }

    #[test]
    fn replace_cuts_excess() {
        let mut set = ActionSet::with_capacity(&["a", "b"], 3).unwrap();
        let list: Vec<MacroDef> = (0..4).map(|i| MacroDef::new(vec![i % 2, 1])).collect();
        let rec = replace_macros(&mut set, &list).unwrap();
        assert_eq!(rec.discarded, 1);
        assert_eq!(set.slots(), &list[..3]);
    }

    #[test]
    fn replace_with_nothing_disables_all() {
        let mut set = ActionSet::new(&["a", "b"]).unwrap();
        replace_macros(&mut set, &repetition_macros(2, 3)).unwrap();
        replace_macros(&mut set, &[]).unwrap();
        assert_eq!(set.enabled_count(), 2);
        assert_eq!(set.output_arity(), 4);
    }

    #[test]
    fn config_validation() {
        let cfg = MacroPolicyConfig {
            kind: MacroKind::Repetition,
            length: 3,
            capacity: Some(1),
            omega: 0.8,
        };
        assert!(cfg.validate(2).is_err());
        assert!(MacroPolicyConfig::new(MacroKind::Frequency, 1).validate(2).is_err());
        let mut bad = MacroPolicyConfig::new(MacroKind::Frequency, 3);
        bad.omega = 0.0;
        assert!(bad.validate(2).is_err());
        assert!(MacroPolicyConfig::new(MacroKind::Frequency, 5).validate(2).is_ok());
    }
}
