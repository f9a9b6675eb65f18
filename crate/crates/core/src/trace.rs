use serde::{Deserialize, Serialize};

use crate::action::ActionId;

/// Atomic actions executed since the last macro replacement, split by episode.
///
/// Macros are recorded expanded, so the trace is independent of whichever
/// macros happened to be installed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    segments: Vec<Vec<ActionId>>,
}

impl EpisodeTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_segments(segments: Vec<Vec<ActionId>>) -> Self {
        Self { segments }
    }

    /// Marks an episode boundary; windows never span it.
    pub fn begin_episode(&mut self) {
        if self.segments.last().map_or(true, |s| !s.is_empty()) {
            self.segments.push(Vec::new());
        }
    }

    pub fn record(&mut self, actions: &[ActionId]) {
        if self.segments.is_empty() {
            self.segments.push(Vec::new());
        }
        self.segments
            .last_mut()
            .expect("segment exists")
            .extend_from_slice(actions);
    }

    pub fn clear(&mut self) {
        self.segments.clear();
    }

    pub fn segments(&self) -> &[Vec<ActionId>] {
        &self.segments
    }

    /// Total number of recorded atomic actions.
    pub fn len(&self) -> usize {
        self.segments.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Contiguous length-`len` windows in recording order, per segment.
    pub fn windows(&self, len: usize) -> impl Iterator<Item = &[ActionId]> {
        self.segments
            .iter()
            .filter(move |s| len > 0 && s.len() >= len)
            .flat_map(move |s| s.windows(len))
    }
}
