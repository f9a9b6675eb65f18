use crate::action::{ActionId, ActionSet, MacroDef, SlotRecord};
use crate::error::{Error, Result};
use crate::macros::{frequency_ranking, Candidate, Verdict};
use crate::trace::EpisodeTrace;

/// Parses a trace file: one episode per line, action ids separated by
/// whitespace or commas. Ids must be below `actions` when it is given.
pub fn parse_trace(text: &str, actions: Option<usize>) -> Result<EpisodeTrace> {
    let mut segments = Vec::new();
    for (l, line) in text.lines().enumerate() {
        let mut episode = Vec::new();
        let mut start = None;
        let bytes: Vec<(usize, char)> = line.char_indices().collect();
        for (k, &(_, ch)) in bytes.iter().enumerate() {
            let sep = ch.is_whitespace() || ch == ',';
            match (sep, start) {
                (false, None) => start = Some(k),
                (true, Some(s)) => {
                    episode.push(parse_id(line, &bytes, s, k, l + 1, actions)?);
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            episode.push(parse_id(line, &bytes, s, bytes.len(), l + 1, actions)?);
        }
        if !episode.is_empty() {
            segments.push(episode);
        }
    }
    Ok(EpisodeTrace::from_segments(segments))
}

fn parse_id(
    line: &str,
    chars: &[(usize, char)],
    from: usize,
    to: usize,
    line_no: usize,
    actions: Option<usize>,
) -> Result<ActionId> {
    let lo = chars[from].0;
    let hi = chars.get(to).map_or(line.len(), |c| c.0);
    let token = &line[lo..hi];
    let err = |message: String| Error::Parse {
        line: line_no,
        column: from + 1,
        message,
    };
    let id: ActionId = token
        .parse()
        .map_err(|_| err(format!("`{token}` is not an action id")))?;
    if let Some(n) = actions {
        if id >= n {
            return Err(err(format!("unknown action id {id} (expected 0..{n})")));
        }
    }
    Ok(id)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discovery {
    pub length: usize,
    pub candidates: Vec<Candidate>,
    pub macros: Vec<MacroDef>,
    pub longest_episode: usize,
}

impl Discovery {
    pub fn has_windows(&self) -> bool {
        !self.candidates.is_empty()
    }

    /// Slot records for the admitted macros, labelled by action id.
    pub fn slot_records(&self, atomic_count: usize) -> Result<Vec<SlotRecord>> {
        let labels: Vec<String> = (0..atomic_count.max(1)).map(|i| i.to_string()).collect();
        let mut set = ActionSet::with_capacity(&labels, self.macros.len())?;
        set.install(&self.macros)?;
        Ok(set.slot_records())
    }

    pub fn table(&self) -> String {
        if !self.has_windows() {
            return format!(
                "no windows of length {} (longest episode has {} actions)\n",
                self.length, self.longest_episode
            );
        }
        let seq_width = (self.length * 2).max(6);
        let mut out = format!(
            "{:>4}  {:seq_width$}  {:>6}  {:>10}  {:8}  lcs\n",
            "rank", "window", "count", "first_seen", "status"
        );
        for (rank, c) in self.candidates.iter().enumerate() {
            let window = c
                .window
                .sequence
                .iter()
                .map(|a| a.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            let (status, lcs) = match c.verdict {
                Verdict::Seed => ("seed", "-".to_string()),
                Verdict::Admitted { max_lcs } => ("admitted", max_lcs.to_string()),
                Verdict::Rejected { lcs, against } => {
                    ("rejected", format!("{lcs} (vs macro {against})"))
                }
                Verdict::Skipped => ("skipped", "-".to_string()),
            };
            out.push_str(&format!(
                "{:>4}  {:seq_width$}  {:>6}  {:>10}  {:8}  {}\n",
                rank + 1,
                window,
                c.window.count,
                c.window.first_seen,
                status,
                lcs
            ));
        }
        out
    }
}

/// Offline frequency discovery with the full admission record.
pub fn discover(trace: &EpisodeTrace, length: usize, capacity: usize, omega: f64) -> Result<Discovery> {
    if length < 2 {
        return Err(Error::Config(format!("length must be at least 2, got {length}")));
    }
    if capacity == 0 {
        return Err(Error::Config("capacity must be at least 1".into()));
    }
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(Error::Config(format!("omega must lie in (0, 1], got {omega}")));
    }
    let candidates = frequency_ranking(trace, length, capacity, omega);
    let macros = candidates
        .iter()
        .filter(|c| matches!(c.verdict, Verdict::Seed | Verdict::Admitted { .. }))
        .map(|c| MacroDef::new(c.window.sequence.clone()))
        .collect();
    Ok(Discovery {
        length,
        candidates,
        macros,
        longest_episode: trace.segments().iter().map(Vec::len).max().unwrap_or(0),
    })
}

/// Alphabet size implied by a trace when none is given.
pub fn implied_action_count(trace: &EpisodeTrace) -> usize {
    trace
        .segments()
        .iter()
        .flatten()
        .max()
        .map_or(0, |&m| m + 1)
}
