//! Atomic actions, macro slots and the expanded output space.
//!
//! An [`ActionSet`] owns `|A|` atomic actions followed by a fixed number of
//! macro slots. Output index `i < |A|` is atomic action `i`; output index
//! `|A| + j` is macro slot `j`. The capacity never changes after
//! construction, so the output arity seen by a Q-function is constant for the
//! whole run even when macros are replaced.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ActionId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicAction {
    pub id: ActionId,
    pub label: String,
}

/// An open-loop sequence of atomic actions occupying one macro slot.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MacroDef {
    pub sequence: Vec<ActionId>,
    pub enabled: bool,
}

impl MacroDef {
    pub fn new(sequence: Vec<ActionId>) -> Self {
        Self {
            sequence,
            enabled: true,
        }
    }

    /// An empty, disabled slot.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }
}

/// What a call to [`ActionSet::install`] changed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplacementRecord {
    pub version: u64,
    pub installed: usize,
    pub discarded: usize,
    pub disabled: usize,
    /// Slots whose content differs from before the replacement.
    pub changed_slots: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    atomics: Vec<AtomicAction>,
    slots: Vec<MacroDef>,
    slot_versions: Vec<u64>,
    version: u64,
}

impl ActionSet {
    /// Builds a set with one macro slot per atomic action (`|M| = |A|`).
    pub fn new<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        Self::with_capacity(labels, labels.len())
    }

    pub fn with_capacity<S: AsRef<str>>(labels: &[S], capacity: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidActionSet(
                "at least one atomic action is required".into(),
            ));
        }
        let atomics = labels
            .iter()
            .enumerate()
            .map(|(id, l)| AtomicAction {
                id,
                label: l.as_ref().to_string(),
            })
            .collect();
        Ok(Self {
            atomics,
            slots: vec![MacroDef::empty(); capacity],
            slot_versions: vec![0; capacity],
            version: 0,
        })
    }

    pub fn atomics(&self) -> &[AtomicAction] {
        &self.atomics
    }

    pub fn atomic_count(&self) -> usize {
        self.atomics.len()
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn output_arity(&self) -> usize {
        self.atomics.len() + self.slots.len()
    }

    pub fn slots(&self) -> &[MacroDef] {
        &self.slots
    }

    /// Global replacement counter; bumped on every install.
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Version tag of the content behind an output index. Atomic outputs are
    /// always version 0; a macro slot carries the global version at which its
    /// content last changed.
    pub fn slot_version(&self, index: usize) -> u64 {
        match self.macro_slot(index) {
            Some(slot) => self.slot_versions[slot],
            None => 0,
        }
    }

    pub fn is_macro(&self, index: usize) -> bool {
        index >= self.atomics.len() && index < self.output_arity()
    }

    fn macro_slot(&self, index: usize) -> Option<usize> {
        if self.is_macro(index) {
            Some(index - self.atomics.len())
        } else {
            None
        }
    }

    pub fn is_enabled(&self, index: usize) -> bool {
        if index < self.atomics.len() {
            true
        } else {
            self.macro_slot(index)
                .map(|s| self.slots[s].enabled)
                .unwrap_or(false)
        }
    }

    pub fn enabled_mask(&self) -> Vec<bool> {
        (0..self.output_arity()).map(|i| self.is_enabled(i)).collect()
    }

    pub fn enabled_count(&self) -> usize {
        self.atomics.len() + self.slots.iter().filter(|m| m.enabled).count()
    }

    /// The atomic actions an output index stands for.
    pub fn expand_output_index(&self, index: usize) -> Result<Vec<ActionId>> {
        let arity = self.output_arity();
        if index >= arity {
            return Err(Error::IndexOutOfRange { index, arity });
        }
        match self.macro_slot(index) {
            None => Ok(vec![index]),
            Some(slot) => {
                let m = &self.slots[slot];
                if !m.enabled {
                    return Err(Error::DisabledSlot { index });
                }
                Ok(m.sequence.clone())
            }
        }
    }

    /// Human-readable name for an output, e.g. `right` or `[right,right,right]`.
    pub fn output_label(&self, index: usize) -> String {
        match self.macro_slot(index) {
            None if index < self.atomics.len() => self.atomics[index].label.clone(),
            None => format!("<invalid {index}>"),
            Some(slot) => {
                let m = &self.slots[slot];
                if !m.enabled {
                    return "<disabled>".into();
                }
                format!("[{}]", self.labels_of(&m.sequence).join(","))
            }
        }
    }

    pub fn labels_of(&self, sequence: &[ActionId]) -> Vec<String> {
        sequence
            .iter()
            .map(|&a| {
                self.atomics
                    .get(a)
                    .map(|x| x.label.clone())
                    .unwrap_or_else(|| a.to_string())
            })
            .collect()
    }

    fn validate(&self, m: &MacroDef) -> Result<()> {
        if !m.enabled {
            return Ok(());
        }
        if m.sequence.is_empty() {
            return Err(Error::InvalidMacro("enabled macro has no actions".into()));
        }
        if let Some(&bad) = m.sequence.iter().find(|&&a| a >= self.atomics.len()) {
            return Err(Error::InvalidMacro(format!(
                "action id {bad} is not an atomic action (|A| = {})",
                self.atomics.len()
            )));
        }
        Ok(())
    }

    /// Fills the macro slots in order from `new_list`. Excess macros are cut
    /// off, leftover slots become empty and disabled.
    pub fn install(&mut self, new_list: &[MacroDef]) -> Result<ReplacementRecord> {
        for m in new_list.iter().take(self.capacity()) {
            self.validate(m)?;
        }
        self.version += 1;
        let installed = new_list.len().min(self.capacity());
        let mut changed_slots = Vec::new();
        for slot in 0..self.capacity() {
            let next = match new_list.get(slot) {
                Some(m) if m.enabled => MacroDef::new(m.sequence.clone()),
                _ => MacroDef::empty(),
            };
            if next != self.slots[slot] {
                self.slots[slot] = next;
                self.slot_versions[slot] = self.version;
                changed_slots.push(slot);
            }
        }
        Ok(ReplacementRecord {
            version: self.version,
            installed,
            discarded: new_list.len().saturating_sub(self.capacity()),
            disabled: self.slots.iter().filter(|m| !m.enabled).count(),
            changed_slots,
        })
    }

    pub fn slot_records(&self) -> Vec<SlotRecord> {
        self.slots
            .iter()
            .enumerate()
            .map(|(slot, m)| SlotRecord {
                slot,
                enabled: m.enabled,
                actions: m.sequence.clone(),
                labels: self.labels_of(&m.sequence),
            })
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, out: W) -> Result<()> {
        write_slot_records(out, &self.slot_records())
    }

    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = fs::File::create(path)?;
        self.write_jsonl(std::io::BufWriter::new(file))
    }
}

/// One line of the macro-set JSON-lines format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: usize,
    pub enabled: bool,
    pub actions: Vec<ActionId>,
    pub labels: Vec<String>,
}

pub fn write_slot_records<W: Write>(mut out: W, records: &[SlotRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_slot_records<R: Read>(input: R) -> Result<Vec<SlotRecord>> {
    let mut records = Vec::new();
    for line in BufReader::new(input).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}

/// Converts slot records back into an ordered macro list suitable for
/// [`ActionSet::install`].
pub fn macros_from_records(records: &[SlotRecord]) -> Vec<MacroDef> {
    let mut sorted: Vec<&SlotRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.slot);
    sorted
        .into_iter()
        .map(|r| MacroDef {
            sequence: r.actions.clone(),
            enabled: r.enabled,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_action_set() -> ActionSet {
        let mut set = ActionSet::with_capacity(&["a0", "a1"], 1).unwrap();
        set.install(&[MacroDef::new(vec![0, 0, 1])]).unwrap();
        set
    }

    #[test]
    fn expand_atomic_is_identity() {
        let set = two_action_set();
        assert_eq!(set.expand_output_index(0).unwrap(), vec![0]);
        assert_eq!(set.expand_output_index(1).unwrap(), vec![1]);
    }

    #[test]
    fn expand_macro_is_verbatim() {
        let set = two_action_set();
        assert_eq!(set.expand_output_index(2).unwrap(), vec![0, 0, 1]);
    }

    #[test]
    fn expand_out_of_range() {
        let set = two_action_set();
        assert!(matches!(
            set.expand_output_index(5),
            Err(Error::IndexOutOfRange { index: 5, arity: 3 })
        ));
    }

    #[test]
    fn expand_disabled_slot_is_distinct_error() {
        let set = ActionSet::new(&["a", "b"]).unwrap();
        assert!(matches!(
            set.expand_output_index(3),
            Err(Error::DisabledSlot { index: 3 })
        ));
    }

    #[test]
    fn default_capacity_matches_atomic_count() {
        let set = ActionSet::new(&["l", "r", "u"]).unwrap();
        assert_eq!(set.capacity(), 3);
        assert_eq!(set.output_arity(), 6);
        assert_eq!(set.enabled_count(), 3);
    }

    #[test]
    fn install_rejects_macro_of_macros() {
        let mut set = ActionSet::new(&["l", "r"]).unwrap();
        let err = set.install(&[MacroDef::new(vec![0, 2])]).unwrap_err();
        assert!(matches!(err, Error::InvalidMacro(_)));
        let err = set.install(&[MacroDef::new(vec![])]).unwrap_err();
        assert!(matches!(err, Error::InvalidMacro(_)));
    }

    #[test]
    fn slot_versions_track_changed_content() {
        let mut set = ActionSet::new(&["l", "r"]).unwrap();
        set.install(&[MacroDef::new(vec![0, 0]), MacroDef::new(vec![1, 1])])
            .unwrap();
        assert_eq!(set.slot_version(2), 1);
        assert_eq!(set.slot_version(3), 1);
        let rec = set
            .install(&[MacroDef::new(vec![0, 0]), MacroDef::new(vec![1, 0])])
            .unwrap();
        assert_eq!(rec.changed_slots, vec![1]);
        assert_eq!(set.slot_version(2), 1);
        assert_eq!(set.slot_version(3), 2);
        assert_eq!(set.slot_version(0), 0);
    }

    #[test]
    fn jsonl_round_trip() {
        let set = two_action_set();
        let mut buf = Vec::new();
        set.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "{\"slot\":0,\"enabled\":true,\"actions\":[0,0,1],\"labels\":[\"a0\",\"a0\",\"a1\"]}\n"
        );
        let back = read_slot_records(&buf[..]).unwrap();
        let mut other = ActionSet::with_capacity(&["a0", "a1"], 1).unwrap();
        other.install(&macros_from_records(&back)).unwrap();
        assert_eq!(other.slots(), set.slots());
    }
}
