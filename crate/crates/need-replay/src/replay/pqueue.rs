use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// A queue entry: a (state, action) key with its stored priority.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueEntry {
    pub state: usize,
    pub action: usize,
    pub priority: f64,
}

/// Priority queue over (state, action) keys for prioritized sweeping.
///
/// At most one entry per key; re-inserting keeps the larger priority.
/// `pop_best` takes a scorer so plain sweeping (score = priority) and
/// need-weighted sweeping (score = priority * need) share the structure;
/// the argmax is a linear scan, which is fine at the queue sizes the
/// maze produces.
#[derive(Debug, Default, Clone)]
pub struct MaxPriorityQueue {
    entries: BTreeMap<(usize, usize), f64>,
}

impl MaxPriorityQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Insert `key` with `priority`, keeping the larger priority on re-insert.
    pub fn insert(&mut self, key: (usize, usize), priority: f64) -> Result<()> {
        if priority < 0.0 || priority.is_nan() {
            return Err(Error::NegativePriority(priority));
        }
        let slot = self.entries.entry(key).or_insert(f64::NEG_INFINITY);
        if priority > *slot {
            *slot = priority;
        }
        Ok(())
    }

    /// Remove and return the entry maximizing `scorer`.
    ///
    /// Ties break toward the smallest state id, then the smallest action id;
    /// iteration order of the underlying map makes the first maximum seen
    /// the winner.
    pub fn pop_best<F>(&mut self, mut scorer: F) -> Result<QueueEntry>
    where
        F: FnMut(&QueueEntry) -> f64,
    {
        let mut best: Option<((usize, usize), f64)> = None;
        for (&key, &priority) in &self.entries {
            let entry = QueueEntry {
                state: key.0,
                action: key.1,
                priority,
            };
            let score = scorer(&entry);
            match best {
                Some((_, best_score)) if score <= best_score => {}
                _ => best = Some((key, score)),
            }
        }
        let (key, _) = best.ok_or(Error::EmptyQueue)?;
        let priority = self.entries.remove(&key).unwrap();
        Ok(QueueEntry {
            state: key.0,
            action: key.1,
            priority,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = QueueEntry> + '_ {
        self.entries.iter().map(|(&(s, a), &p)| QueueEntry {
            state: s,
            action: a,
            priority: p,
        })
    }
}
