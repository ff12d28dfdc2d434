//! Replay-buffer data structures shared by all agents: a deduplicating
//! max-priority queue for prioritized sweeping and a sum-tree proportional
//! sampler for prioritized experience replay.

mod pqueue;
mod sum_tree;

pub use pqueue::{MaxPriorityQueue, QueueEntry};
pub use sum_tree::ProportionalSampler;

/// One stored experience.
///
/// `priority` mirrors the value held by whatever structure indexes this
/// transition; the buffer that owns it keeps the two in sync. When
/// `terminal` is set, `next_state` must not contribute any bootstrap
/// value in updates that consume this record.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S = usize> {
    pub state: S,
    pub action: usize,
    pub reward: f64,
    pub next_state: S,
    pub terminal: bool,
    pub priority: f64,
}

impl<S> Transition<S> {
    pub fn new(state: S, action: usize, reward: f64, next_state: S, terminal: bool) -> Self {
        Transition {
            state,
            action,
            reward,
            next_state,
            terminal,
            priority: 0.0,
        }
    }
}
