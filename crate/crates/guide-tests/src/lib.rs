//! The book's Rust snippets, compiled and run by `cargo test --doc`.
//!
//! mdbook renders `book/src` but cannot execute the examples; including
//! each chapter as module documentation here turns every fenced Rust
//! block into a doctest, so the guide and the crate cannot drift apart.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/replay-prioritization.md")]
pub mod replay_prioritization {}

#[doc = include_str!("../../../book/src/successor-representation.md")]
pub mod successor_representation {}

#[doc = include_str!("../../../book/src/need-term.md")]
pub mod need_term {}

#[doc = include_str!("../../../book/src/environments.md")]
pub mod environments {}

#[doc = include_str!("../../../book/src/agents.md")]
pub mod agents {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
