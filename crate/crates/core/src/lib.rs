//! Q-learning over semi-MDPs with open-loop macro-actions.
//!
//! The action space is the atomic actions of an environment plus a fixed
//! number of macro slots. Macros are built by repeating actions, by mining
//! frequent action windows from recent behaviour, or at random, and can be
//! replaced on a schedule during training. Exact oracles for the bundled
//! deterministic environments support checking learned values.

pub mod action;
pub mod analysis;
pub mod envs;
pub mod error;
pub mod experiment;
pub mod macros;
pub mod qlearn;
pub mod replay;
pub mod trace;

pub use action::{ActionId, ActionSet, AtomicAction, MacroDef};
pub use error::{Error, Result};
