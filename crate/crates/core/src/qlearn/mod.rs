//! Q-function backends, the semi-MDP target, masked ε-greedy selection,
//! open-loop macro execution and the epoch-based training loop.

mod agent;
mod backend;
mod config;
mod train;

pub use agent::{
    discount_pow, execute_output, is_current, masked_argmax, masked_max, q_update, select_output,
    smdp_target, Execution, UpdateStats,
};
pub use backend::{AnyQ, Backend, LinearQ, NetworkQ, QDump, QFunction, TabularQ, DEFAULT_HIDDEN};
pub use config::{
    scaled_replacement_epochs, AgentConfig, Exploration, REFERENCE_EPOCHS,
    REFERENCE_REPLACEMENT_EPOCHS,
};
pub use train::{evaluate, train_phase, Evaluation, MacroEvent, TrainOutput, Trainer};
