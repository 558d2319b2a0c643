//! Reverse-mode differentiation over recorded matrix operations.

mod merge;
mod tape;

pub use merge::MergePattern;
pub use tape::{DropoutMask, Fault, Gradients, Tape, Var};
