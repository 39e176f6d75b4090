pub mod coeffs;
pub mod error;
pub mod opcore;
mod parallel;
pub mod recurrence;
pub mod sampling;
pub mod turan;
pub mod commutator;
pub mod pipeline;
