//! Hierarchical self-consistency verification for sampled mathematical
//! reasoning traces.

pub mod consistency;
pub mod equivalence;
pub mod iso;
pub mod numeric;
pub mod repair;
pub mod sampler;
pub mod simlab;
pub mod symbolic;
pub mod theorem;
pub mod trace;
