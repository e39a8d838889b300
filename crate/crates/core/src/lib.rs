//! Semantics-engineering toolkit: scoped syntax from binding signatures,
//! labelled big-step rules, fuel-bounded evaluation, bounded bisimilarity
//! checks, and Howe-closure property sweeps.

pub mod bisim;
pub mod eval;
pub mod howe;
pub mod instances;
pub mod rules;
pub mod surface;
pub mod syntax;
