//! Text-to-SQL error correction toolkit: SQL normalization, clause
//! decomposition into a Python-dictionary representation, edit scripts at
//! token, clause and program granularity, an interpreter for edit programs,
//! evaluation metrics, training-data synthesis and simulated interaction.

pub mod dataset;
pub mod edits;
pub mod editvm;
pub mod interact;
pub mod metrics;
pub mod pydict;
pub mod sql;
