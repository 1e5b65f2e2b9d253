//! Core library for mlfix: the artifact model, the check engine, the
//! knowledge base and the analysis agents.

pub mod agents;
pub mod artifact;
pub mod bundle;
pub mod checks;
pub mod kb;
pub mod table;
