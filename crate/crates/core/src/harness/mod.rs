//! Corpus ingestion, translation clients, evaluation, sweeps and reports.

pub mod corpus;
pub mod evaluate;
pub mod profile;
pub mod report;
pub mod sweep;
pub mod synthetic;
pub mod translate;
