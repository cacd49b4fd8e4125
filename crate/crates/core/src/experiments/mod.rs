//! Parameter sweeps, the coherent/incoherent comparison suite and the
//! built-in models they run on.

pub mod models;
pub mod config;
pub mod sweep;
pub mod cic;
pub mod report;
