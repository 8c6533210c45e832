//! File formats, networking, reports and the command-line front-end around
//! `skytrack-core`.

pub mod clock;
pub mod config;
pub mod dataset;
pub mod mission;
pub mod net;
pub mod overlay;
pub mod pngio;
pub mod report;
pub mod sweep;

pub use skytrack_core as core;
pub mod cli;
