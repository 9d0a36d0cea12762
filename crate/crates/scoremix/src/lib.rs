//! Command-line front end for `scoremix-core`: configuration, dataset
//! loading and reproducible output directories.

pub mod cli;
pub mod commands;
pub mod config;
pub mod io;

pub use scoremix_core;
