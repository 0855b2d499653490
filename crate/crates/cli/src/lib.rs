//! Command-line front end for reset-control frequency analysis.

pub mod commands;
pub mod config;
