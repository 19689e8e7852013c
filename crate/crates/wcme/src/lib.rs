//! Command-line front end for the weak-coupling master equations: scenario
//! files, presets, and the evolve, meanforce, verify and compare commands.

pub mod commands;
pub mod error;
pub mod scenario;
