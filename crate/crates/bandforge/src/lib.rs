//! File formats, parallel execution and the command-line front end for
//! [`bandforge_core`].

pub mod cli;
pub mod config;
pub mod exec;
pub mod io;
pub mod manifest;

pub use bandforge_core;
