//! Configuration, file formats and experiment runner for the `sisgraphon`
//! command line tool.

pub mod config;
pub mod kernel_file;
pub mod output;
pub mod run;
