//! Experiment configuration and the runners behind the `qace` binary.

pub mod config;
pub mod run;

/// Configuration problems exit with 1, runtime failures with 2.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(String),
}

impl From<String> for Failure {
    fn from(s: String) -> Self {
        Failure::Config(s)
    }
}
