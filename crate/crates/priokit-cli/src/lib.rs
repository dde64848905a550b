//! Library surface of the `priokit` command-line tool: scenario-file parsing,
//! report rendering, and the four subcommand implementations. The binary in
//! `main.rs` only does argument parsing and exit-code mapping.

pub mod commands;
pub mod report;
pub mod scenario_file;

/// Errors of the command layer, split by exit-code class.
#[derive(Debug)]
pub enum CliError {
    /// Parse/validation problems: exit code 2.
    Input(String),
    /// Numerical or feasibility failures: exit code 3.
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(msg) => write!(f, "input error: {msg}"),
            CliError::Numerical(msg) => write!(f, "numerical error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}
