//! Command-line front end: `generate`, `train`, `eval` and `ablate`.

pub mod args;
pub mod commands;
pub mod error;
pub mod settings;

use clap::Parser;

pub use args::{AblateArgs, Cli, Command, EvalArgs, GenerateArgs, ModelFlags, TrainArgs};
pub use commands::{cmd_ablate, cmd_eval, cmd_generate, cmd_train, output_dir};
pub use error::{CliError, EXIT_DATA, EXIT_INTERNAL, EXIT_OK, EXIT_USAGE};

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a).map(|_| ()),
        Command::Train(a) => cmd_train(a).map(|_| ()),
        Command::Eval(a) => cmd_eval(a).map(|_| ()),
        Command::Ablate(a) => cmd_ablate(a).map(|_| ()),
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
