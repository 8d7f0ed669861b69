mod args;
mod commands;
mod render;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::Cli;
use commands::CliError;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::usage(e.render().to_string().trim_end())),
    };
    let rendered = match commands::run(&cli.command) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let text = render::render(&rendered, cli.format);
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                return fail(&CliError {
                    kind: "io".into(),
                    message: format!("cannot write {}: {e}", path.display()),
                    code: 2,
                });
            }
        }
        None => print!("{text}"),
    }
    ExitCode::SUCCESS
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.code as u8)
}
