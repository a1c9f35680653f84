use std::process::ExitCode;

fn main() -> ExitCode {
    msled::cli::main_with_args(std::env::args_os())
}
