use std::process::ExitCode;

fn main() -> ExitCode {
    hazardlab::cli::main_with_args(std::env::args_os())
}
