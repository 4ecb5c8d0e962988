use std::process::ExitCode;

fn main() -> ExitCode {
    sain::cli::main_with_args(std::env::args_os())
}
