use std::process::ExitCode;

fn main() -> ExitCode {
    penalty_aqc::cli::main_with_args(std::env::args_os())
}
