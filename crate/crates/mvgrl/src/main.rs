use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(mvgrl::cli::run_args(std::env::args_os()))
}
