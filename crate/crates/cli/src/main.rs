use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(evtsir::run_from(std::env::args_os()))
}
