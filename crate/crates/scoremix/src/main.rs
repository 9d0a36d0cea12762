use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(scoremix::cli::run(std::env::args_os()))
}
