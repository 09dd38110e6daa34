use std::process::ExitCode;

fn main() -> ExitCode {
    reluproc::cli::run(std::env::args_os())
}
