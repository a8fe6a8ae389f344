use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(capprop_cli::run(std::env::args_os()))
}
