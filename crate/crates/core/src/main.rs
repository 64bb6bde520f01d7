use std::process::ExitCode;

fn main() -> ExitCode {
    ksym::cli::main_with_args(std::env::args_os())
}
