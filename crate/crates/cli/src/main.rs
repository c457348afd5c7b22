use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let result = miquel_cli::run_command(std::env::args_os());
    let stream: &mut dyn Write =
        if result.exit_code <= miquel_cli::EXIT_FAILED_CHECK { &mut std::io::stdout() } else { &mut std::io::stderr() };
    let _ = stream.write_all(result.report.as_bytes());
    ExitCode::from(result.exit_code as u8)
}
