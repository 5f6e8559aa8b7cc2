use std::process::ExitCode;

fn main() -> ExitCode {
    if let Err(e) = ptk::app::init_threads() {
        eprintln!("ptk: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    let code = ptk::app::run_with(std::env::args_os(), &mut std::io::stdout().lock());
    ExitCode::from(code as u8)
}
