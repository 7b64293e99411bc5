use std::io::Write;

fn main() {
    // Logging is configured by flags only, never from the environment.
    env_logger::Builder::new().filter_level(log::LevelFilter::Warn).init();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = viewsynth::cli::dispatch(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    let _ = std::io::stdout().flush();
    std::process::exit(code);
}
