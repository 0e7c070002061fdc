fn main() -> std::process::ExitCode {
    std::process::ExitCode::from(netsep::cli::run(std::env::args_os()))
}
