fn main() -> std::process::ExitCode {
    iritrack::cli::run(std::env::args_os())
}
