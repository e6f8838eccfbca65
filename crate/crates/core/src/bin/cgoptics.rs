fn main() -> std::process::ExitCode {
    cgoptics::cli::main_with(std::env::args_os())
}
