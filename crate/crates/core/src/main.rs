fn main() -> std::process::ExitCode {
    coevo_core::cli::main()
}
