fn main() -> std::process::ExitCode {
    boostvi::cli::main()
}
