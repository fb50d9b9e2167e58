fn main() -> std::process::ExitCode {
    cpeal::cli::main()
}
