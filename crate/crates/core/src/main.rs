fn main() -> std::process::ExitCode {
    tqc::cli::main()
}
