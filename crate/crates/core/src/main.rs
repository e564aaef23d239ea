fn main() -> std::process::ExitCode {
    gausstv::cli::main()
}
