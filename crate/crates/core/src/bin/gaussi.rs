fn main() -> std::process::ExitCode {
    gaussi::cli::main()
}
