fn main() -> std::process::ExitCode {
    gcl::cli::main()
}
