fn main() -> std::process::ExitCode {
    htl::cli::main()
}
