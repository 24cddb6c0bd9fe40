fn main() -> std::process::ExitCode {
    spin_collapse::cli::main()
}
