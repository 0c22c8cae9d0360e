fn main() -> std::process::ExitCode {
    ebm_regress::cli::main()
}
