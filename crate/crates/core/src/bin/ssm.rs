fn main() {
    std::process::exit(ssm_core::cli::run_cli(std::env::args_os()));
}
