fn main() {
    std::process::exit(lipq::cli::run_cli(std::env::args_os()));
}
