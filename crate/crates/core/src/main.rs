fn main() {
    std::process::exit(mps_core::cli::run_cli(std::env::args_os()));
}
