fn main() {
    std::process::exit(payda_sim::cli::run_cli(std::env::args_os()));
}
