fn main() {
    std::process::exit(swag_cli::run_cli(std::env::args_os()));
}
