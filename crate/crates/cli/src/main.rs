fn main() {
    std::process::exit(isonbhd_cli::run_cli(std::env::args_os()));
}
