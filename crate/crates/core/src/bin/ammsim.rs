fn main() {
    std::process::exit(ammsim::cli::cli_main(std::env::args_os()));
}
