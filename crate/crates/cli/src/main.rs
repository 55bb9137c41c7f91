fn main() {
    std::process::exit(toposcale_cli::run(std::env::args_os()));
}
