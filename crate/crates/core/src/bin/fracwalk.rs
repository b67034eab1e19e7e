fn main() {
    std::process::exit(fracwalk::harness::cli::run(std::env::args_os()));
}
