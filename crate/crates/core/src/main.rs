fn main() {
    std::process::exit(fibdirac::cli::run(std::env::args_os()));
}
