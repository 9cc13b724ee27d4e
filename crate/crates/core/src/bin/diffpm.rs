fn main() {
    std::process::exit(diffpm::cli::run(std::env::args_os()));
}
