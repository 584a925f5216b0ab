fn main() {
    std::process::exit(semstream::harness::cli::run(std::env::args_os()));
}
