fn main() {
    std::process::exit(fptm::cli::run(std::env::args_os()));
}
