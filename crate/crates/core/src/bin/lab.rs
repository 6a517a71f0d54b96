fn main() {
    std::process::exit(smoothlab::cli::run(std::env::args_os()));
}
