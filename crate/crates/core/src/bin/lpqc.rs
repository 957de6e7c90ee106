fn main() {
    std::process::exit(lpqc::cli::run_from(std::env::args_os()));
}
