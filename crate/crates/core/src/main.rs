fn main() {
    std::process::exit(infergen::cli::run(std::env::args_os()));
}
