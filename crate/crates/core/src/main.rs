fn main() {
    std::process::exit(pfnn::cli::run(std::env::args_os()));
}
