fn main() {
    std::process::exit(partgnn::cli::run(std::env::args_os()));
}
