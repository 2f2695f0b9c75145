fn main() {
    std::process::exit(precistab::cli::run(std::env::args_os()));
}
