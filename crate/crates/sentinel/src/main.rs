fn main() {
    std::process::exit(sentinel::cli::run());
}
