fn main() {
    std::process::exit(frugal::cli::run());
}
