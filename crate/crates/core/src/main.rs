fn main() {
    std::process::exit(fairtp::cli::run());
}
