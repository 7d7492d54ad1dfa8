fn main() {
    std::process::exit(devchain::cli::run());
}
