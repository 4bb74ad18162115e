fn main() {
    std::process::exit(hitchin_limits::cli::run());
}
