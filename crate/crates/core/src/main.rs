fn main() {
    std::process::exit(sckmc::cli::run());
}
