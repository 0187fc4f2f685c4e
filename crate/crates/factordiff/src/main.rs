fn main() {
    std::process::exit(factordiff::cli::run());
}
