fn main() {
    std::process::exit(nlmc_flow::cli::run());
}
