fn main() {
    std::process::exit(aztec_cli::run_main());
}
