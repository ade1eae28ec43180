fn main() {
    std::process::exit(qedlab::cli::run_cli());
}
