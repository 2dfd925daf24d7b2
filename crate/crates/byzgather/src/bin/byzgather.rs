fn main() {
    std::process::exit(byzgather::cli::run_cli());
}
