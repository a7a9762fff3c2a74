fn main() {
    std::process::exit(survkit::harness::cli_main(std::env::args()));
}
