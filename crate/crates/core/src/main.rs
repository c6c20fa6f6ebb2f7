fn main() {
    std::process::exit(parmor::cli::run(std::env::args()));
}
