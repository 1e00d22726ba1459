fn main() {
    std::process::exit(sir_cli::run());
}
