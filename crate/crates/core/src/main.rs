fn main() {
    std::process::exit(gaugecut::cli::run());
}
