fn main() {
    std::process::exit(causal_medians_cli::run(std::env::args_os()));
}
