fn main() {
    std::process::exit(ssr_bell::cli::run_with_args(std::env::args_os()));
}
